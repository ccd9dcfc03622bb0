# -*- coding: utf-8 -*-
import json
import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import config
from data.preprocess import ExtractionStatus, PdsVector
from data.records import DefensibilityLevel
from data.simulator import calibration_sample
from insight.calibration import (
    CalibrationModel,
    EntropyComponent,
    calibration_loss,
    collapse_scores,
    compute_ece,
    design_matrix,
    equal_frequency_bins,
    equal_weights_model,
    fit_arrays,
    fit_frame,
    held_out_ece_table,
    load_weights,
    save_weights,
    scalar_collapse,
    score_floor,
    score_frame,
    softmax_weights,
    split_frame,
    split_of,
)
from util.errors import DataError, ErrorCode

OK = {c: ExtractionStatus.OK for c in ("lambda_xi", "h_kappa", "h_w", "sigma_rho")}


def _vector(lam=-0.1, h_kappa=0.2, h_w=0.5, sigma=0.3, flags=None):
    return PdsVector(lam, h_kappa, h_w, sigma, DefensibilityLevel.L1, flags or OK)


def test_scalar_collapse_formula():
    m = CalibrationModel(0.6, 0.1, 0.3)
    expected = math.exp(0.6 * -0.1 - 0.1 * 0.5 - 0.3 * 0.3)
    assert scalar_collapse(_vector(), m) == pytest.approx(expected)


def test_scalar_collapse_uses_selected_entropy():
    m = CalibrationModel(0.2, 0.5, 0.3, EntropyComponent.H_KAPPA)
    assert scalar_collapse(_vector(), m) == pytest.approx(math.exp(-0.02 - 0.1 - 0.09))


def test_scalar_collapse_is_clamped():
    m = CalibrationModel(0.98, 0.01, 0.01)
    assert scalar_collapse(_vector(lam=-1e6), m) == 1e-12
    assert scalar_collapse(_vector(lam=0.0, h_w=0.0, sigma=0.0), m) == 1.0


def test_missing_component_is_an_error():
    flags = dict(OK, sigma_rho=ExtractionStatus.MISSING_POLARITY)
    with pytest.raises(DataError) as exc:
        scalar_collapse(_vector(sigma=None, flags=flags), equal_weights_model())
    assert exc.value.code is ErrorCode.MISSING_COMPONENT


@pytest.mark.parametrize("weights", [(0.5, 0.5, 0.0), (0.5, 0.6, -0.1), (0.3, 0.3, 0.3)])
def test_model_rejects_bad_weights(weights):
    with pytest.raises(DataError):
        CalibrationModel(*weights)


@given(
    x=st.lists(st.floats(min_value=-3.0, max_value=0.0), min_size=3, max_size=3),
    w=st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=3, max_size=3),
)
def test_collapse_monotone_in_lambda(x, w):
    w = np.asarray(w) / np.sum(w)
    lam = np.array([x[0], x[0] + 0.5])
    s = collapse_scores(lam, np.full(2, -x[1]), np.full(2, -x[2] / 3), w)
    assert s[1] >= s[0]


@given(st.lists(st.floats(min_value=-50.0, max_value=50.0), min_size=3, max_size=3))
def test_softmax_weights_stay_on_simplex(u):
    w = softmax_weights(u)
    assert w.sum() == pytest.approx(1.0)
    assert (w > 0).all()


@given(st.permutations(list(range(40))))
def test_ece_ignores_input_order(order):
    rng = np.random.default_rng(3)
    s = rng.uniform(0, 1, 40)
    y = (rng.random(40) < s).astype(int)
    idx = np.asarray(order)
    assert compute_ece(s[idx], y[idx], 4) == pytest.approx(compute_ece(s, y, 4), abs=1e-12)


def test_analytic_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    n = 200
    X = design_matrix(-rng.uniform(0, 1, n), rng.uniform(0, 1.5, n), rng.uniform(0, 1, n))
    y = (rng.random(n) < 0.6).astype(float)
    h = 1e-6
    for u in rng.uniform(-2.0, 2.0, size=(100, 3)):
        _, grad = calibration_loss(u, X, y)
        numeric = np.array([
            (calibration_loss(u + h * e, X, y)[0] - calibration_loss(u - h * e, X, y)[0]) / (2 * h)
            for e in np.eye(3)
        ])
        np.testing.assert_allclose(grad, numeric, rtol=1e-5, atol=1e-8)


def test_degenerate_labels_rejected():
    with pytest.raises(DataError) as exc:
        fit_arrays([-0.1, -0.2, -0.3], [0.1, 0.2, 0.3], [0.1, 0.2, 0.3], [1, 1, 1])
    assert exc.value.code is ErrorCode.DEGENERATE_LABELS


def test_too_few_samples_rejected():
    with pytest.raises(DataError) as exc:
        fit_arrays([-0.1], [0.1], [0.1], [1])
    assert exc.value.code is ErrorCode.TOO_FEW_SAMPLES


def test_fit_never_worse_than_equal_weights():
    frame = calibration_sample(2000, seed=11)
    model = fit_frame(frame)
    X = design_matrix(frame["lambda_xi"], frame["h_w"], frame["sigma_rho"])
    y = (frame["level"] != "L3").astype(float).to_numpy()
    equal_loss, _ = calibration_loss(np.zeros(3), X, y)
    assert model.loss <= equal_loss + 1e-12
    assert sum(model.weights) == pytest.approx(1.0)
    assert (model.weights > 0).all()


def test_recovers_generating_weights():
    recovered = 0
    for seed in range(1, 6):
        frame = calibration_sample(20000, seed=seed, true_weights=(0.6, 0.1, 0.3))
        model = fit_frame(frame)
        recovered += bool(np.all(np.abs(model.weights - np.array([0.6, 0.1, 0.3])) <= 0.05))
    assert recovered >= 4


def test_equal_frequency_bins_are_balanced():
    bins = equal_frequency_bins(np.linspace(0, 1, 23), np.zeros(23), 10)
    sizes = [len(b) for b in bins]
    assert sum(sizes) == 23
    assert max(sizes) - min(sizes) <= 1


def test_ece_examples():
    s = np.array([0.1, 0.1, 0.9, 0.9])
    y = np.array([0, 0, 1, 1])
    assert compute_ece(s, y, 2) == pytest.approx(0.1)
    assert compute_ece(np.full(4, 0.5), np.array([0, 1, 0, 1]), 1) == pytest.approx(0.0)
    with pytest.raises(DataError):
        compute_ece(s, y, 5)


def test_ece_is_small_for_calibrated_scores():
    rng = np.random.default_rng(5)
    s = rng.uniform(0, 1, 50000)
    y = (rng.random(50000) < s).astype(int)
    assert compute_ece(s, y, 10) < 0.01


def test_split_is_deterministic_and_grouped():
    assert split_of("abc") == split_of("abc")
    frame = pd.DataFrame({
        "id": [f"r{i}" for i in range(40)],
        "case_id": [f"c{i // 4}" for i in range(40)],
    })
    cal, held = split_frame(frame, 0.5)
    assert len(cal) + len(held) == 40
    assert not set(cal["case_id"]) & set(held["case_id"])


def test_weights_file_round_trip_and_fallback(tmp_path):
    path = tmp_path / "w.json"
    model = CalibrationModel(0.5, 0.2, 0.3, loss=0.4, n_samples=10)
    save_weights(model, str(path))
    loaded = load_weights(str(path))
    assert loaded.weights.tolist() == pytest.approx([0.5, 0.2, 0.3])
    assert not loaded.fallback

    fallback = load_weights(str(tmp_path / "missing.json"))
    assert fallback.fallback
    assert fallback.weights.tolist() == pytest.approx([1 / 3] * 3)
    with pytest.raises(DataError):
        load_weights(str(tmp_path / "missing.json"), fallback=False)


def test_weights_file_with_extra_key_rejected(tmp_path):
    path = tmp_path / "w.json"
    payload = dict(CalibrationModel(0.5, 0.2, 0.3).to_dict(), extra=1)
    path.write_text(json.dumps(payload), encoding="utf-8")
    with pytest.raises(DataError) as exc:
        load_weights(str(path))
    assert exc.value.code is ErrorCode.SCHEMA_MISMATCH


def test_score_frame_leaves_unusable_rows_nan():
    frame = pd.DataFrame({
        "lambda_xi": [-0.1, None],
        "h_w": [0.5, 0.5],
        "h_kappa": [0.1, 0.1],
        "sigma_rho": [0.2, 0.2],
        "flag_lambda_xi": ["OK", "NO_LEVEL_CANDIDATE"],
    })
    s = score_frame(frame, equal_weights_model())
    assert s.iloc[0] == pytest.approx(math.exp((-0.1 - 0.5 - 0.2) / 3))
    assert math.isnan(s.iloc[1])


@settings(deadline=None, max_examples=10)
@given(seed=st.integers(min_value=0, max_value=50))
def test_held_out_ece_table_per_temperature(seed):
    frame = calibration_sample(400, seed=seed)
    frame["temperature"] = np.where(np.arange(len(frame)) % 2 == 0, 0.2, 1.0)
    table = held_out_ece_table(frame, CalibrationModel(0.6, 0.1, 0.3), bins=10)
    assert table["T"].tolist() == [0.2, 1.0]
    assert table["N"].sum() == 400
    assert table["ECE (prob)"].between(0, 1).all()


def test_collapse_with_reference_weights():
    m = CalibrationModel(0.6289, 0.0114, 0.3598)
    v = _vector(lam=math.log(0.99), h_w=0.569, sigma=0.1)
    assert scalar_collapse(v, m) == pytest.approx(0.9524, abs=1e-4)


def test_collapse_with_equal_weights():
    v = _vector(lam=-3.0, h_w=1.585, sigma=0.9)
    assert scalar_collapse(v, equal_weights_model()) == pytest.approx(0.1607, abs=1e-4)


def test_ece_when_every_label_is_defensible():
    s = np.repeat(np.arange(1, 11) / 10.0, 2)
    assert compute_ece(s, np.ones(20), 10) == pytest.approx(float(np.mean(1 - s)))


def test_weights_file_not_summing_to_one_rejected(tmp_path):
    path = tmp_path / "w.json"
    payload = {"alpha": 0.4, "beta": 0.2, "gamma": 0.2, "component": "h_w", "loss": 0.3, "n_samples": 5}
    path.write_text(json.dumps(payload), encoding="utf-8")
    with pytest.raises(DataError) as exc:
        load_weights(str(path))
    assert exc.value.code is ErrorCode.SCHEMA_MISMATCH


def test_unfitted_model_saves_null_loss(tmp_path):
    path = tmp_path / "w.json"
    save_weights(equal_weights_model(), str(path))
    payload = json.loads(path.read_text(encoding="utf-8"), parse_constant=pytest.fail)
    assert payload["loss"] is None
    assert math.isnan(load_weights(str(path)).loss)


def test_score_floor_is_reached_at_worst_vector():
    m = CalibrationModel(0.6, 0.1, 0.3)
    worst = _vector(lam=math.log(1 / 3), h_w=math.log2(3), sigma=1.0)
    assert score_floor(m) == pytest.approx(scalar_collapse(worst, m))
    assert score_floor(equal_weights_model()) == pytest.approx(0.2929, abs=1e-4)
    assert score_floor(CalibrationModel(0.2, 0.5, 0.3, EntropyComponent.H_KAPPA)) is None


@given(st.lists(st.floats(min_value=-20.0, max_value=20.0), min_size=3, max_size=3))
def test_score_floor_stays_above_default_s_min(u):
    m = CalibrationModel(*softmax_weights(u))
    assert score_floor(m) >= math.exp(-math.log2(3)) - 1e-12
    assert score_floor(m) > config.VERIFIER_S_MIN
