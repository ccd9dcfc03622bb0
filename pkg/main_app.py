# -*- coding: utf-8 -*-
import os
import tempfile

import pandas as pd
import streamlit as st

import config
from data.loader import load_records, load_rule_sets
from data.preprocess import PdsExtractionProcessor
from data.simulator import Hypothesis, LabelMode, SimConfig, generate_fleet, sweep_cases
from insight import analyzer, calibration, governance_gate, grounding, stability
from insight.report import build_report_tables
from util.errors import AuditEngineError
from util.export import create_excel_report, create_pdf_report
from visualization.charts import (
    PLOTLY_AVAILABLE,
    create_coverage_risk_chart,
    create_fleet_scatter,
    create_level_bar_chart,
    create_reliability_diagram,
    create_sigma_trend_chart,
    create_verdict_scatter,
)

st.set_page_config(page_title="모더레이션 판정 방어가능성 감사", page_icon="🛡️", layout="wide")


def initialize_session_state():
    session_vars = [
        'pds_frame', 'attrition', 'rule_sets', 'truth', 'model',
        'sweep_cases', 'sweep_groups', 'verdicts', 'report_tables',
    ]
    for var in session_vars:
        if var not in st.session_state:
            st.session_state[var] = None


def _upload_to_path(uploaded_file) -> str:
    suffix = os.path.splitext(uploaded_file.name)[1]
    with tempfile.NamedTemporaryFile(delete=False, suffix=suffix) as fh:
        fh.write(uploaded_file.getvalue())
        return fh.name


def _extract(records, n_lines=None):
    result = PdsExtractionProcessor().process_records(records, n_lines=n_lines)
    st.session_state.pds_frame = result.frame
    st.session_state.attrition = result.attrition
    st.session_state.model = None
    return result


def _current_model():
    return st.session_state.model or calibration.equal_weights_model()


def _scored_frame():
    frame = st.session_state.pds_frame.copy()
    frame["S"] = calibration.score_frame(frame, _current_model())
    return frame


def main():
    initialize_session_state()
    st.title("🛡️ 모더레이션 판정 방어가능성 감사")

    tabs = st.tabs(["📥 데이터", "📐 캘리브레이션", "🏛️ DI / AI", "🚦 게이트", "🌡️ 안정성", "🔍 그라운딩 검증", "📄 보고서"])

    with tabs[0]:  # 데이터 탭
        col1, col2 = st.columns([1, 1])
        with col1:
            st.subheader("📁 감사 데이터셋 업로드")
            dataset_file = st.file_uploader("데이터셋 (JSONL)", type=['jsonl', 'json'])
            rules_file = st.file_uploader("규칙 집합 (JSON)", type=['json'])
            truth_file = st.file_uploader("정답 사이드카 (CSV, 선택)", type=['csv'])
            if dataset_file and st.button("📊 추출 시작", type="secondary"):
                with st.spinner("레코드를 검증하고 PDS를 추출 중입니다..."):
                    try:
                        report = load_records(_upload_to_path(dataset_file))
                        result = _extract(report.records, report.n_lines)
                        if rules_file:
                            st.session_state.rule_sets = load_rule_sets(_upload_to_path(rules_file))
                        if truth_file:
                            st.session_state.truth = pd.read_csv(truth_file)
                        if report.errors:
                            st.warning(f"⚠️ 건너뛴 줄 {len(report.errors)}개: {dict(report.error_counts)}")
                        st.success(f"✅ 유효 감사 {result.n_valid}개 추출 완료")
                    except AuditEngineError as exc:
                        st.error(f"❌ {exc}")

        with col2:
            st.subheader("🧪 합성 함대 생성")
            hypothesis = st.radio("분산 가설", [h.value for h in Hypothesis], horizontal=True)
            n_cohorts = st.slider("코호트 수", 2, 60, config.SIM_N_COHORTS)
            temperature = st.slider("온도 T", 0.1, 2.0, config.SIM_TEMPERATURE, step=0.1)
            adversarial = st.slider("공격 케이스 비율", 0.0, 0.5, 0.1, step=0.05)
            seed = st.number_input("seed", value=0, min_value=0, step=1)
            if st.button("🚀 시뮬레이션 실행", type="primary"):
                with st.spinner("합성 감사 레코드를 생성 중입니다..."):
                    try:
                        cfg = SimConfig(
                            temperature=temperature, hypothesis=Hypothesis(hypothesis), seed=int(seed),
                            n_cohorts=n_cohorts, adversarial_fraction=adversarial,
                        )
                        fleet = generate_fleet(cfg)
                        _extract(fleet.records)
                        st.session_state.rule_sets = {rs.community_id: rs for rs in fleet.rule_sets}
                        st.session_state.truth = fleet.truth
                        st.success(f"✅ 레코드 {len(fleet.records)}개 생성 및 추출 완료")
                    except AuditEngineError as exc:
                        st.error(f"❌ {exc}")

        if st.session_state.pds_frame is not None:
            st.markdown("---")
            st.subheader("📋 PDS 추출 결과")
            if st.session_state.attrition:
                st.info(f"추출 손실: {dict(st.session_state.attrition)}")
            st.dataframe(st.session_state.pds_frame, use_container_width=True)

    if st.session_state.pds_frame is None:
        for tab in tabs[1:]:
            with tab:
                st.info("먼저 데이터 탭에서 데이터셋을 불러오거나 생성하세요.")
        return

    with tabs[1]:  # 캘리브레이션 탭
        st.subheader("📐 PDS 가중치 적합")
        component = st.radio("엔트로피 성분", [c.value for c in calibration.EntropyComponent], horizontal=True)
        holdout = st.slider("held-out 비율", 0.1, 0.9, config.HOLDOUT_FRACTION, step=0.1)
        if st.button("⚙️ 적합 실행", type="primary"):
            with st.spinner("L-BFGS-B로 가중치를 적합 중입니다..."):
                try:
                    fit_on, _ = calibration.split_frame(st.session_state.pds_frame, holdout)
                    st.session_state.model = calibration.fit_frame(fit_on, component)
                    if not st.session_state.model.converged:
                        st.warning("⚠️ 최적화가 수렴하지 않아 최선 반복값을 사용합니다.")
                except AuditEngineError as exc:
                    st.error(f"❌ {exc}")

        model = _current_model()
        if model.fallback:
            st.info("ℹ️ 적합 전에는 동일가중(1/3) 모델을 사용합니다.")
        st.dataframe(pd.DataFrame([calibration.model_summary(model)]), use_container_width=True)

        _, held = calibration.split_frame(st.session_state.pds_frame, holdout)
        try:
            st.dataframe(calibration.held_out_ece_table(held, model, config.ECE_BINS), use_container_width=True)
            scores = calibration.score_frame(held, model)
            usable = scores.notna()
            reliability = calibration.reliability_table(
                scores[usable].to_numpy(), calibration.frame_labels(held)[usable.to_numpy()], config.ECE_BINS,
            )
            if PLOTLY_AVAILABLE:
                st.plotly_chart(create_reliability_diagram(reliability), use_container_width=True, key="reliability")
        except AuditEngineError as exc:
            st.warning(f"⚠️ ECE 계산 불가: {exc}")

    frame = _scored_frame()
    reports = analyzer.build_fleet_reports(frame)
    cohort_df = analyzer.cohort_table(reports)

    with tabs[2]:  # DI / AI 탭
        st.subheader("🏛️ 커뮤니티별 방어가능성 지표")
        st.dataframe(analyzer.agreement_gap_table(reports).set_index('Metric'), use_container_width=True)
        st.dataframe(analyzer.fleet_state_summary(reports), use_container_width=True)
        st.markdown("**불일치 원인 분해**")
        st.json(analyzer.disagreement_split(analyzer.decisions_from_frame(frame)))
        st.markdown("**σ(ρ) 와 inverse check**")
        st.dataframe(analyzer.sigma_rho_table(frame), use_container_width=True)
        st.dataframe(analyzer.level_profile_table(frame, frame["S"]), use_container_width=True)
        if PLOTLY_AVAILABLE:
            st.plotly_chart(create_level_bar_chart(cohort_df), use_container_width=True, key="level_bar")

    with tabs[3]:  # 게이트 탭
        st.subheader("🚦 거버넌스 게이트")
        c1, c2, c3 = st.columns(3)
        di_min = c1.slider("DI 하한", 0.5, 1.0, config.GATE_DI_MIN, step=0.01)
        ai_max = c2.slider("AI 상한", 0.0, 0.5, config.GATE_AI_MAX, step=0.01)
        min_n = c3.number_input("최소 결정 수", min_value=1, value=config.GATE_MIN_DECISIONS)
        cfg = governance_gate.GateConfig(di_min, ai_max, int(min_n), "대시보드")
        scenarios = governance_gate.default_scenarios() + [cfg]
        st.dataframe(governance_gate.scenario_sweep(reports, scenarios), use_container_width=True)
        st.dataframe(governance_gate.gate_table(reports, cfg), use_container_width=True)
        if PLOTLY_AVAILABLE:
            st.plotly_chart(create_fleet_scatter(cohort_df, di_min, ai_max), use_container_width=True, key="fleet_scatter")
            curve = governance_gate.coverage_risk_curve(reports, ai_max, int(min_n))
            st.plotly_chart(create_coverage_risk_chart(curve), use_container_width=True, key="coverage_risk")

    with tabs[4]:  # 안정성 탭
        st.subheader("🌡️ 반복 감사 안정성 스윕")
        hypothesis = st.radio("스윕 가설", [h.value for h in Hypothesis], horizontal=True, key="sweep_h")
        replicates = st.slider("반복 K", 20, 500, 200, step=20)
        if st.button("🌡️ 스윕 실행", type="primary"):
            with st.spinner("케이스 × 온도별 반복을 추출 중입니다..."):
                try:
                    cfg_sim = SimConfig(replicates=replicates, hypothesis=Hypothesis(hypothesis), label_mode=LabelMode.TOKEN)
                    cases, groups = stability.simulated_sweep(sweep_cases(0), cfg_sim)
                    st.session_state.sweep_cases = cases
                    st.session_state.sweep_groups = groups
                except AuditEngineError as exc:
                    st.error(f"❌ {exc}")
        if st.session_state.sweep_cases:
            sweep_df = stability.temperature_sweep_table(st.session_state.sweep_cases, st.session_state.sweep_groups)
            st.dataframe(sweep_df.set_index('Metric'), use_container_width=True)
            try:
                ratios = stability.ratios_by_temperature(st.session_state.sweep_cases, st.session_state.sweep_groups)
                flat = stability.ratio_flatness_test(ratios)
                st.metric("σ̂ 비율 판정", flat.verdict.value, f"범위 {flat.range:.3f}")
            except AuditEngineError as exc:
                st.warning(f"⚠️ {exc}")
            if PLOTLY_AVAILABLE:
                st.plotly_chart(create_sigma_trend_chart(sweep_df), use_container_width=True, key="sigma_trend")

    with tabs[5]:  # 그라운딩 검증 탭
        st.subheader("🔍 인용 그라운딩 + S 2단계 방어")
        if not st.session_state.rule_sets:
            st.info("규칙 집합이 있어야 검증할 수 있습니다.")
        else:
            s_min = st.slider("S 하한", 0.0, 1.0, config.VERIFIER_S_MIN, step=0.01)
            overlap_min = st.slider("overlap 하한", 0.0, 1.0, config.VERIFIER_OVERLAP_MIN, step=0.05)
            floor = calibration.score_floor(_current_model())
            if floor is not None and s_min <= floor:
                st.info(
                    f"ℹ️ 현재 가중치에서 S는 {floor:.3f} 아래로 내려가지 않습니다. "
                    f"S 하한 {s_min:.2f}에서는 FLAG_PDS와 LOW_ENTROPY_FABRICATION이 나오지 않고 그라운딩 판정만 동작합니다."
                )
            verdicts = grounding.verify_frame(frame, st.session_state.rule_sets, frame["S"], s_min, overlap_min)
            st.session_state.verdicts = verdicts
            truth = st.session_state.truth
            if truth is not None and "adversarial" in truth.columns and not verdicts.empty:
                st.dataframe(grounding.adversarial_summary(verdicts, truth), use_container_width=True)
            st.dataframe(verdicts, use_container_width=True)
            if PLOTLY_AVAILABLE:
                st.plotly_chart(create_verdict_scatter(verdicts, s_min, overlap_min), use_container_width=True, key="verdicts")

    with tabs[6]:  # 보고서 탭
        st.subheader("📄 감사 보고서")
        report_author = st.text_input("보고자", value="")
        report_format = st.radio("파일 형식 선택", ["PDF", "Excel"], horizontal=True)
        if st.button("📥 보고서 생성", type="primary", key="make_report"):
            with st.spinner("📄 보고서 생성 중..."):
                tables = build_report_tables(
                    st.session_state.pds_frame, _current_model(), governance_gate.default_scenarios(),
                    st.session_state.rule_sets, st.session_state.truth,
                )
                if report_format == "PDF":
                    file_bytes = create_pdf_report(
                        tables, charts={"Fleet": create_fleet_scatter(cohort_df, config.GATE_DI_MIN, config.GATE_AI_MAX)},
                        report_author=report_author.strip() or "보고자 미기재",
                    )
                    filename, mime_type = "defensibility_audit_report.pdf", "application/pdf"
                else:
                    file_bytes = create_excel_report(tables, calibration.model_summary(_current_model()))
                    filename = "defensibility_audit_report.xlsx"
                    mime_type = "application/vnd.openxmlformats-officedocument.spreadsheetml.sheet"
            if file_bytes:
                st.download_button(label="⬇️ 보고서 다운로드", data=file_bytes, file_name=filename, mime=mime_type)
                st.success("✅ 보고서가 성공적으로 생성되었습니다!")
            else:
                st.error("❌ 보고서 생성에 실패했습니다.")


if __name__ == "__main__":
    main()
