# -*- coding: utf-8 -*-
import pandas as pd

from config import AUDIT_COLORS
from .table import color_map, get_category_color

try:
    import plotly.express as px
    import plotly.graph_objects as go
    PLOTLY_AVAILABLE = True
except ImportError:
    PLOTLY_AVAILABLE = False

FONT = dict(family="Malgun Gothic, Apple SD Gothic Neo, sans-serif")


def create_reliability_diagram(reliability_df: pd.DataFrame):
    """동일빈도 빈별 평균 S vs 실제 방어가능 비율"""
    if not PLOTLY_AVAILABLE or reliability_df is None or reliability_df.empty:
        return None

    fig = go.Figure()
    fig.add_trace(go.Scatter(
        x=[0, 1], y=[0, 1], mode='lines', name='완전 캘리브레이션',
        line=dict(color=AUDIT_COLORS['neutral'], dash='dash'),
    ))
    fig.add_trace(go.Scatter(
        x=reliability_df['mean_S (prob)'], y=reliability_df['defensible_rate (prob)'],
        mode='lines+markers', name='빈별 관측',
        marker=dict(size=10, color=AUDIT_COLORS['accent']),
        text=reliability_df['n'], hovertemplate='S=%{x:.3f}<br>방어가능=%{y:.3f}<br>n=%{text}',
    ))
    fig.update_layout(
        title="📐 신뢰도 다이어그램", xaxis_title="평균 S", yaxis_title="방어가능 비율 (L1+L2)",
        xaxis=dict(range=[0, 1]), yaxis=dict(range=[0, 1]), height=450, font=FONT,
    )
    return fig


def create_fleet_scatter(cohort_df: pd.DataFrame, di_min: float, ai_max: float):
    """코호트별 DI × AI 산점도와 게이트 경계선"""
    if not PLOTLY_AVAILABLE or cohort_df is None or cohort_df.empty:
        return None

    states = cohort_df['governance_state'].unique()
    fig = px.scatter(
        cohort_df, x='DI (prob)', y='AI (prob)', color='governance_state', size='n',
        hover_name='cohort', color_discrete_map=color_map("state", states), height=500,
        title="🛡️ 커뮤니티별 거버넌스 상태",
    )
    fig.add_vline(x=di_min, line_dash='dash', line_color=AUDIT_COLORS['primary'], annotation_text=f"DI ≥ {di_min:.2f}")
    fig.add_hline(y=ai_max, line_dash='dash', line_color=AUDIT_COLORS['secondary'], annotation_text=f"AI ≤ {ai_max:.2f}")
    fig.update_layout(xaxis_title="DI", yaxis_title="AI", legend_title="상태", font=FONT)
    return fig


def create_coverage_risk_chart(curve_df: pd.DataFrame):
    """DI 하한을 훑은 결정 커버리지 vs 부적격률"""
    if not PLOTLY_AVAILABLE or curve_df is None or curve_df.empty:
        return None

    fig = px.line(
        curve_df, x='Decision coverage (%)', y='Indefensible rate (%)', markers=True,
        hover_data=['DI min', 'Communities passing'], height=450,
        title="📉 커버리지-위험 프런티어",
    )
    fig.update_traces(line=dict(color=AUDIT_COLORS['primary'], width=3))
    fig.update_layout(xaxis_title="결정 커버리지 (%)", yaxis_title="통과 코호트 부적격률 (%)", font=FONT)
    return fig


def create_sigma_trend_chart(sweep_df: pd.DataFrame):
    """온도별 집단 평균 σ̂_PDS (스윕 표에서)"""
    if not PLOTLY_AVAILABLE or sweep_df is None or sweep_df.empty:
        return None

    temp_cols = [c for c in sweep_df.columns if c.startswith('T=')]
    temps = [float(c[2:]) for c in temp_cols]
    fig = go.Figure()
    for label, group in (("Mean sigma_hat (Flippers)", "FLIPPER"), ("Mean sigma_hat (Stable)", "STABLE")):
        row = sweep_df.loc[sweep_df['Metric'] == label]
        if row.empty:
            continue
        fig.add_trace(go.Scatter(
            x=temps, y=row[temp_cols].iloc[0].tolist(), mode='lines+markers', name=group,
            line=dict(width=3, color=get_category_color("group", group)),
        ))
    fig.update_layout(
        title="🌡️ 온도별 σ̂_PDS", xaxis_title="T", yaxis_title="평균 σ̂_PDS",
        height=450, font=FONT,
    )
    return fig


def create_verdict_scatter(verdict_df: pd.DataFrame, s_min: float, overlap_min: float):
    """overlap × S 판정 산점도"""
    if not PLOTLY_AVAILABLE or verdict_df is None or verdict_df.empty:
        return None

    verdicts = verdict_df['verdict'].unique()
    fig = px.scatter(
        verdict_df, x='overlap (prob)', y='S (prob)', color='verdict', symbol='archetype',
        hover_name='id', color_discrete_map=color_map("verdict", verdicts), height=500,
        title="🔍 2단계 방어 판정",
    )
    fig.add_vline(x=overlap_min, line_dash='dash', line_color=AUDIT_COLORS['neutral'])
    fig.add_hline(y=s_min, line_dash='dash', line_color=AUDIT_COLORS['neutral'])
    fig.update_layout(xaxis_title="인용 overlap", yaxis_title="S", legend_title="판정", font=FONT)
    return fig


def create_level_bar_chart(cohort_df: pd.DataFrame):
    """코호트별 L1/L2/L3 누적 막대"""
    if not PLOTLY_AVAILABLE or cohort_df is None or cohort_df.empty:
        return None

    long_df = cohort_df.melt(id_vars='cohort', value_vars=['L1', 'L2', 'L3'], var_name='level', value_name='count')
    fig = px.bar(
        long_df, x='cohort', y='count', color='level', barmode='stack',
        color_discrete_map=color_map("level", ['L1', 'L2', 'L3']), height=450,
        title="📊 코호트별 방어가능성 레벨 분포",
    )
    fig.update_layout(xaxis_title="코호트", yaxis_title="결정 수", legend_title="레벨", font=FONT)
    return fig
