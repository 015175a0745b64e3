from __future__ import annotations

import pandas as pd
import plotly.graph_objects as go
import streamlit as st

from core.bilevel_lab import (
    OuterSurface,
    check_monotone_components,
    check_nonconvex,
    check_quasiconvex,
    counterexample_endpoints,
    default_fixtures,
    outer_components,
    sweep_surface,
)
from core.errors import ConvergenceError
from core.fairbatch import signed_gd_1d
from core.formatters import format_verdict, verdicts_frame
from core.ui import PLOTLY_CONFIG, chart_card, hero, inject_global_styles, metric_cards, style_fig
from core.verification import run_verify
from services.logging_service import configure_logging, get_logger

FIXTURES = {p.name: p for p in default_fixtures()}


@st.cache_data(show_spinner=False)
def cached_surface(name: str, grid_size: int) -> OuterSurface:
    return sweep_surface(FIXTURES[name], grid_size)


def surface_frame(s: OuterSurface) -> pd.DataFrame:
    return pd.DataFrame({"lambda": s.lambdas, "F": s.values, "f1": s.f_values, "g1": s.g_values, "w": s.ws})


def main():
    configure_logging("logs/app.log")
    logger = get_logger("app.laboratorio")
    inject_global_styles()
    hero("Laboratório teórico", "Problemas internos 1-D em forma fechada: F(λ) = |f1(w_λ) − g1(w_λ)|.")

    name = st.sidebar.selectbox("Fixture", list(FIXTURES))
    grid_size = st.sidebar.slider("Pontos da grade", min_value=101, max_value=4001, value=2001, step=100)
    problem = FIXTURES[name]

    try:
        with st.spinner("Resolvendo o problema interno na grade..."):
            surface = cached_surface(name, grid_size)
    except ConvergenceError as exc:
        logger.error("Falha na varredura de %s: %s", name, exc)
        st.error(f"Solver interno falhou: {exc}")
        return
    frame = surface_frame(surface)

    verdicts = [check_quasiconvex(surface), check_nonconvex(surface), check_monotone_components(surface)]
    metric_cards(
        [
            ("argmin λ*", f"{surface.argmin:.4f}"),
            ("F(λ*)", f"{float(frame['F'].min()):.4g}"),
            ("c1", f"{problem.c1:g}"),
        ]
    )
    for verdict in verdicts:
        st.markdown(format_verdict(verdict))

    with chart_card("F(λ)", subtitle="Quase-convexa pelo lema; não necessariamente convexa"):
        fig = go.Figure()
        fig.add_trace(go.Scatter(x=frame["lambda"], y=frame["F"], mode="lines", name="F"))
        fig.add_vline(x=surface.argmin, line_dash="dot", line_color="#facc15")
        fig.update_layout(xaxis_title="λ", yaxis_title="F(λ)")
        st.plotly_chart(style_fig(fig, height=360), use_container_width=True, config=PLOTLY_CONFIG)

    with chart_card("Componentes externas", subtitle="f1(w_λ) não cresce e g1(w_λ) não decresce"):
        fig = go.Figure()
        fig.add_trace(go.Scatter(x=frame["lambda"], y=frame["f1"], mode="lines", name="f1(w_λ)"))
        fig.add_trace(go.Scatter(x=frame["lambda"], y=frame["g1"], mode="lines", name="g1(w_λ)"))
        fig.update_layout(xaxis_title="λ")
        st.plotly_chart(style_fig(fig, height=320), use_container_width=True, config=PLOTLY_CONFIG)

    with chart_card("Descida de sinal em λ", subtitle="λ ← clip(λ − α·sign(g1 − f1))"):
        c1, c2, c3 = st.columns(3)
        lam0 = c1.number_input("λ inicial", min_value=0.0, max_value=float(problem.c1), value=0.0, step=0.05)
        alpha = c2.number_input("α", min_value=0.001, max_value=0.5, value=0.01, step=0.005, format="%.3f")
        steps = c3.number_input("Passos", min_value=1, max_value=2000, value=200, step=50)
        trajectory = signed_gd_1d(outer_components(problem), float(lam0), float(alpha), int(steps), problem.c1)
        fig = go.Figure()
        fig.add_trace(go.Scatter(y=trajectory, mode="lines", name="λ_t"))
        fig.add_hline(y=surface.argmin, line_dash="dot", line_color="#facc15")
        fig.update_layout(xaxis_title="passo", yaxis_title="λ")
        st.plotly_chart(style_fig(fig, height=300), use_container_width=True, config=PLOTLY_CONFIG)

    if name == "contraexemplo":
        expected_0, expected_1 = counterexample_endpoints()
        st.caption(
            f"Extremos: F(0) = {frame['F'].iloc[0]:.8f} (esperado {expected_0:.8f}), "
            f"F(1) = {frame['F'].iloc[-1]:.8f} (esperado {expected_1:.8f})"
        )

    st.divider()
    if st.button("Executar bateria completa de verificações"):
        with st.spinner("Verificando..."):
            report = run_verify()
        if report.passed:
            st.success("Todas as verificações passaram.")
        else:
            st.error(f"{len(report.failures)} verificação(ões) falharam.")
        st.dataframe(verdicts_frame(report.checks), use_container_width=True)


main()
