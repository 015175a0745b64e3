from __future__ import annotations

import pandas as pd
import plotly.express as px
import streamlit as st

from core.config import RunConfig
from core.errors import FairBatchError
from core.experiments import TARGET_DISPARITY, threshold_tradeoff
from core.fairbatch import CRITERIA
from core.formatters import format_disparity, format_percentage
from core.ui import PLOTLY_CONFIG, chart_card, hero, inject_global_styles, style_fig
from services.logging_service import configure_logging, get_logger

DEFAULT_THRESHOLDS = "0, 0.02, 0.05, 0.1"


@st.cache_data(show_spinner=False)
def tradeoff_cached(config: dict, thresholds: tuple, seeds: tuple) -> pd.DataFrame:
    return threshold_tradeoff(RunConfig(**config), thresholds, seeds)


def parse_thresholds(text: str) -> tuple:
    values = sorted({float(part) for part in text.replace(";", ",").split(",") if part.strip()})
    if not values or values[0] < 0:
        raise ValueError("Informe limiares não negativos separados por vírgula.")
    return tuple(values)


def main():
    configure_logging("logs/app.log")
    logger = get_logger("app.compromisso")
    inject_global_styles()
    hero(
        "Curva de compromisso",
        "Limiar T: λ só é atualizado quando a disparidade passa de T. T maior preserva acurácia e tolera mais disparidade.",
    )

    with st.sidebar.form("tradeoff_form"):
        criterion = st.selectbox("Critério", CRITERIA)
        thresholds_text = st.text_input("Limiares T", value=DEFAULT_THRESHOLDS)
        n_seeds = st.slider("Sementes", min_value=1, max_value=10, value=3)
        epochs = st.slider("Épocas", min_value=10, max_value=500, value=100, step=10)
        submit = st.form_submit_button("Executar", use_container_width=True)

    if not submit:
        st.info("Cada limiar roda o FairBatch em todas as sementes; a linha de base uniforme roda uma vez por semente.")
        return

    try:
        thresholds = parse_thresholds(thresholds_text)
        cfg = RunConfig(criterion=criterion, epochs=int(epochs)).validate()
        with st.spinner("Treinando em todas as combinações..."):
            table = tradeoff_cached(cfg.to_dict(), thresholds, tuple(range(n_seeds)))
    except (FairBatchError, ValueError) as exc:
        logger.error("Falha na curva de compromisso: %s", exc)
        st.error(str(exc))
        return

    disparity = TARGET_DISPARITY[criterion].upper()
    view = table.reset_index()
    with chart_card("Acurácia × disparidade", subtitle=f"Medianas sobre {n_seeds} semente(s)"):
        fig = px.line(view, x="disparity", y="accuracy", text="threshold", markers=True)
        fig.update_traces(textposition="top center")
        fig.update_layout(xaxis_title=f"Disparidade {disparity}", yaxis_title="Acurácia (teste)")
        st.plotly_chart(style_fig(fig, height=380), use_container_width=True, config=PLOTLY_CONFIG)

    display = pd.DataFrame(
        {
            "T": view["threshold"],
            "Acurácia": view["accuracy"].map(format_percentage),
            f"Disparidade {disparity}": view["disparity"].map(format_disparity),
            "Perda de acurácia": view["accuracy_loss"].map(lambda v: format_percentage(v, digits=2)),
        }
    )
    st.dataframe(display, use_container_width=True, hide_index=True)


main()
