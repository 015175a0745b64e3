from __future__ import annotations

from typing import Any, Dict, Tuple

import pandas as pd
import plotly.express as px
import streamlit as st

from core.config import DEFAULT_ALPHA, DEFAULT_BATCH_SIZE, SAMPLERS, RunConfig
from core.dataset import describe_groups
from core.errors import FairBatchError
from core.experiments import TARGET_DISPARITY
from core.fairbatch import CRITERIA, SAMPLING_MODES
from core.formatters import format_disparity, format_lambdas, format_percentage
from core.training import run_train
from core.ui import PLOTLY_CONFIG, chart_card, hero, inject_global_styles, metric_cards, style_fig
from services.logging_service import configure_logging, get_logger

st.set_page_config(page_title="FairBatch | Treino", layout="wide")

CRITERION_LABELS = {
    "eqopp": "Igualdade de oportunidade",
    "eqodds": "Chances equalizadas",
    "dp": "Paridade demográfica",
}


@st.cache_data(show_spinner=False)
def train_cached(config: Dict[str, Any]) -> Tuple[pd.DataFrame, pd.DataFrame, list]:
    result = run_train(RunConfig(**config))
    return result.frame(), describe_groups(result.train_index), result.final.lambdas


def render_sidebar() -> RunConfig | None:
    st.sidebar.header("Configuração do treino")
    with st.sidebar.form("train_form"):
        data = st.text_input("CSV (vazio = dataset sintético)", value="")
        synthetic_n = st.number_input("Tamanho do sintético", min_value=100, max_value=20000, value=3000, step=100)
        criterion = st.selectbox("Critério", CRITERIA, format_func=CRITERION_LABELS.get)
        sampler = st.selectbox("Amostrador", SAMPLERS)
        alpha = st.number_input("alpha", min_value=0.0, max_value=0.5, value=DEFAULT_ALPHA, step=0.001, format="%.4f")
        threshold = st.number_input("Limiar T", min_value=0.0, max_value=1.0, value=0.0, step=0.01)
        batch_size = st.number_input("Tamanho do batch", min_value=1, max_value=2000, value=DEFAULT_BATCH_SIZE)
        epochs = st.slider("Épocas", min_value=10, max_value=1000, value=200, step=10)
        seed = st.number_input("Semente", min_value=0, value=0, step=1)
        sampling_mode = st.selectbox("Modo de amostragem", SAMPLING_MODES)
        sensitive_feature = st.checkbox("Atributo sensível como entrada do modelo", value=True)
        submit = st.form_submit_button("Treinar", use_container_width=True)

    if not submit and "run_config" not in st.session_state:
        return None
    if submit:
        try:
            cfg = RunConfig(
                synthetic_n=None if data else int(synthetic_n),
                data=data or None,
                criterion=criterion,
                sampler=sampler,
                alpha=float(alpha),
                threshold=float(threshold),
                batch_size=int(batch_size),
                epochs=int(epochs),
                seed=int(seed),
                sampling_mode=sampling_mode,
                sensitive_feature=bool(sensitive_feature),
            ).validate()
        except FairBatchError as exc:
            st.sidebar.error(str(exc))
            return None
        st.session_state["run_config"] = cfg
    return st.session_state["run_config"]


def render_results(cfg: RunConfig, logger) -> None:
    try:
        with st.spinner("Treinando..."):
            frame, groups, lambdas = train_cached(cfg.to_dict())
    except (FairBatchError, OSError) as exc:
        logger.error("Falha no treino pelo painel: %s", exc)
        st.error(f"Falha no treino: {exc}")
        return

    final = frame.iloc[-1]
    target = TARGET_DISPARITY[cfg.criterion]
    metric_cards(
        [
            ("Acurácia (teste)", format_percentage(final["test_accuracy"])),
            ("Disparidade EO", format_disparity(final["eo"])),
            ("Disparidade ED", format_disparity(final["ed"])),
            ("Disparidade DP", format_disparity(final["dp"])),
        ]
    )
    st.caption(f"λ final: {format_lambdas(lambdas)}")

    col1, col2 = st.columns(2)
    with col1:
        with chart_card("Acurácia por época"):
            fig = px.line(frame.reset_index(), x="epoch", y=["train_accuracy", "test_accuracy"])
            fig.update_layout(xaxis_title="Época", yaxis_title="Acurácia", legend_title_text="")
            st.plotly_chart(style_fig(fig, height=340), use_container_width=True, config=PLOTLY_CONFIG)
    with col2:
        with chart_card("Disparidade por época", subtitle=f"Critério alvo: {target.upper()}"):
            fig = px.line(frame.reset_index(), x="epoch", y=["eo", "ed", "dp"])
            fig.update_layout(xaxis_title="Época", yaxis_title="Disparidade", legend_title_text="")
            st.plotly_chart(style_fig(fig, height=340), use_container_width=True, config=PLOTLY_CONFIG)

    lambda_cols = [c for c in frame.columns if c.startswith("lambda_")]
    if not lambda_cols:
        st.info("Os grupos deste treino não admitem λ para o critério escolhido.")
    else:
        render_lambda_chart(frame, lambda_cols)

    with chart_card("Contagem por (y, z) no treino"):
        st.dataframe(groups, use_container_width=True)


def render_lambda_chart(frame: pd.DataFrame, lambda_cols: list) -> None:
    with chart_card("Trajetória de λ", subtitle="Coordenadas cumulativas por bloco de grupos"):
        fig = px.line(frame.reset_index(), x="epoch", y=lambda_cols)
        fig.update_layout(xaxis_title="Época", yaxis_title="λ", legend_title_text="")
        st.plotly_chart(style_fig(fig, height=320), use_container_width=True, config=PLOTLY_CONFIG)


def main():
    configure_logging("logs/app.log")
    logger = get_logger("app")
    inject_global_styles()
    hero(
        "FairBatch",
        "Amostragem adaptativa de minibatches: λ ajusta a probabilidade de cada grupo (y, z) a cada época.",
    )

    cfg = render_sidebar()
    if cfg is None:
        st.info("Configure o treino na barra lateral e clique em Treinar.")
        return
    logger.info("Treino solicitado pelo painel: %s/%s semente %d", cfg.sampler, cfg.criterion, cfg.seed)
    render_results(cfg, logger)


if __name__ == "__main__":
    main()
