from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Optional, Tuple

import streamlit as st

PLOTLY_CONFIG = {
    "displaylogo": False,
    "modeBarButtonsToRemove": ["lasso2d", "select2d"],
    "responsive": True,
}


def inject_global_styles() -> None:
    st.markdown(
        """
        <style>
            :root {
                --bg-primary: #050b16;
                --bg-card: rgba(10, 17, 33, 0.85);
                --border-color: rgba(148, 163, 184, 0.2);
                --text-primary: #e2e8f0;
                --text-muted: #94a3b8;
                --accent: #38bdf8;
            }

            html, body, [data-testid="block-container"] {
                background: radial-gradient(circle at top right, rgba(56,189,248,0.10), transparent 40%),
                            var(--bg-primary);
                color: var(--text-primary);
            }

            [data-testid="block-container"] {
                padding: 1.2rem 2.2rem 0;
            }

            .hero {
                border: 1px solid var(--border-color);
                border-radius: 22px;
                padding: 22px 30px;
                margin-bottom: 1.6rem;
                background: linear-gradient(120deg, rgba(56,189,248,0.25), rgba(163,230,53,0.12));
            }

            .hero h1 { margin: 0; font-size: 2.1rem; color: #f8fafc; }
            .hero p { margin: 0.4rem 0 0; color: var(--text-muted); }

            .metric-card {
                background: var(--bg-card);
                padding: 16px 18px;
                border-radius: 16px;
                border: 1px solid var(--border-color);
            }

            .metric-card h3 {
                margin-bottom: 4px;
                font-size: 0.8rem;
                font-weight: 500;
                color: var(--text-muted);
                letter-spacing: 0.08em;
            }

            .metric-card p { font-size: 1.5rem; margin: 0; font-weight: 600; }

            .chart-card {
                background: var(--bg-card);
                padding: 1.2rem 1.4rem;
                border-radius: 20px;
                border: 1px solid var(--border-color);
                margin-bottom: 1.4rem;
            }

            .section-title { margin-top: 0; color: #f1f5f9; letter-spacing: 0.04em; }
        </style>
        """,
        unsafe_allow_html=True,
    )


def hero(title: str, subtitle: str) -> None:
    st.markdown(f"<div class='hero'><h1>{title}</h1><p>{subtitle}</p></div>", unsafe_allow_html=True)


def metric_cards(items: Iterable[Tuple[str, str]]) -> None:
    items = list(items)
    for col, (label, value) in zip(st.columns(len(items)), items):
        with col:
            st.markdown(
                f"<div class='metric-card'><h3>{label}</h3><p>{value}</p></div>",
                unsafe_allow_html=True,
            )


@contextmanager
def chart_card(title: Optional[str] = None, subtitle: Optional[str] = None):
    st.markdown("<div class='chart-card'>", unsafe_allow_html=True)
    if title:
        st.markdown(f"<h4 class='section-title'>{title}</h4>", unsafe_allow_html=True)
    if subtitle:
        st.markdown(
            f"<p style='color:#94a3b8;margin-top:-0.35rem;'>{subtitle}</p>",
            unsafe_allow_html=True,
        )
    yield
    st.markdown("</div>", unsafe_allow_html=True)


def style_fig(fig, height: Optional[int] = None):
    fig.update_layout(
        template="plotly_dark",
        plot_bgcolor="rgba(5,11,22,0.6)",
        paper_bgcolor="rgba(5,11,22,0.6)",
        font=dict(color="#f8fafc"),
        margin=dict(t=40, b=40, l=40, r=24),
        legend=dict(orientation="h", y=-0.2),
    )
    fig.update_xaxes(gridcolor="rgba(148,163,184,0.25)")
    fig.update_yaxes(gridcolor="rgba(148,163,184,0.2)")
    if height:
        fig.update_layout(height=height)
    return fig
