from __future__ import annotations

from typing import Optional, Sequence

import pandas as pd

from core.bilevel_lab import Verdict


def format_percentage(value: Optional[float], digits: int = 1) -> str:
    if value is None or pd.isna(value):
        return "n/d"
    return f"{value * 100:.{digits}f}%".replace(".", ",")


def format_disparity(value: Optional[float]) -> str:
    if value is None or pd.isna(value):
        return "n/d"
    return f"{value:.3f}".replace(".", ",")


def format_lambdas(values: Sequence[float], digits: int = 4) -> str:
    if not len(values):
        return "()"
    return "(" + "; ".join(f"{v:.{digits}f}".replace(".", ",") for v in values) + ")"


def format_verdict(verdict: Verdict) -> str:
    if verdict.holds is None:
        icon = "⚪"
    elif verdict.holds:
        icon = "🟢"
    else:
        icon = "🔴"
    where = f" em λ={verdict.location:.4f}" if verdict.location is not None else ""
    return f"{icon} {verdict.check}: {verdict.status}{where}"


def verdicts_frame(verdicts: Sequence[Verdict]) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "Verificação": v.check,
                "Passou": "sim" if v.holds else ("n/d" if v.holds is None else "não"),
                "Status": v.status,
                "Detalhe": v.detail,
            }
            for v in verdicts
        ]
    )
