from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Dict, Tuple

import numpy as np

from core.dataset import Dataset, GroupIndex
from core.errors import DisparityError
from core.model import BCE, LossSpec, ModelParams, accuracy, example_losses, predict
from services.logging_service import get_logger

logger = get_logger("metrics")


def _safe_ratio(numerator: np.ndarray, denominator: np.ndarray) -> np.ndarray:
    numerator = np.asarray(numerator, dtype=np.float64)
    denominator = np.asarray(denominator, dtype=np.float64)
    return np.divide(numerator, denominator, out=np.zeros(np.broadcast(numerator, denominator).shape), where=denominator > 0)


@dataclass(frozen=True, eq=False)
class GroupLossTable:
    """Mean criterion loss per (y, z) cell, L_{y,z}, with its count table m_{y,z}.

    Empty cells hold 0 and are listed in ``empty_cells``.
    """

    means: np.ndarray
    counts: np.ndarray
    empty_cells: Tuple[Tuple[int, int], ...] = ()

    @property
    def n_y(self) -> int:
        return int(self.means.shape[0])

    @property
    def n_z(self) -> int:
        return int(self.means.shape[1])

    def cell(self, y: int, z: int) -> float:
        return float(self.means[y, z])

    @property
    def label_marginal(self) -> np.ndarray:
        """L_{y,*}"""
        return _safe_ratio((self.counts * self.means).sum(axis=1), self.counts.sum(axis=1))

    @property
    def group_marginal(self) -> np.ndarray:
        """L_{*,z}"""
        return _safe_ratio((self.counts * self.means).sum(axis=0), self.counts.sum(axis=0))

    @property
    def overall(self) -> float:
        total = self.counts.sum()
        return float((self.counts * self.means).sum() / total) if total else 0.0

    @property
    def normalized(self) -> np.ndarray:
        """L'_{y,z} = (m_{y,z} / m_{*,z}) L_{y,z}."""
        return _safe_ratio(self.counts, self.counts.sum(axis=0)[None, :]) * self.means

    @property
    def dp_offset(self) -> float:
        """c = m_{0,0}/m_{*,0} - m_{0,1}/m_{*,1} (binary alphabets only)."""
        _require_binary(self)
        share = _safe_ratio(self.counts[0], self.counts.sum(axis=0))
        return float(share[0] - share[1])

    def to_dict(self) -> Dict[str, object]:
        return {"means": self.means.tolist(), "counts": self.counts.tolist()}


@dataclass(frozen=True)
class DisparityReport:
    accuracy: float
    eo: float
    ed: float
    dp: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def group_losses(
    p: ModelParams,
    d: Dataset,
    gi: GroupIndex,
    spec: LossSpec = BCE,
    target: str | None = None,
) -> GroupLossTable:
    """Training-time group losses.

    ``target="ones"`` scores every row against label 1 instead of its own label.
    """
    means = np.zeros((gi.n_y, gi.n_z))
    empty = []
    if d.n:
        labels = np.ones(d.n, dtype=np.int64) if target == "ones" else d.labels
        losses = example_losses(p, d.features, labels, spec)
    else:
        losses = np.zeros(0)

    for (y, z), rows in sorted(gi.cells.items()):
        if rows.size == 0:
            empty.append((y, z))
            continue
        means[y, z] = losses[rows].mean()

    if empty:
        logger.warning("Células vazias no cálculo de perdas por grupo (média definida como 0): %s", empty)
    return GroupLossTable(means=means, counts=np.array(gi.counts, dtype=np.int64), empty_cells=tuple(empty))


def eo_disparity(p: ModelParams, d: Dataset, gi: GroupIndex) -> float:
    if gi.n_y < 2 or gi.label_counts[1] == 0:
        raise DisparityError("Disparidade EO exige exemplos com y=1.")

    positive_pred = predict(p, d.features) == 1
    overall = float(positive_pred[d.labels == 1].mean())
    worst = 0.0
    for z in range(gi.n_z):
        if gi.group_counts[z] == 0:
            continue
        rows = gi.rows(1, z)
        if rows.size == 0:
            raise DisparityError(f"Disparidade EO exige exemplos com y=1 no grupo z={z}.")
        worst = max(worst, abs(float(positive_pred[rows].mean()) - overall))
    return worst


def ed_disparity(p: ModelParams, d: Dataset, gi: GroupIndex) -> float:
    if d.n == 0:
        raise DisparityError("Disparidade ED indefinida para conjunto vazio.")

    y_hat = predict(p, d.features)
    classes = range(max(gi.n_y, 2))
    worst = 0.0
    for y in range(gi.n_y):
        label_rows = d.labels == y
        if not label_rows.any():
            continue
        for z in range(gi.n_z):
            if gi.group_counts[z] == 0:
                continue
            rows = gi.rows(y, z)
            if rows.size == 0:
                raise DisparityError(f"Disparidade ED exige a célula (y={y}, z={z}) não vazia.")
            for c in classes:
                conditional = float(np.mean(y_hat[rows] == c))
                marginal = float(np.mean(y_hat[label_rows] == c))
                worst = max(worst, abs(conditional - marginal))
    return worst


def dp_disparity(p: ModelParams, d: Dataset, gi: GroupIndex) -> float:
    if d.n == 0:
        raise DisparityError("Disparidade DP indefinida para conjunto vazio.")

    positive_pred = predict(p, d.features) == 1
    overall = float(positive_pred.mean())
    worst = 0.0
    for z in range(gi.n_z):
        rows = d.sensitive == z
        if not rows.any():
            raise DisparityError(f"Disparidade DP exige o grupo z={z} não vazio.")
        worst = max(worst, abs(float(positive_pred[rows].mean()) - overall))
    return worst


def disparity_report(p: ModelParams, d: Dataset, gi: GroupIndex) -> DisparityReport:
    return DisparityReport(
        accuracy=accuracy(p, d),
        eo=eo_disparity(p, d, gi),
        ed=ed_disparity(p, d, gi),
        dp=dp_disparity(p, d, gi),
    )


def _require_binary(t: GroupLossTable) -> None:
    if t.means.shape != (2, 2):
        raise DisparityError(f"Objetivo suficiente de DP exige y e z binários; tabela {t.means.shape}.")


def dp_sufficient_objective(t: GroupLossTable) -> float:
    """max{ |L'_{1,0} - L'_{1,1}|, |L'_{0,0} - L'_{0,1}|_c } with |x|_c = max{x - c, c - x}."""
    _require_binary(t)
    normalized = t.normalized
    c = t.dp_offset
    positive_gap = abs(normalized[1, 0] - normalized[1, 1])
    negative_gap = normalized[0, 0] - normalized[0, 1]
    return float(max(positive_gap, max(negative_gap - c, c - negative_gap)))
