from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Dict, Iterator, List, Tuple

import numpy as np
from scipy.stats import rankdata

from core.dataset import Dataset, GroupIndex
from core.errors import ConfigError, SamplingError
from core.metrics import GroupLossTable, group_losses
from core.model import BCE, ModelParams
from services.logging_service import get_logger

logger = get_logger("fairbatch")

CRITERIA = ("eqopp", "eqodds", "dp")
SAMPLING_MODES = ("iid", "stratified")

Cell = Tuple[int, int]


@dataclass(frozen=True)
class FairnessCriterion:
    kind: str = "eqopp"
    threshold: float = 0.0

    def __post_init__(self):
        if self.kind not in CRITERIA:
            raise ConfigError(f"Critério de justiça desconhecido: {self.kind} (opções: {', '.join(CRITERIA)})")
        if self.threshold < 0:
            raise ConfigError(f"O limiar T deve ser >= 0: {self.threshold}")


@dataclass(frozen=True)
class Block:
    """Cells sharing a fixed total sampling mass.

    A block of k cells owns k-1 cumulative coordinates starting at ``offset``:
    coordinate j is the mass of cells[0..j], so cell j receives
    lambda_j - lambda_{j-1}.
    """

    cells: Tuple[Cell, ...]
    total: float
    offset: int

    @property
    def dims(self) -> int:
        return len(self.cells) - 1


@dataclass(frozen=True, eq=False)
class LambdaState:
    lam: np.ndarray
    upper: np.ndarray
    alpha: float
    blocks: Tuple[Block, ...]
    fixed: Tuple[Tuple[Cell, float], ...] = ()

    @property
    def d(self) -> int:
        return int(self.lam.size)

    def block_of(self, dim: int) -> Block:
        for block in self.blocks:
            if block.offset <= dim < block.offset + block.dims:
                return block
        raise SamplingError(f"Dimensão de lambda inexistente: {dim}")


@dataclass(frozen=True, eq=False)
class SamplingDistribution:
    set_probs: np.ndarray
    example_probs: np.ndarray
    index: GroupIndex


@dataclass(frozen=True, eq=False)
class BatchPlan:
    batches: np.ndarray
    batch_size: int

    @property
    def batches_per_epoch(self) -> int:
        return int(self.batches.shape[0])

    def __iter__(self) -> Iterator[np.ndarray]:
        return iter(self.batches)


@dataclass(frozen=True)
class Objective:
    """Signed disparity driving one lambda coordinate.

    A positive disparity moves the coordinate by ``direction * alpha``.
    """

    dimension: int
    disparity: float
    direction: int = 1


def _readonly(values) -> np.ndarray:
    values = np.array(values, dtype=np.float64)
    values.setflags(write=False)
    return values


def _layout(criterion: FairnessCriterion, gi: GroupIndex) -> Tuple[Tuple[Block, ...], Dict[Cell, float]]:
    if gi.n_z < 2:
        raise ConfigError("FairBatch exige pelo menos dois grupos sensíveis (n_z >= 2).")
    if gi.n_y < 2:
        raise ConfigError("FairBatch exige pelo menos dois rótulos (n_y >= 2).")
    if gi.m == 0:
        raise SamplingError("Conjunto de treino vazio.")

    m = float(gi.m)
    blocks: List[Block] = []
    fixed: Dict[Cell, float] = {}
    offset = 0

    def add_block(cells: Tuple[Cell, ...]) -> None:
        nonlocal offset
        total = sum(gi.count(y, z) for y, z in cells) / m
        blocks.append(Block(cells=cells, total=total, offset=offset))
        offset += len(cells) - 1

    if criterion.kind == "eqopp":
        add_block(tuple((1, z) for z in range(gi.n_z)))
        for y in range(gi.n_y):
            if y != 1:
                for z in range(gi.n_z):
                    fixed[(y, z)] = gi.count(y, z) / m
    elif criterion.kind == "eqodds":
        for y in range(gi.n_y):
            add_block(tuple((y, z) for z in range(gi.n_z)))
    else:
        if gi.n_y != 2:
            raise ConfigError("Paridade demográfica exige rótulo binário.")
        for z in range(gi.n_z):
            add_block(((0, z), (1, z)))
    return tuple(blocks), fixed


def init_lambda(criterion: FairnessCriterion, gi: GroupIndex, alpha: float) -> LambdaState:
    """Lambda at the point where the induced distribution is uniform over examples."""
    if alpha < 0:
        raise ConfigError(f"alpha deve ser >= 0: {alpha}")
    blocks, fixed = _layout(criterion, gi)

    lam: List[float] = []
    upper: List[float] = []
    m = float(gi.m)
    for block in blocks:
        missing = [cell for cell in block.cells if gi.count(*cell) == 0]
        if missing:
            raise SamplingError(f"Células sem exemplos para o critério {criterion.kind}: {missing}")
        mass = 0.0
        for y, z in block.cells[:-1]:
            mass += gi.count(y, z) / m
            lam.append(mass)
            upper.append(block.total)

    return LambdaState(
        lam=_readonly(lam),
        upper=_readonly(upper),
        alpha=float(alpha),
        blocks=blocks,
        fixed=tuple(sorted(fixed.items())),
    )


def _example_probs(set_probs: np.ndarray, gi: GroupIndex) -> np.ndarray:
    probs = np.zeros(gi.m)
    for (y, z), rows in gi.cells.items():
        if rows.size:
            probs[rows] = set_probs[y, z] / rows.size
    return probs


def _distribution(set_probs: np.ndarray, gi: GroupIndex) -> SamplingDistribution:
    if abs(set_probs.sum() - 1.0) > 1e-12:
        raise SamplingError(f"Probabilidades dos conjuntos não somam 1: {set_probs.sum()!r}")
    return SamplingDistribution(
        set_probs=_readonly(set_probs),
        example_probs=_readonly(_example_probs(set_probs, gi)),
        index=gi,
    )


def sampling_distribution(ls: LambdaState, criterion: FairnessCriterion, gi: GroupIndex) -> SamplingDistribution:
    set_probs = np.zeros((gi.n_y, gi.n_z))
    for cell, mass in ls.fixed:
        set_probs[cell] = mass

    for block in ls.blocks:
        coords = ls.lam[block.offset : block.offset + block.dims]
        masses = np.diff(np.concatenate([[0.0], coords, [block.total]]))
        if np.any(masses < -1e-12):
            raise SamplingError(f"Probabilidade negativa induzida por lambda={ls.lam.tolist()} ({criterion.kind})")
        for cell, mass in zip(block.cells, np.maximum(masses, 0.0)):
            set_probs[cell] = mass

    return _distribution(set_probs, gi)


def uniform_distribution(gi: GroupIndex) -> SamplingDistribution:
    return _distribution(gi.counts / float(gi.m), gi)


def _largest_remainder(total: int, probs: np.ndarray) -> np.ndarray:
    raw = total * probs
    counts = np.floor(raw).astype(np.int64)
    remainder = total - int(counts.sum())
    if remainder > 0:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:remainder]] += 1
    return counts


def _draw_members(
    sd: SamplingDistribution, cell: Cell, size: int, rng: np.random.Generator
) -> np.ndarray:
    rows = sd.index.rows(*cell)
    within = sd.example_probs[rows]
    if np.all(within == within[0]):
        return rows[rng.integers(0, rows.size, size=size)]
    return rows[rng.choice(rows.size, size=size, p=within / within.sum())]


def draw_epoch(
    sd: SamplingDistribution,
    b: int,
    num_batches: int,
    rng: np.random.Generator,
    mode: str = "iid",
) -> BatchPlan:
    """Draw ``num_batches`` minibatches of ``b`` rows with replacement.

    ``iid`` picks a (y, z) set from ``set_probs`` for every slot, then a member of
    that set. ``stratified`` fixes per-set counts in every batch by
    largest-remainder rounding of ``b * set_probs``.
    """
    if b < 1:
        raise SamplingError(f"Tamanho de batch deve ser >= 1: {b}")
    if mode not in SAMPLING_MODES:
        raise SamplingError(f"Modo de amostragem desconhecido: {mode}")

    gi = sd.index
    cells = [(y, z) for y in range(gi.n_y) for z in range(gi.n_z)]
    probs = sd.set_probs.ravel()
    for cell, prob in zip(cells, probs):
        if prob > 0 and gi.count(*cell) == 0:
            raise SamplingError(f"Célula {cell} tem probabilidade {prob:.6f} mas nenhum exemplo.")

    if mode == "iid":
        total = b * num_batches
        picks = np.empty(total, dtype=np.int64)
        chosen = rng.choice(len(cells), size=total, p=probs / probs.sum())
        for flat, cell in enumerate(cells):
            slots = np.flatnonzero(chosen == flat)
            if slots.size:
                picks[slots] = _draw_members(sd, cell, slots.size, rng)
        return BatchPlan(batches=picks.reshape(num_batches, b), batch_size=b)

    per_batch = _largest_remainder(b, probs)
    columns = []
    for cell, count in zip(cells, per_batch):
        if count:
            columns.append(_draw_members(sd, cell, int(count) * num_batches, rng).reshape(num_batches, int(count)))
    batches = np.concatenate(columns, axis=1) if columns else np.empty((num_batches, 0), dtype=np.int64)
    return BatchPlan(batches=rng.permuted(batches, axis=1), batch_size=b)


def adjacent_gaps(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return values[:-1] - values[1:]


def multigroup_objectives(t: GroupLossTable, criterion: FairnessCriterion) -> List[Objective]:
    """Adjacent-pair disparities L_{y,j} - L_{y,j+1} feeding the i* rule.

    Equal opportunity uses the y=1 row. Equalized odds uses the label class whose
    largest adjacent gap is biggest (later class on ties). Demographic parity uses
    the group-normalized table of losses against the all-ones target: the y=0 gap
    of pair (j, j+1) lowers coordinate j when positive, the y=1 gap raises j+1.
    """
    if t.n_z < 2:
        raise ConfigError("Objetivos multigrupo exigem n_z >= 2.")
    width = t.n_z - 1

    if criterion.kind == "eqopp":
        return [Objective(j, float(gap)) for j, gap in enumerate(adjacent_gaps(t.means[1]))]

    if criterion.kind == "eqodds":
        chosen, best = 0, -1.0
        for y in range(t.n_y):
            worst = float(np.max(np.abs(adjacent_gaps(t.means[y]))))
            if worst >= best:
                chosen, best = y, worst
        return [Objective(chosen * width + j, float(gap)) for j, gap in enumerate(adjacent_gaps(t.means[chosen]))]

    if t.n_y != 2:
        raise ConfigError("Paridade demográfica exige rótulo binário.")
    normalized = t.normalized
    objectives: List[Objective] = []
    for j, (gap0, gap1) in enumerate(zip(adjacent_gaps(normalized[0]), adjacent_gaps(normalized[1]))):
        objectives.append(Objective(j, float(gap0), direction=-1))
        objectives.append(Objective(j + 1, float(gap1), direction=1))
    return objectives


def update_lambda(ls: LambdaState, criterion: FairnessCriterion, t: GroupLossTable) -> LambdaState:
    objectives = multigroup_objectives(t, criterion)
    best = None
    for objective in objectives:
        if best is None or abs(objective.disparity) >= abs(best.disparity):
            best = objective
    if best is None or abs(best.disparity) <= criterion.threshold:
        return ls

    dim = best.dimension
    block = ls.block_of(dim)
    lam = np.array(ls.lam, copy=True)
    lam[dim] += ls.alpha * np.sign(best.disparity) * best.direction

    # Keep block coordinates ordered so every induced set mass stays >= 0.
    low = lam[dim - 1] if dim > block.offset else 0.0
    high = lam[dim + 1] if dim < block.offset + block.dims - 1 else block.total
    lam[dim] = min(max(lam[dim], low, 0.0), high, ls.upper[dim])

    logger.debug(
        "Lambda atualizado: dim=%d, disparidade=%.6f, %s -> %s",
        dim,
        best.disparity,
        ls.lam.tolist(),
        lam.tolist(),
    )
    return replace(ls, lam=_readonly(lam))


def outer_loss_table(p: ModelParams, d: Dataset, gi: GroupIndex, criterion: FairnessCriterion) -> GroupLossTable:
    target = "ones" if criterion.kind == "dp" else None
    return group_losses(p, d, gi, BCE, target=target)


def signed_gd_1d(
    f_eval: Callable[[float], Tuple[float, float]],
    lam0: float,
    alpha: float,
    steps: int,
    upper: float,
) -> np.ndarray:
    """lambda <- clip(lambda - alpha * sign(g1 - f1), 0, upper); returns steps + 1 values."""
    if alpha <= 0:
        raise ConfigError(f"alpha deve ser > 0: {alpha}")
    if not 0.0 <= lam0 <= upper:
        raise ConfigError(f"lambda inicial fora de [0, {upper}]: {lam0}")

    trajectory = np.empty(steps + 1)
    trajectory[0] = lam = float(lam0)
    for t in range(1, steps + 1):
        f1, g1 = f_eval(lam)
        lam = min(max(lam - alpha * np.sign(g1 - f1), 0.0), upper)
        trajectory[t] = lam
    return trajectory


def convergence_envelope(lam0: float, lam_star: float, alpha: float, t) -> np.ndarray | float:
    return np.maximum(abs(lam0 - lam_star) - np.asarray(t) * alpha, alpha)


def loss_weighted_within_group(
    sd: SamplingDistribution, losses: np.ndarray, temperature: float = 1.0
) -> SamplingDistribution:
    """Re-weight examples inside each (y, z) set, keeping the set masses.

    Within a set, example i gets weight p_i * rank_i ** -temperature where rank 1
    is the largest loss and tied losses share their average rank; weights are
    renormalised to the set's mass.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.shape != sd.example_probs.shape:
        raise SamplingError("Vetor de perdas com tamanho diferente do conjunto de treino.")
    if not np.all(np.isfinite(losses)) or np.any(losses < 0):
        raise SamplingError("Perdas por exemplo devem ser finitas e não negativas.")

    probs = np.array(sd.example_probs, copy=True)
    for (y, z), rows in sd.index.cells.items():
        mass = sd.set_probs[y, z]
        if rows.size == 0 or mass <= 0:
            continue
        ranks = rankdata(-losses[rows], method="average")
        weights = sd.example_probs[rows] * ranks ** (-temperature)
        probs[rows] = mass * weights / weights.sum()

    return SamplingDistribution(set_probs=sd.set_probs, example_probs=_readonly(probs), index=sd.index)
