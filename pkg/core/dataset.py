from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import multivariate_normal

from core.errors import CsvParseError, DatasetError
from services.logging_service import get_logger

logger = get_logger("dataset")

# Class-conditional Gaussians of the synthetic "unfair scenario".
SYNTHETIC_MEANS = {
    0: np.array([-2.0, -2.0]),
    1: np.array([2.0, 2.0]),
}
SYNTHETIC_COVS = {
    0: np.array([[10.0, 1.0], [1.0, 3.0]]),
    1: np.array([[5.0, 1.0], [1.0, 5.0]]),
}
# Row vectors are multiplied by R(pi/4) on the right, x' = x @ R.
SYNTHETIC_ROTATION = math.pi / 4
SYNTHETIC_POSITIVE_RATE = 0.5

_SPLIT_DENOMINATOR = 1_000_000

# Substream order for SeedSequence.spawn in gen_synthetic.
_STREAM_Y, _STREAM_X, _STREAM_Z = 0, 1, 2


def _frozen(values: np.ndarray) -> np.ndarray:
    values = np.ascontiguousarray(values)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    sensitive: np.ndarray
    n_y: int
    n_z: int
    feature_names: Tuple[str, ...] = ()

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim == 1:
            features = features.reshape(-1, 1) if features.size else features.reshape(0, 0)
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        sensitive = np.asarray(self.sensitive, dtype=np.int64).reshape(-1)

        n = labels.shape[0]
        if features.shape[0] != n or sensitive.shape[0] != n:
            raise DatasetError(
                f"Colunas com tamanhos diferentes: features={features.shape[0]}, "
                f"labels={n}, sensitive={sensitive.shape[0]}"
            )
        if self.n_y < 1 or self.n_z < 1:
            raise DatasetError("n_y e n_z devem ser positivos.")
        if n and (labels.min() < 0 or labels.max() >= self.n_y):
            raise DatasetError(f"Rótulos fora do alfabeto [0, {self.n_y}).")
        if n and (sensitive.min() < 0 or sensitive.max() >= self.n_z):
            raise DatasetError(f"Atributo sensível fora do alfabeto [0, {self.n_z}).")

        names = tuple(self.feature_names) or tuple(f"x{j + 1}" for j in range(features.shape[1]))
        if len(names) != features.shape[1]:
            raise DatasetError("Quantidade de nomes de atributos difere do número de colunas.")

        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "sensitive", _frozen(sensitive))
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def k(self) -> int:
        return int(self.features.shape[1])

    def subset(self, rows: Sequence[int] | np.ndarray) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(
            features=self.features[rows],
            labels=self.labels[rows],
            sensitive=self.sensitive[rows],
            n_y=self.n_y,
            n_z=self.n_z,
            feature_names=self.feature_names,
        )

    def to_frame(self, label_column: str = "y", sensitive_column: str = "z") -> pd.DataFrame:
        frame = pd.DataFrame(self.features, columns=list(self.feature_names))
        frame[sensitive_column] = self.sensitive
        frame[label_column] = self.labels
        return frame

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        label_column: str = "y",
        sensitive_column: str = "z",
        n_y: int | None = None,
        n_z: int | None = None,
    ) -> "Dataset":
        feature_columns = [c for c in frame.columns if c not in (label_column, sensitive_column)]
        labels = frame[label_column].to_numpy(dtype=np.int64)
        sensitive = frame[sensitive_column].to_numpy(dtype=np.int64)
        if n_y is None:
            n_y = int(labels.max()) + 1 if labels.size else 1
        if n_z is None:
            n_z = int(sensitive.max()) + 1 if sensitive.size else 1
        return cls(
            features=frame[feature_columns].to_numpy(dtype=np.float64).reshape(len(frame), len(feature_columns)),
            labels=labels,
            sensitive=sensitive,
            n_y=n_y,
            n_z=n_z,
            feature_names=tuple(str(c) for c in feature_columns),
        )


@dataclass(frozen=True, eq=False)
class GroupIndex:
    cells: Dict[Tuple[int, int], np.ndarray]
    counts: np.ndarray
    n_y: int
    n_z: int

    @property
    def m(self) -> int:
        return int(self.counts.sum())

    @property
    def label_counts(self) -> np.ndarray:
        """m_{y,*}"""
        return self.counts.sum(axis=1)

    @property
    def group_counts(self) -> np.ndarray:
        """m_{*,z}"""
        return self.counts.sum(axis=0)

    def count(self, y: int, z: int) -> int:
        return int(self.counts[y, z])

    def rows(self, y: int, z: int) -> np.ndarray:
        return self.cells[(y, z)]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 2 / 3
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction <= 1.0:
            raise DatasetError(f"train_fraction deve estar em (0, 1]: {self.train_fraction}")


def _rotate(points: np.ndarray, angle: float) -> np.ndarray:
    cos, sin = math.cos(angle), math.sin(angle)
    return points @ np.array([[cos, -sin], [sin, cos]])


def gen_synthetic(n: int, seed: int, rotation: float = SYNTHETIC_ROTATION) -> Dataset:
    """Two-Gaussian synthetic data with a rotated-density sensitive attribute.

    Randomness comes from ``np.random.SeedSequence(seed).spawn(3)`` feeding PCG64
    generators: stream 0 draws labels, stream 1 the Gaussian noise, stream 2 the
    sensitive attribute. Gaussians are sampled through their Cholesky factors so
    the output does not depend on a platform SVD.

    The feature rows are multiplied by the rotation matrix on the right, which
    turns them clockwise by ``rotation``. ``rotation=-SYNTHETIC_ROTATION`` gives
    the counter-clockwise variant.
    """
    if n < 1:
        raise DatasetError("O conjunto sintético precisa de pelo menos uma linha (n >= 1).")

    streams = [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(3)]

    labels = (streams[_STREAM_Y].random(n) < SYNTHETIC_POSITIVE_RATE).astype(np.int64)

    noise = streams[_STREAM_X].standard_normal((n, 2))
    features = np.empty((n, 2))
    for y in (0, 1):
        mask = labels == y
        chol = np.linalg.cholesky(SYNTHETIC_COVS[y])
        features[mask] = SYNTHETIC_MEANS[y] + noise[mask] @ chol.T

    rotated = _rotate(features, rotation)
    p0 = multivariate_normal.pdf(rotated, mean=SYNTHETIC_MEANS[0], cov=SYNTHETIC_COVS[0])
    p1 = multivariate_normal.pdf(rotated, mean=SYNTHETIC_MEANS[1], cov=SYNTHETIC_COVS[1])
    p0 = np.atleast_1d(p0)
    p1 = np.atleast_1d(p1)
    total = p0 + p1
    # Both densities underflow only far from both means; split evenly there.
    prob_z1 = np.divide(p1, total, out=np.full(n, 0.5), where=total > 0)
    sensitive = (streams[_STREAM_Z].random(n) < prob_z1).astype(np.int64)

    dataset = Dataset(features=features, labels=labels, sensitive=sensitive, n_y=2, n_z=2)
    logger.info("Conjunto sintético gerado: n=%d, seed=%d, y=1: %d, z=1: %d", n, seed, labels.sum(), sensitive.sum())
    return dataset


def _parse_numeric(frame: pd.DataFrame, column: str) -> pd.Series:
    raw = frame[column].str.strip()
    parsed = pd.to_numeric(raw, errors="coerce")
    bad = parsed.isna() | ~np.isfinite(parsed.to_numpy(dtype=np.float64, na_value=np.nan))
    if bad.any():
        position = int(np.flatnonzero(bad.to_numpy())[0])
        # +2: header line plus one-based numbering.
        raise CsvParseError(
            f"Valor não numérico na linha {position + 2}, coluna '{column}': {frame[column].iloc[position]!r}",
            row=position + 2,
            column=column,
        )
    return raw.map(float)


def _parse_category(values: pd.Series, column: str) -> np.ndarray:
    as_float = values.to_numpy(dtype=np.float64)
    bad = (as_float < 0) | (as_float != np.floor(as_float))
    if bad.any():
        position = int(np.flatnonzero(bad)[0])
        raise CsvParseError(
            f"Coluna '{column}' exige inteiros não negativos; linha {position + 2} contém {as_float[position]!r}",
            row=position + 2,
            column=column,
        )
    return as_float.astype(np.int64)


def load_csv(path: str | Path, label_column: str = "y", sensitive_column: str = "z") -> Dataset:
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as exc:
        raise CsvParseError(f"Arquivo CSV vazio: {path}", row=1) from exc

    columns = [str(c) for c in frame.columns]
    for name in (label_column, sensitive_column):
        if name not in columns:
            raise CsvParseError(f"Coluna obrigatória ausente no cabeçalho: '{name}'", row=1, column=name)
    if frame.empty:
        raise CsvParseError(f"Arquivo CSV sem linhas de dados: {path}", row=2)

    numeric = pd.DataFrame({column: _parse_numeric(frame, column) for column in columns})
    numeric[label_column] = _parse_category(numeric[label_column], label_column)
    numeric[sensitive_column] = _parse_category(numeric[sensitive_column], sensitive_column)

    dataset = Dataset.from_frame(numeric, label_column=label_column, sensitive_column=sensitive_column)
    logger.info("CSV carregado de %s: n=%d, k=%d, n_y=%d, n_z=%d", path, dataset.n, dataset.k, dataset.n_y, dataset.n_z)
    return dataset


def build_group_index(d: Dataset) -> GroupIndex:
    counts = np.zeros((d.n_y, d.n_z), dtype=np.int64)
    cells: Dict[Tuple[int, int], np.ndarray] = {}
    for y in range(d.n_y):
        for z in range(d.n_z):
            rows = np.flatnonzero((d.labels == y) & (d.sensitive == z))
            rows.setflags(write=False)
            cells[(y, z)] = rows
            counts[y, z] = rows.size
    counts.setflags(write=False)
    return GroupIndex(cells=cells, counts=counts, n_y=d.n_y, n_z=d.n_z)


def describe_groups(gi: GroupIndex) -> pd.DataFrame:
    frame = pd.DataFrame(
        gi.counts,
        index=pd.Index([f"y={y}" for y in range(gi.n_y)], name="rótulo"),
        columns=[f"z={z}" for z in range(gi.n_z)],
    )
    frame["total"] = frame.sum(axis=1)
    frame.loc["total"] = frame.sum(axis=0)
    return frame


def split(d: Dataset, s: SplitSpec) -> Tuple[Dataset, Dataset]:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(s.seed)))
    order = rng.permutation(d.n)
    # 0.7 is stored as 0.6999...; floor the decimal fraction it stands for.
    n_train = math.floor(d.n * Fraction(s.train_fraction).limit_denominator(_SPLIT_DENOMINATOR))
    train_rows = np.sort(order[:n_train])
    test_rows = np.sort(order[n_train:])
    return d.subset(train_rows), d.subset(test_rows)


def cutting(d: Dataset, seed: int) -> Dataset:
    groups: List[np.ndarray] = [np.flatnonzero(d.sensitive == z) for z in range(d.n_z)]
    empty = [z for z, rows in enumerate(groups) if rows.size == 0]
    if empty:
        raise DatasetError(f"Cutting exige grupos sensíveis não vazios; vazios: {empty}")

    target = min(rows.size for rows in groups)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    chosen = [rng.choice(rows, size=target, replace=False) for rows in groups]
    logger.info("Cutting: %d grupos reduzidos para %d linhas cada.", d.n_z, target)
    return d.subset(np.concatenate(chosen))


def with_sensitive_feature(d: Dataset) -> Dataset:
    """Appends the sensitive attribute to the model inputs as indicator columns
    ``z=1 .. z=n_z-1``; z=0 is the reference level."""
    indicators = (d.sensitive[:, None] == np.arange(1, d.n_z)).astype(np.float64)
    return Dataset(
        features=np.hstack([d.features, indicators]),
        labels=d.labels,
        sensitive=d.sensitive,
        n_y=d.n_y,
        n_z=d.n_z,
        feature_names=d.feature_names + tuple(f"z={z}" for z in range(1, d.n_z)),
    )
