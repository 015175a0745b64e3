from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Dict, Sequence, Tuple

import numpy as np
from scipy.special import expit, softmax

from core.dataset import Dataset
from core.errors import DatasetError, LossSpecError, ShapeError

PROBA_CLIP = 1e-12

DEFAULT_LR = 0.005
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


def _readonly(values: Any) -> np.ndarray:
    values = np.array(values, dtype=np.float64)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Linear classifier parameters.

    Binary models keep ``weights`` with shape (k,) and a 0-d ``bias``; the
    multiclass variant uses (n_y, k) weights and an (n_y,) bias.
    """

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weights", _readonly(self.weights))
        object.__setattr__(self, "bias", _readonly(self.bias))
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ShapeError("Parâmetros do modelo devem ser finitos.")

    @property
    def multiclass(self) -> bool:
        return self.weights.ndim == 2

    @property
    def n_y(self) -> int:
        return int(self.weights.shape[0]) if self.multiclass else 2

    @property
    def k(self) -> int:
        return int(self.weights.shape[-1])

    def same_shape(self, other: "ModelParams") -> bool:
        return self.weights.shape == other.weights.shape and self.bias.shape == other.bias.shape

    def to_dict(self) -> Dict[str, Any]:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "n_y": self.n_y,
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ModelParams":
        params = cls(weights=payload["weights"], bias=payload["bias"])
        if params.k != payload["k"] or params.n_y != payload["n_y"]:
            raise ShapeError("Checkpoint inconsistente: k/n_y não conferem com os pesos.")
        return params


def _combine(fn: Callable[..., np.ndarray], *params: ModelParams) -> ModelParams:
    return ModelParams(
        weights=fn(*(p.weights for p in params)),
        bias=fn(*(p.bias for p in params)),
    )


def init_params(k: int, n_y: int = 2) -> ModelParams:
    if n_y <= 2:
        return ModelParams(weights=np.zeros(k), bias=0.0)
    return ModelParams(weights=np.zeros((n_y, k)), bias=np.zeros(n_y))


@dataclass(frozen=True)
class LossSpec:
    kind: str = "bce"

    def __post_init__(self):
        if self.kind not in ("bce", "zero_one"):
            raise LossSpecError(f"Tipo de perda desconhecido: {self.kind}")

    @property
    def differentiable(self) -> bool:
        return self.kind == "bce"

    def require_differentiable(self) -> None:
        if not self.differentiable:
            raise LossSpecError("A perda zero-um é apenas de avaliação; gradiente não definido.")


BCE = LossSpec("bce")
ZERO_ONE = LossSpec("zero_one")


def _logits(p: ModelParams, X: np.ndarray) -> np.ndarray:
    if p.multiclass:
        return X @ p.weights.T + p.bias
    return X @ p.weights + p.bias


def predict_proba(p: ModelParams, x: np.ndarray) -> np.ndarray | float:
    """sigmoid(w.x + b) for binary models, softmax for multiclass.

    Accepts a single row or an (n, k) matrix.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x.reshape(1, -1) if single else x
    z = _logits(p, X)
    proba = softmax(z, axis=1) if p.multiclass else expit(z)
    if single:
        return proba[0] if p.multiclass else float(proba[0])
    return proba


def predict(p: ModelParams, X: np.ndarray) -> np.ndarray:
    proba = predict_proba(p, np.atleast_2d(X))
    if p.multiclass:
        return np.argmax(proba, axis=1).astype(np.int64)
    # Exact 0.5 predicts class 0.
    return (proba > 0.5).astype(np.int64)


def example_losses(p: ModelParams, X: np.ndarray, y: np.ndarray, spec: LossSpec = BCE) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if spec.kind == "zero_one":
        return (predict(p, X) != y).astype(np.float64)

    proba = predict_proba(p, X)
    if p.multiclass:
        q = np.clip(proba[np.arange(y.size), y], PROBA_CLIP, 1.0 - PROBA_CLIP)
        return -np.log(q)
    q = np.clip(proba, PROBA_CLIP, 1.0 - PROBA_CLIP)
    return -(y * np.log(q) + (1 - y) * np.log1p(-q))


def example_loss(p: ModelParams, x: np.ndarray, y: int, spec: LossSpec = BCE) -> float:
    return float(example_losses(p, np.asarray(x).reshape(1, -1), np.array([y]), spec)[0])


def _residuals(p: ModelParams, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    proba = predict_proba(p, X)
    if p.multiclass:
        residual = np.array(proba, copy=True)
        residual[np.arange(y.size), y] -= 1.0
        return residual
    return proba - y


def example_gradients(p: ModelParams, X: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-row BCE gradients: (weights with a leading row axis, bias per row)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    residual = _residuals(p, X, y)
    if p.multiclass:
        return residual[:, :, None] * X[:, None, :], residual
    return residual[:, None] * X, residual


def batch_gradient(p: ModelParams, rows: Sequence[int] | np.ndarray, d: Dataset, spec: LossSpec = BCE) -> ModelParams:
    spec.require_differentiable()
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise ShapeError("Minibatch vazio: gradiente indefinido.")

    X = d.features[rows]
    residual = _residuals(p, X, d.labels[rows])
    if p.multiclass:
        return ModelParams(weights=residual.T @ X / rows.size, bias=residual.mean(axis=0))
    return ModelParams(weights=X.T @ residual / rows.size, bias=residual.mean())


@dataclass(frozen=True, eq=False)
class AdamState:
    m: ModelParams
    v: ModelParams
    t: int = 0
    lr: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_EPS


def init_adam(
    p: ModelParams,
    lr: float = DEFAULT_LR,
    beta1: float = DEFAULT_BETA1,
    beta2: float = DEFAULT_BETA2,
    eps: float = DEFAULT_EPS,
) -> AdamState:
    zeros = _combine(np.zeros_like, p)
    return AdamState(m=zeros, v=zeros, t=0, lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(p: ModelParams, s: AdamState, g: ModelParams) -> Tuple[ModelParams, AdamState]:
    if not (p.same_shape(g) and p.same_shape(s.m) and p.same_shape(s.v)):
        raise ShapeError(
            f"Formas incompatíveis no passo Adam: params={p.weights.shape}, gradiente={g.weights.shape}"
        )

    t = s.t + 1
    m = _combine(lambda m_, g_: s.beta1 * m_ + (1.0 - s.beta1) * g_, s.m, g)
    v = _combine(lambda v_, g_: s.beta2 * v_ + (1.0 - s.beta2) * g_ * g_, s.v, g)
    bc1 = 1.0 - s.beta1**t
    bc2 = 1.0 - s.beta2**t
    updated = _combine(
        lambda p_, m_, v_: p_ - s.lr * (m_ / bc1) / (np.sqrt(v_ / bc2) + s.eps),
        p,
        m,
        v,
    )
    return updated, AdamState(m=m, v=v, t=t, lr=s.lr, beta1=s.beta1, beta2=s.beta2, eps=s.eps)


def accuracy(p: ModelParams, d: Dataset) -> float:
    if d.n == 0:
        raise DatasetError("Acurácia indefinida para conjunto vazio.")
    return float(np.mean(predict(p, d.features) == d.labels))
