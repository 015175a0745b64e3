from __future__ import annotations

from argparse import Namespace
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from core.errors import ConfigError
from core.fairbatch import CRITERIA, SAMPLING_MODES
from core.model import DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS, DEFAULT_LR

SAMPLERS = ("fairbatch", "uniform", "cutting")

DEFAULT_ALPHA = 0.005
DEFAULT_BATCH_SIZE = 100
DEFAULT_EPOCHS = 400
DEFAULT_SPLIT = 2 / 3
DEFAULT_SYNTHETIC_N = 3000


@dataclass(frozen=True)
class RunConfig:
    synthetic_n: Optional[int] = DEFAULT_SYNTHETIC_N
    data: Optional[str] = None
    label_col: str = "y"
    sensitive_col: str = "z"
    criterion: str = "eqopp"
    sampler: str = "fairbatch"
    alpha: float = DEFAULT_ALPHA
    threshold: float = 0.0
    batch_size: int = DEFAULT_BATCH_SIZE
    epochs: int = DEFAULT_EPOCHS
    seed: int = 0
    lr: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_EPS
    split: float = DEFAULT_SPLIT
    sampling_mode: str = "iid"
    update_every: Optional[int] = None
    loss_weighting: Optional[float] = None
    sensitive_feature: bool = True
    log_every: int = 50
    out: Optional[str] = None
    checkpoint: Optional[str] = None

    def validate(self) -> "RunConfig":
        if self.data is None and (self.synthetic_n is None or self.synthetic_n < 1):
            raise ConfigError("Informe --data ou --synthetic-n >= 1.")
        if self.criterion not in CRITERIA:
            raise ConfigError(f"Critério inválido: {self.criterion} (opções: {', '.join(CRITERIA)})")
        if self.sampler not in SAMPLERS:
            raise ConfigError(f"Amostrador inválido: {self.sampler} (opções: {', '.join(SAMPLERS)})")
        if self.sampling_mode not in SAMPLING_MODES:
            raise ConfigError(f"Modo de amostragem inválido: {self.sampling_mode}")
        if not 0.0 <= self.alpha < 1.0:
            raise ConfigError(f"alpha deve estar em [0, 1): {self.alpha}")
        if self.threshold < 0:
            raise ConfigError(f"threshold deve ser >= 0: {self.threshold}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size deve ser >= 1: {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs deve ser >= 1: {self.epochs}")
        if self.lr <= 0:
            raise ConfigError(f"lr deve ser > 0: {self.lr}")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0) or self.eps <= 0:
            raise ConfigError("Hiperparâmetros do Adam inválidos (0 <= beta < 1, eps > 0).")
        if not 0.0 < self.split <= 1.0:
            raise ConfigError(f"split deve estar em (0, 1]: {self.split}")
        if self.update_every is not None and self.update_every < 1:
            raise ConfigError(f"update_every deve ser >= 1: {self.update_every}")
        if self.loss_weighting is not None and self.loss_weighting < 0:
            raise ConfigError(f"loss_weighting deve ser >= 0: {self.loss_weighting}")
        if self.seed < 0:
            raise ConfigError(f"seed deve ser um inteiro sem sinal: {self.seed}")
        return self

    @property
    def checkpoint_path(self) -> Optional[Path]:
        if self.checkpoint:
            return Path(self.checkpoint)
        if self.out:
            out = Path(self.out)
            return out.with_name(f"{out.stem}.checkpoint.json")
        return None

    def with_overrides(self, **overrides: Any) -> "RunConfig":
        return replace(self, **overrides).validate()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_args(cls, args: Namespace) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        values = {k: v for k, v in vars(args).items() if k in names and v is not None}
        if values.get("data"):
            values["synthetic_n"] = None
        return cls(**values).validate()
