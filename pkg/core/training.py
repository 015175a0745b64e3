from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from core.config import RunConfig
from core.dataset import (
    Dataset,
    GroupIndex,
    SplitSpec,
    build_group_index,
    cutting,
    gen_synthetic,
    load_csv,
    split,
    with_sensitive_feature,
)
from core.errors import ConfigError, DisparityError, SamplingError
from core.fairbatch import (
    FairnessCriterion,
    LambdaState,
    SamplingDistribution,
    draw_epoch,
    init_lambda,
    loss_weighted_within_group,
    outer_loss_table,
    sampling_distribution,
    uniform_distribution,
    update_lambda,
)
from core.metrics import dp_sufficient_objective, ed_disparity, eo_disparity, dp_disparity, group_losses
from core.model import (
    BCE,
    ModelParams,
    accuracy,
    adam_step,
    batch_gradient,
    example_losses,
    init_adam,
    init_params,
)
from services.logging_service import get_logger
from services.storage_service import save_checkpoint, write_ndjson

logger = get_logger("training")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_accuracy: float
    test_accuracy: Optional[float]
    eo: Optional[float]
    ed: Optional[float]
    dp: Optional[float]
    lambdas: List[float]
    group_losses: List[List[float]]
    dp_objective: Optional[float]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "EpochRecord":
        return cls(**payload)


@dataclass(frozen=True, eq=False)
class TrainingResult:
    config: RunConfig
    records: List[EpochRecord]
    params: ModelParams
    lambda_state: Optional[LambdaState]
    train_index: GroupIndex

    @property
    def final(self) -> EpochRecord:
        return self.records[-1]

    def frame(self) -> pd.DataFrame:
        rows = []
        for record in self.records:
            row = record.to_dict()
            lambdas = row.pop("lambdas")
            row.pop("group_losses")
            for i, value in enumerate(lambdas):
                row[f"lambda_{i + 1}"] = value
            rows.append(row)
        return pd.DataFrame(rows).set_index("epoch")


def _child_seeds(seed: int) -> Dict[str, Any]:
    split_seq, cutting_seq, batch_seq = np.random.SeedSequence(seed).spawn(3)
    return {
        "split": int(split_seq.generate_state(1, dtype=np.uint64)[0]),
        "cutting": int(cutting_seq.generate_state(1, dtype=np.uint64)[0]),
        "batches": np.random.Generator(np.random.PCG64(batch_seq)),
    }


def load_dataset(cfg: RunConfig) -> Dataset:
    if cfg.data:
        return load_csv(cfg.data, label_column=cfg.label_col, sensitive_column=cfg.sensitive_col)
    return gen_synthetic(cfg.synthetic_n, cfg.seed)


def _baseline_lambdas(criterion: FairnessCriterion, gi: GroupIndex, alpha: float) -> List[float]:
    """Uniform-point lambda for the record of a non-adaptive run; empty when
    the training groups admit no lambda layout."""
    try:
        return init_lambda(criterion, gi, alpha).lam.tolist()
    except (ConfigError, SamplingError) as exc:
        logger.info("Sem lambda para o amostrador de referência: %s", exc)
        return []


def _optional_metric(fn: Callable[..., float], name: str, *args) -> Optional[float]:
    try:
        return fn(*args)
    except DisparityError as exc:
        logger.warning("Métrica %s indisponível: %s", name, exc)
        return None


def _evaluate(
    epoch: int,
    params: ModelParams,
    train: Dataset,
    train_gi: GroupIndex,
    test: Dataset,
    test_gi: GroupIndex,
    lambdas: List[float],
) -> EpochRecord:
    table = group_losses(params, train, train_gi, BCE)
    has_test = test.n > 0
    return EpochRecord(
        epoch=epoch,
        train_accuracy=accuracy(params, train),
        test_accuracy=accuracy(params, test) if has_test else None,
        eo=_optional_metric(eo_disparity, "EO", params, test, test_gi) if has_test else None,
        ed=_optional_metric(ed_disparity, "ED", params, test, test_gi) if has_test else None,
        dp=_optional_metric(dp_disparity, "DP", params, test, test_gi) if has_test else None,
        lambdas=list(lambdas),
        group_losses=table.means.tolist(),
        dp_objective=dp_sufficient_objective(table) if table.means.shape == (2, 2) else None,
    )


def _format_optional(value: Optional[float]) -> str:
    return "n/d" if value is None else f"{value:.4f}"


def run_train(cfg: RunConfig, on_epoch: Callable[[EpochRecord], None] | None = None) -> TrainingResult:
    """Bilevel training loop: uniform start, then per epoch draw minibatches from
    the current sampling distribution, take Adam steps and, for the fairbatch
    sampler, update lambda from full-train-set group losses."""
    cfg.validate()
    seeds = _child_seeds(cfg.seed)
    rng = seeds["batches"]

    dataset = load_dataset(cfg)
    train, test = split(dataset, SplitSpec(cfg.split, seeds["split"]))
    if cfg.sampler == "cutting":
        train = cutting(train, seeds["cutting"])
    if cfg.sensitive_feature:
        train, test = with_sensitive_feature(train), with_sensitive_feature(test)
    train_gi = build_group_index(train)
    test_gi = build_group_index(test)

    criterion = FairnessCriterion(cfg.criterion, cfg.threshold)
    adaptive = cfg.sampler == "fairbatch"
    ls: Optional[LambdaState] = None
    if adaptive:
        ls = init_lambda(criterion, train_gi, cfg.alpha)
        sd: SamplingDistribution = sampling_distribution(ls, criterion, train_gi)
        lambdas = ls.lam.tolist()
    else:
        sd = uniform_distribution(train_gi)
        lambdas = _baseline_lambdas(criterion, train_gi, cfg.alpha)

    params = init_params(train.k, train.n_y)
    adam = init_adam(params, lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)

    batches_per_epoch = math.ceil(train.n / cfg.batch_size)
    chunk = cfg.update_every or batches_per_epoch
    logger.info(
        "Treino iniciado: amostrador=%s, critério=%s, n_treino=%d, n_teste=%d, %d batches/época",
        cfg.sampler,
        cfg.criterion,
        train.n,
        test.n,
        batches_per_epoch,
    )

    records: List[EpochRecord] = []
    for epoch in range(1, cfg.epochs + 1):
        done = 0
        while done < batches_per_epoch:
            count = min(chunk, batches_per_epoch - done)
            plan = draw_epoch(sd, cfg.batch_size, count, rng, mode=cfg.sampling_mode)
            for rows in plan:
                params, adam = adam_step(params, adam, batch_gradient(params, rows, train))
            done += count

            if adaptive:
                ls = update_lambda(ls, criterion, outer_loss_table(params, train, train_gi, criterion))
                sd = sampling_distribution(ls, criterion, train_gi)
                lambdas = ls.lam.tolist()
                if cfg.loss_weighting is not None:
                    losses = example_losses(params, train.features, train.labels, BCE)
                    sd = loss_weighted_within_group(sd, losses, cfg.loss_weighting)

        record = _evaluate(epoch, params, train, train_gi, test, test_gi, lambdas)
        records.append(record)
        if on_epoch is not None:
            on_epoch(record)
        if epoch % cfg.log_every == 0 or epoch == cfg.epochs:
            logger.info(
                "Época %d/%d | acc treino=%.4f | acc teste=%s | EO=%s | ED=%s | DP=%s | lambda=%s",
                epoch,
                cfg.epochs,
                record.train_accuracy,
                _format_optional(record.test_accuracy),
                _format_optional(record.eo),
                _format_optional(record.ed),
                _format_optional(record.dp),
                [round(v, 6) for v in record.lambdas],
            )

    return TrainingResult(config=cfg, records=records, params=params, lambda_state=ls, train_index=train_gi)


def write_outputs(result: TrainingResult, metrics_path, checkpoint_path=None) -> None:
    write_ndjson((record.to_dict() for record in result.records), metrics_path)
    logger.info("Métricas gravadas em %s (%d épocas).", metrics_path, len(result.records))
    if checkpoint_path is not None:
        save_checkpoint(result.params, checkpoint_path)
        logger.info("Checkpoint gravado em %s.", checkpoint_path)
