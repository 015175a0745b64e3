from __future__ import annotations

from typing import Iterable, List, Sequence

import pandas as pd

from core.config import RunConfig
from core.training import TrainingResult, run_train
from services.logging_service import get_logger

logger = get_logger("experiments")

# disparity each criterion is trained to reduce
TARGET_DISPARITY = {"eqopp": "eo", "eqodds": "ed", "dp": "dp"}


def run_seeds(cfg: RunConfig, seeds: Iterable[int]) -> List[TrainingResult]:
    results = []
    for seed in seeds:
        logger.info("Executando semente %d (%s, %s)", seed, cfg.sampler, cfg.criterion)
        results.append(run_train(cfg.with_overrides(seed=seed)))
    return results


def summarize_runs(results: Sequence[TrainingResult]) -> pd.DataFrame:
    """Final-epoch metrics, one row per seed."""
    rows = []
    for result in results:
        final = result.final
        rows.append(
            {
                "seed": result.config.seed,
                "train_accuracy": final.train_accuracy,
                "test_accuracy": final.test_accuracy,
                "eo": final.eo,
                "ed": final.ed,
                "dp": final.dp,
            }
        )
    return pd.DataFrame(rows, columns=["seed", "train_accuracy", "test_accuracy", "eo", "ed", "dp"]).set_index("seed")


def threshold_tradeoff(cfg: RunConfig, thresholds: Sequence[float], seeds: Sequence[int]) -> pd.DataFrame:
    """Median test accuracy and target disparity per threshold T.

    ``accuracy_loss`` is measured against the uniform-sampler baseline on the same
    seeds, so a larger T (fewer lambda updates) should lose less accuracy.
    """
    disparity = TARGET_DISPARITY[cfg.criterion]
    baseline = summarize_runs(run_seeds(cfg.with_overrides(sampler="uniform"), seeds))
    baseline_accuracy = float(baseline["test_accuracy"].median())

    rows = []
    for threshold in thresholds:
        summary = summarize_runs(run_seeds(cfg.with_overrides(sampler="fairbatch", threshold=float(threshold)), seeds))
        accuracy = float(summary["test_accuracy"].median())
        rows.append(
            {
                "threshold": float(threshold),
                "accuracy": accuracy,
                "disparity": float(summary[disparity].median()),
                "accuracy_loss": baseline_accuracy - accuracy,
            }
        )
        logger.info("T=%.4f | acurácia mediana=%.4f | %s mediana=%.4f", threshold, accuracy, disparity, rows[-1]["disparity"])

    return pd.DataFrame(rows).set_index("threshold")
