from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, Iterable, List

import pandas as pd

from core.bilevel_lab import OuterSurface
from core.dataset import Dataset
from core.model import ModelParams


def _full_precision(value: float) -> str:
    return repr(float(value))


def _prepare(path: str | Path) -> Path:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_ndjson(records: Iterable[Dict[str, Any]], path: str | Path) -> Path:
    path = _prepare(path)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True, allow_nan=False))
            handle.write("\n")
    return path


def read_ndjson(path: str | Path) -> List[Dict[str, Any]]:
    with Path(path).open("r", encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def save_checkpoint(params: ModelParams, path: str | Path) -> Path:
    path = _prepare(path)
    path.write_text(json.dumps(params.to_dict(), sort_keys=True, indent=2), encoding="utf-8")
    return path


def load_checkpoint(path: str | Path) -> ModelParams:
    return ModelParams.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_dataset_csv(d: Dataset, path: str | Path, label_column: str = "y", sensitive_column: str = "z") -> Path:
    path = _prepare(path)
    frame = d.to_frame(label_column=label_column, sensitive_column=sensitive_column)
    # repr-precision floats so load_csv reproduces the exact values.
    frame.to_csv(path, index=False, float_format=_full_precision, encoding="utf-8", lineterminator="\n")
    return path


def write_surface_csv(s: OuterSurface, path: str | Path) -> Path:
    path = _prepare(path)
    frame = pd.DataFrame({"lambda": s.lambdas, "F": s.values})
    frame.to_csv(path, index=False, float_format=_full_precision, encoding="utf-8", lineterminator="\n")
    return path


def write_json(payload: Dict[str, Any], path: str | Path) -> Path:
    path = _prepare(path)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
    return path
