"""Command-line runner: generate | train | sweep | verify.

    python cli.py generate --synthetic-n 3000 --seed 7 --out data/sintetico.csv
    python cli.py train --criterion eqopp --epochs 400 --out runs/eqopp.ndjson
    python cli.py sweep --fixture contraexemplo --grid-size 2001 --out runs/superficie.csv
    python cli.py verify --out runs/verificacao.json
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from core.bilevel_lab import default_fixtures, sweep_surface
from core.config import (
    DEFAULT_ALPHA,
    DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS,
    DEFAULT_SPLIT,
    DEFAULT_SYNTHETIC_N,
    SAMPLERS,
    RunConfig,
)
from core.dataset import gen_synthetic
from core.errors import ConfigError, FairBatchError
from core.fairbatch import CRITERIA, SAMPLING_MODES
from core.model import DEFAULT_LR
from core.training import run_train, write_outputs
from core.verification import COUNTEREXAMPLE_GRID, run_verify
from services.logging_service import configure_logging, get_logger
from services.storage_service import write_dataset_csv, write_json, write_surface_csv

logger = get_logger("cli")

DEFAULT_METRICS_PATH = "runs/metrics.ndjson"


def run_generate(n: int, seed: int, out_path: str | Path) -> Path:
    dataset = gen_synthetic(n, seed)
    path = write_dataset_csv(dataset, out_path)
    logger.info("Dataset sintético com %d linhas gravado em %s.", dataset.n, path)
    return path


def _cmd_generate(args: argparse.Namespace) -> int:
    run_generate(args.synthetic_n, args.seed, args.out)
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_args(args)
    result = run_train(cfg)
    write_outputs(result, cfg.out, cfg.checkpoint_path)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    fixtures = {p.name: p for p in default_fixtures()}
    if args.fixture not in fixtures:
        raise ConfigError(f"Fixture desconhecida: {args.fixture} (opções: {', '.join(fixtures)})")
    surface = sweep_surface(fixtures[args.fixture], args.grid_size)
    if args.out:
        write_surface_csv(surface, args.out)
        logger.info("Superfície de '%s' (%d pontos) gravada em %s.", args.fixture, args.grid_size, args.out)
    else:
        sys.stdout.write("lambda,F\n")
        for lam, value in zip(surface.lambdas, surface.values):
            sys.stdout.write(f"{float(lam)!r},{float(value)!r}\n")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    report = run_verify(inject_failure=args.inject_failure)
    print(report.render_text())
    if args.out:
        write_json(report.to_dict(), args.out)
        logger.info("Relatório de verificação gravado em %s.", args.out)
    return 0 if report.passed else 1


def _add_train_arguments(p: argparse.ArgumentParser) -> None:
    source = p.add_mutually_exclusive_group()
    source.add_argument("--data", help="CSV com features numéricas, rótulo e atributo sensível.")
    source.add_argument("--synthetic-n", type=int, help=f"Tamanho do dataset sintético (padrão: {DEFAULT_SYNTHETIC_N}).")
    p.add_argument("--label-col", default="y", help="Coluna do rótulo (padrão: y).")
    p.add_argument("--sensitive-col", default="z", help="Coluna do atributo sensível (padrão: z).")
    p.add_argument("--criterion", choices=CRITERIA, default="eqopp")
    p.add_argument("--sampler", choices=SAMPLERS, default="fairbatch")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help=f"Passo de lambda (padrão: {DEFAULT_ALPHA}).")
    p.add_argument("--threshold", type=float, default=0.0, help="Disparidade mínima para atualizar lambda.")
    p.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)
    p.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lr", type=float, default=DEFAULT_LR, help=f"Taxa de aprendizado do Adam (padrão: {DEFAULT_LR}).")
    p.add_argument("--split", type=float, default=DEFAULT_SPLIT, help="Fração de treino (padrão: 2/3).")
    p.add_argument("--sampling-mode", choices=SAMPLING_MODES, default="iid")
    p.add_argument("--update-every", type=int, help="Batches entre atualizações de lambda (padrão: uma por época).")
    p.add_argument("--loss-weighting", type=float, help="Temperatura da ponderação por perda dentro de cada grupo.")
    p.add_argument(
        "--no-sensitive-feature",
        dest="sensitive_feature",
        action="store_false",
        help="Não inclui o atributo sensível entre as entradas do modelo.",
    )
    p.add_argument("--log-every", type=int, default=50, help="Épocas entre resumos no log.")
    p.add_argument("--out", default=DEFAULT_METRICS_PATH, help=f"Arquivo NDJSON de métricas (padrão: {DEFAULT_METRICS_PATH}).")
    p.add_argument("--checkpoint", help="Checkpoint JSON do modelo (padrão: ao lado de --out).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairbatch",
        description="Amostragem adaptativa de minibatches para treino justo (FairBatch).",
    )
    parser.add_argument("--log-file", help="Grava o log também neste arquivo.")
    parser.add_argument("--verbose", action="store_true", help="Log em nível DEBUG (inclui cada passo de lambda).")
    sub = parser.add_subparsers(dest="command", required=True)

    generate = sub.add_parser("generate", help="Gera o dataset sintético em CSV (x1,x2,z,y).")
    generate.add_argument("--synthetic-n", type=int, default=DEFAULT_SYNTHETIC_N)
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--out", required=True)
    generate.set_defaults(handler=_cmd_generate)

    train = sub.add_parser("train", help="Treina regressão logística com o amostrador escolhido.")
    _add_train_arguments(train)
    train.set_defaults(handler=_cmd_train)

    sweep = sub.add_parser("sweep", help="Varre F(lambda) de uma fixture do laboratório teórico.")
    sweep.add_argument("--fixture", default="contraexemplo")
    sweep.add_argument("--grid-size", type=int, default=COUNTEREXAMPLE_GRID)
    sweep.add_argument("--out", help="CSV de saída (padrão: stdout).")
    sweep.set_defaults(handler=_cmd_sweep)

    verify = sub.add_parser("verify", help="Executa a bateria de verificações da teoria.")
    verify.add_argument("--out", help="Relatório JSON.")
    verify.add_argument("--inject-failure", action="store_true", help="Inclui uma superfície em W (controle negativo).")
    verify.set_defaults(handler=_cmd_verify)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(log_file=args.log_file, level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.handler(args)
    except (FairBatchError, ValueError) as exc:
        logger.error("Erro: %s", exc)
    except OSError as exc:
        logger.error("Erro de E/S: %s", exc)
    return 1


if __name__ == "__main__":
    sys.exit(main())
