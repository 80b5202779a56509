"""bench: single-prediction latency of a checkpoint."""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from motiondistill.commands.common import (
    add_config_argument,
    emit,
    load_config,
    load_model,
    print_config,
    provenance,
    read_data,
)
from motiondistill.errors import UsageError
from motiondistill.services.benchmark import benchmark_predictor
from motiondistill.storage.reports import write_benchmark_report


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("bench", help="time one prediction from one observation")
    parser.add_argument("--model", type=Path, required=True, help="checkpoint")
    parser.add_argument("--repeats", type=int, default=None, help="timed runs after one warmup (default: config)")
    parser.add_argument("--report", type=Path, required=True, help="text report; records go to <report>.jsonl")
    parser.add_argument("--data", type=Path, default=None, help="take the observation from this dataset's test split")
    parser.add_argument("--steps", type=int, default=None, help="sampler steps for multi-step checkpoints")
    add_config_argument(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    repeats = args.repeats if args.repeats is not None else config.evaluation.repeats
    if repeats < 1:
        raise UsageError("--repeats must be >= 1")
    if args.print_config:
        return print_config(config.model_dump(mode="json"), args)

    ckpt = load_model(args.model)
    predictor = ckpt.predictor(args.steps)
    if args.data is not None:
        x_obs = read_data(args.data, "test").observations[0]
    else:
        x_obs = np.zeros((ckpt.H, predictor.D))
    result = benchmark_predictor(predictor, x_obs, repeats, config.seed)
    model = f"{ckpt.model.kind}/{predictor.mode}"
    write_benchmark_report(args.report, model, result, provenance(config, "bench"))
    emit({"model": model, **result.model_dump(mode="json", exclude={"samples"})})
    return 0
