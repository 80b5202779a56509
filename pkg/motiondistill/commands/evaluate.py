"""eval: metric suite of a checkpoint on the test split."""

from __future__ import annotations

import argparse
from pathlib import Path

from motiondistill.commands.common import (
    add_config_argument,
    command_rng,
    emit,
    load_config,
    load_model,
    print_config,
    provenance,
    read_data,
)
from motiondistill.errors import UsageError
from motiondistill.services.benchmark import benchmark_predictor
from motiondistill.services.diffusion import divergence_bound
from motiondistill.services.evaluation import evaluate_corpus
from motiondistill.storage.reports import write_metrics_report


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("eval", help="APD, ADE, FDE, MMADE, MMFDE with best/median/worst of S")
    parser.add_argument("--model", type=Path, required=True, help="checkpoint")
    parser.add_argument("--data", type=Path, required=True, help="dataset directory from gen-data")
    parser.add_argument("--samples", type=int, default=None, help="predictions per observation (default: config)")
    parser.add_argument("--report", type=Path, required=True, help="text report; records go to <report>.jsonl")
    parser.add_argument("--steps", type=int, default=None, help="sampler steps for multi-step checkpoints")
    parser.add_argument("--time", action="store_true", help="also measure single-prediction latency")
    add_config_argument(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    section = config.evaluation
    if args.samples is not None:
        section = section.model_copy(update={"samples": args.samples})
        config = config.model_copy(update={"evaluation": section})
    if args.print_config:
        return print_config(config.model_dump(mode="json"), args)
    if section.samples < 1:
        raise UsageError("--samples must be >= 1")

    ckpt = load_model(args.model)
    corpus = read_data(args.data, "test")
    predictor = ckpt.predictor(args.steps, divergence_bound(corpus, config.sampler.divergence_factor))
    seconds = None
    if args.time:
        seconds = benchmark_predictor(predictor, corpus.observations[0], section.repeats, config.seed).mean_seconds

    row = evaluate_corpus(
        predictor,
        corpus,
        section.samples,
        section.tau,
        command_rng(config, 20),
        model=f"{ckpt.model.kind}/{predictor.mode}",
        max_items=section.max_items,
        inference_seconds=seconds,
    )
    write_metrics_report(args.report, [row], provenance(config, "eval"))
    emit(row.model_dump(mode="json"))
    return 0
