"""bayesopt: resumable hyperparameter study of the mixer student."""

from __future__ import annotations

import argparse
from pathlib import Path

from motiondistill.bayesopt.space import SearchSpace
from motiondistill.commands.common import (
    add_config_argument,
    emit,
    load_config,
    load_model,
    print_config,
    read_data,
)
from motiondistill.config import canonical_hash
from motiondistill.errors import UsageError
from motiondistill.services.diffusion import divergence_bound, make_schedule
from motiondistill.services.study import StudentTrial, Study
from motiondistill.storage.ledger import TrialLedger


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("bayesopt", help="tune lr, depth and width of the mixer student")
    parser.add_argument("--case", type=int, choices=(1, 2), required=True, help="1: output MSE, 2: weighted ratios")
    add_config_argument(parser)
    parser.add_argument("--ledger", type=Path, required=True, help="trial ledger (JSONL, resumed if present)")
    parser.add_argument("--parallel", type=int, default=None, help="concurrent trial evaluations per round")
    parser.add_argument("--teacher", type=Path, required=True, help="one-step checkpoint from distill --stage 1")
    parser.add_argument("--reference", type=Path, default=None, help="multi-step checkpoint for reference=multi_step")
    parser.add_argument("--data", type=Path, required=True, help="dataset directory from gen-data")
    parser.add_argument("--rounds", type=int, default=None, help="stop after this many rounds")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    if args.parallel is not None:
        if args.parallel < 1:
            raise UsageError("--parallel must be >= 1")
        config = config.model_copy(update={"bayesopt": config.bayesopt.model_copy(update={"parallel": args.parallel})})
    if args.print_config:
        return print_config(config.model_dump(mode="json"), args)

    section = config.bayesopt
    corpus = read_data(args.data, "train")
    one_step = load_model(args.teacher, "one_step")
    if section.reference == "multi_step":
        if args.reference is None:
            raise UsageError("bayesopt.reference is multi_step; pass --reference <teacher checkpoint>")
        reference = load_model(args.reference, "multi_step").predictor(
            config.sampler.n_steps, divergence_bound(corpus, config.sampler.divergence_factor)
        )
    else:
        reference = one_step.predictor()

    objective = StudentTrial(
        config,
        one_step.model,
        one_step.predictor(),
        reference,
        make_schedule(one_step.schedule["steps"], one_step.schedule["kind"]),
        corpus,
        args.case,
    )
    study = Study(
        SearchSpace.from_config(section),
        section,
        TrialLedger(args.ledger),
        objective,
        seed=config.seed,
        config_hash=canonical_hash({"experiment": config.config_hash(), "case": args.case}),
    )
    history = study.run(max_rounds=args.rounds)
    best = study.best(history)
    emit(
        {
            "ledger": str(args.ledger),
            "trials": len(history),
            "failed": sum(r.status == "failed" for r in history),
            "best": None if best is None else {"trial_id": best.trial_id, "g": best.g, "params": best.lam_raw},
        }
    )
    return 0
