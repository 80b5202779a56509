"""distill: stage 1 (multi-step → one-step) or stage 2 (one-step → mixer)."""

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
    progress_enabled,
    provenance,
    read_data,
)
from motiondistill.services.diffusion import divergence_bound, make_plan, make_schedule
from motiondistill.services.distillation import run_stage1, run_stage2
from motiondistill.storage.checkpoints import Checkpoint, save_checkpoint
from motiondistill.storage.reports import append_record


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("distill", help="run one distillation stage")
    parser.add_argument("--stage", type=int, choices=(1, 2), required=True)
    parser.add_argument("--teacher", type=Path, required=True, help="multi-step (stage 1) or one-step (stage 2) checkpoint")
    add_config_argument(parser)
    parser.add_argument("--data", type=Path, required=True, help="dataset directory from gen-data")
    parser.add_argument("--out", type=Path, required=True, help="checkpoint path")
    parser.add_argument("--log", type=Path, default=None, help="append epoch records to this JSONL file")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    if args.print_config:
        return print_config(config.model_dump(mode="json"), args)

    expected = "multi_step" if args.stage == 1 else "one_step"
    teacher = load_model(args.teacher, expected)
    corpus = read_data(args.data, "train")
    schedule = make_schedule(teacher.schedule["steps"], teacher.schedule["kind"])
    rng = command_rng(config, 10 + args.stage)
    on_epoch = (lambda r: append_record(args.log, r)) if args.log else None

    if args.stage == 1:
        run_config = config.distill_stage1
        plan = make_plan(schedule, run_config.teacher_steps or config.sampler.n_steps)
        bound = divergence_bound(corpus, config.sampler.divergence_factor)
        result = run_stage1(
            teacher.model, schedule, plan, corpus, run_config, rng, on_epoch, progress_enabled(), value_bound=bound
        )
        mode, step = "one_step", schedule.K - 1
    else:
        result = run_stage2(
            teacher.model, config.student, schedule, corpus, config.distill_stage2, rng, on_epoch, progress_enabled()
        )
        mode, step = "direct", None

    save_checkpoint(
        args.out,
        Checkpoint(
            model=result.model,
            mode=mode,
            H=corpus.H,
            F=corpus.F,
            provenance=provenance(config, f"distill --stage {args.stage}"),
            schedule=teacher.schedule,
            step=step,
            history=result.history,
            experiment=config.model_dump(mode="json"),
        ),
    )
    emit(
        {
            "checkpoint": str(args.out),
            "stage": args.stage,
            "initial_val_loss": result.initial_val_loss,
            "best_val_loss": result.best_val_loss,
            "best_epoch": result.best_epoch,
        }
    )
    return 0
