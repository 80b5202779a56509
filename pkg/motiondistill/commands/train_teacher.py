"""train-teacher: fit the step-conditioned transformer denoiser."""

from __future__ import annotations

import argparse
from pathlib import Path

from motiondistill.commands.common import (
    add_config_argument,
    command_rng,
    emit,
    load_config,
    print_config,
    progress_enabled,
    provenance,
    read_data,
)
from motiondistill.networks.registry import build_model
from motiondistill.services.diffusion import make_schedule, train_teacher
from motiondistill.storage.checkpoints import Checkpoint, save_checkpoint
from motiondistill.storage.reports import append_record


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("train-teacher", help="train the multi-step diffusion teacher")
    add_config_argument(parser)
    parser.add_argument("--data", type=Path, required=True, help="dataset directory from gen-data")
    parser.add_argument("--out", type=Path, required=True, help="checkpoint path")
    parser.add_argument("--log", type=Path, default=None, help="append epoch records to this JSONL file")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    config = load_config(args)
    if args.print_config:
        return print_config(config.model_dump(mode="json"), args)

    corpus = read_data(args.data, "train")
    L = config.resolve_L(corpus.N)
    rng = command_rng(config, 1)
    model = build_model("transformer", config.teacher.bind(L, corpus.J), rng)
    schedule = make_schedule(config.schedule.steps, config.schedule.kind)

    history = train_teacher(
        model,
        corpus,
        schedule,
        config.teacher_training,
        rng,
        on_epoch=(lambda r: append_record(args.log, r)) if args.log else None,
        progress=progress_enabled(),
    )
    save_checkpoint(
        args.out,
        Checkpoint(
            model=model,
            mode="multi_step",
            H=corpus.H,
            F=corpus.F,
            provenance=provenance(config, "train-teacher"),
            schedule={"steps": schedule.K, "kind": schedule.kind},
            sampler_steps=config.sampler.n_steps,
            history=history,
            experiment=config.model_dump(mode="json"),
        ),
    )
    emit({"checkpoint": str(args.out), "final_loss": history[-1].train_loss, "parameters": model.parameter_count})
    return 0
