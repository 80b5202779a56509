"""gen-data: write the synthetic train/test corpus."""

from __future__ import annotations

import argparse
from pathlib import Path

from motiondistill.commands.common import emit, print_config
from motiondistill.config import SyntheticCorpusSpec
from motiondistill.services.corpus import gen_corpus
from motiondistill.storage.datasets import write_dataset


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("gen-data", help="generate the synthetic motion corpus")
    parser.add_argument("--spec", type=Path, required=True, help="corpus spec YAML")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    spec = SyntheticCorpusSpec.load(args.spec)
    if args.seed is not None:
        spec = spec.model_copy(update={"seed": args.seed})
    if args.print_config:
        return print_config(spec.model_dump(mode="json"), args)

    paths = write_dataset(args.out, gen_corpus(spec))
    emit({"files": [str(p) for p in paths], "seed": spec.seed, "spec_hash": spec.spec_hash()})
    return 0
