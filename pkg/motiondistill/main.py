"""motiondistill command line: data generation, training, distillation, tuning, evaluation."""

from __future__ import annotations

import argparse
import logging
import os
import sys

from motiondistill.settings import BLAS_THREAD_VARS, get_settings

settings = get_settings()
if settings.blas_threads is not None:
    # must precede the first numpy import
    for var in BLAS_THREAD_VARS:
        os.environ.setdefault(var, str(settings.blas_threads))

from motiondistill.commands import bayesopt, bench, distill, evaluate, gen_data, train_teacher  # noqa: E402
from motiondistill.errors import MotionDistillError, UsageError  # noqa: E402

logging.basicConfig(
    level=settings.log_level.upper(),
    format="%(asctime)s %(name)s %(levelname)s %(message)s",
)
logger = logging.getLogger("motiondistill.cli")

COMMANDS = (gen_data, train_teacher, distill, bayesopt, evaluate, bench)


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with code 1 instead of argparse's 2."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="motiondistill", description=__doc__)
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS:
        module.register(subparsers)
    for sub in subparsers.choices.values():
        sub.add_argument("--seed", type=int, default=None, help="override the configured seed")
        sub.add_argument("--print-config", action="store_true", help="print the resolved configuration and exit")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except MotionDistillError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("I/O failure: %s", exc)
        return 2
    except ArithmeticError as exc:
        logger.error("Numeric failure: %s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
