"""Motion corpus files: one container per split, dims (n, J, H, F)."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from motiondistill.errors import DataFormatError
from motiondistill.motion.types import MotionCorpus
from motiondistill.storage.container import Container, read_container, write_container

logger = logging.getLogger("motiondistill.storage")

DATASET_MAGIC = b"MDSQ"
DATASET_VERSION = 1
SPLITS = ("train", "test")


def split_path(directory: str | Path, split: str) -> Path:
    return Path(directory) / f"{split}.mdsq"


def write_corpus(path: str | Path, corpus: MotionCorpus) -> None:
    n = len(corpus)
    footer = {
        "metadata": corpus.metadata,
        "modes": None if corpus.modes is None else [int(m) for m in corpus.modes],
        "families": None if corpus.families is None else [int(f) for f in corpus.families],
    }
    write_container(path, Container(DATASET_MAGIC, DATASET_VERSION, (n, corpus.J, corpus.H, corpus.F), corpus.frames, footer))
    logger.info("Wrote %d sequences to %s", n, path)


def read_corpus(path: str | Path) -> MotionCorpus:
    container = read_container(path, DATASET_MAGIC, DATASET_VERSION)
    if len(container.dims) != 4:
        raise DataFormatError(DataFormatError.HEADER_INCONSISTENT, f"expected 4 dims, found {len(container.dims)}", str(path))
    n, J, H, F = container.dims
    expected = n * (H + F) * 3 * J
    if container.payload.size != expected:
        raise DataFormatError(
            DataFormatError.HEADER_INCONSISTENT,
            f"dims (n={n}, J={J}, H={H}, F={F}) imply {expected} values, payload has {container.payload.size}",
            str(path),
        )
    footer = container.footer
    labels = {}
    for key in ("modes", "families"):
        values = footer.get(key)
        if values is not None and len(values) != n:
            raise DataFormatError(DataFormatError.HEADER_INCONSISTENT, f"{key} has {len(values)} entries for {n} items", str(path))
        labels[key] = None if values is None else np.asarray(values, dtype=np.int64)
    return MotionCorpus(
        container.payload.reshape(n, H + F, 3 * J),
        H=H,
        F=F,
        metadata=footer.get("metadata", {}),
        **labels,
    )


def write_dataset(directory: str | Path, splits: dict[str, MotionCorpus]) -> list[Path]:
    paths = []
    for split, corpus in splits.items():
        path = split_path(directory, split)
        write_corpus(path, corpus)
        paths.append(path)
    return paths


def read_split(directory: str | Path, split: str) -> MotionCorpus:
    return read_corpus(split_path(directory, split))
