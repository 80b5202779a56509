"""Binary container shared by dataset and checkpoint files.

Layout, all little-endian::

    magic      4 bytes
    version    u16
    n_dims     u16
    n_values   u64      number of float64 values in the payload
    dims       u64 × n_dims   format-specific sizes
    footer_len u64
    payload    float64 × n_values
    footer     UTF-8 JSON, footer_len bytes
"""

from __future__ import annotations

import json
import logging
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from motiondistill.errors import DataFormatError

logger = logging.getLogger("motiondistill.storage")

_PREFIX = struct.Struct("<4sHHQ")
_U64 = struct.Struct("<Q")


@dataclass(frozen=True)
class Container:
    magic: bytes
    version: int
    dims: tuple[int, ...]
    payload: np.ndarray
    footer: dict[str, Any] = field(default_factory=dict)


def encode(container: Container) -> bytes:
    payload = np.ascontiguousarray(container.payload, dtype="<f8").reshape(-1)
    footer = json.dumps(container.footer, sort_keys=True).encode()
    parts = [
        _PREFIX.pack(container.magic, container.version, len(container.dims), payload.size),
        *(_U64.pack(int(d)) for d in container.dims),
        _U64.pack(len(footer)),
        payload.tobytes(),
        footer,
    ]
    return b"".join(parts)


def decode(blob: bytes, magic: bytes, version: int, path: str | None = None) -> Container:
    if len(blob) < _PREFIX.size:
        raise DataFormatError(DataFormatError.TRUNCATED, f"{len(blob)} bytes is shorter than the header", path)
    found, found_version, n_dims, n_values = _PREFIX.unpack_from(blob, 0)
    if found != magic:
        raise DataFormatError(DataFormatError.MAGIC_MISMATCH, f"expected magic {magic!r}, found {found!r}", path)
    if found_version != version:
        raise DataFormatError(
            DataFormatError.VERSION_MISMATCH, f"format version {found_version}, reader supports {version}", path
        )

    offset = _PREFIX.size
    header_end = offset + _U64.size * (n_dims + 1)
    if len(blob) < header_end:
        raise DataFormatError(DataFormatError.TRUNCATED, "header cut short", path)
    dims = tuple(_U64.unpack_from(blob, offset + _U64.size * i)[0] for i in range(n_dims))
    (footer_len,) = _U64.unpack_from(blob, offset + _U64.size * n_dims)

    payload_end = header_end + 8 * n_values
    if len(blob) < payload_end + footer_len:
        raise DataFormatError(
            DataFormatError.TRUNCATED,
            f"expected {payload_end + footer_len} bytes, file has {len(blob)}",
            path,
        )
    if len(blob) > payload_end + footer_len:
        raise DataFormatError(DataFormatError.HEADER_INCONSISTENT, "trailing bytes after footer", path)
    payload = np.frombuffer(blob, dtype="<f8", count=n_values, offset=header_end).astype(np.float64)
    try:
        footer = json.loads(blob[payload_end:].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(DataFormatError.HEADER_INCONSISTENT, f"footer is not valid JSON: {exc}", path) from None
    return Container(magic=found, version=found_version, dims=dims, payload=payload, footer=footer)


def write_atomic(path: str | Path, data: bytes) -> None:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=f".{p.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, p)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
    except OSError as exc:
        raise DataFormatError(DataFormatError.IO_ERROR, str(exc), str(p)) from exc
    logger.debug("Wrote %d bytes to %s", len(data), p)


def write_container(path: str | Path, container: Container) -> None:
    write_atomic(path, encode(container))


def read_container(path: str | Path, magic: bytes, version: int) -> Container:
    p = Path(path)
    try:
        blob = p.read_bytes()
    except OSError as exc:
        raise DataFormatError(DataFormatError.IO_ERROR, str(exc), str(p)) from exc
    return decode(blob, magic, version, str(p))
