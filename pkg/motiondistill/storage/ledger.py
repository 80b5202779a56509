"""Append-only trial ledger, one JSON record per line.

A trial may appear several times (pending, then done or failed); the last
line for a trial id wins. A final line cut short by an interruption is
ignored with a warning.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

from pydantic import ValidationError

from motiondistill.errors import DataFormatError
from motiondistill.models.records import TrialRecord

logger = logging.getLogger("motiondistill.storage.ledger")


class TrialLedger:
    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    def append(self, record: TrialRecord) -> None:
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as f:
                f.write(record.model_dump_json() + "\n")
                f.flush()
                os.fsync(f.fileno())
        except OSError as exc:
            raise DataFormatError(DataFormatError.IO_ERROR, str(exc), str(self.path)) from exc

    def load(self) -> list[TrialRecord]:
        """Latest record per trial, ordered by trial id."""
        if not self.path.exists():
            return []
        try:
            lines = self.path.read_text().splitlines()
        except OSError as exc:
            raise DataFormatError(DataFormatError.IO_ERROR, str(exc), str(self.path)) from exc

        latest: dict[int, TrialRecord] = {}
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = TrialRecord.model_validate_json(line)
            except ValidationError as exc:
                if number == len(lines):
                    logger.warning("Ignoring incomplete last ledger line %d in %s", number, self.path)
                    break
                raise DataFormatError(
                    DataFormatError.HEADER_INCONSISTENT, f"line {number} is not a trial record: {exc}", str(self.path)
                ) from None
            latest[record.trial_id] = record
        records = [latest[i] for i in sorted(latest)]
        if [r.trial_id for r in records] != list(range(len(records))):
            raise DataFormatError(DataFormatError.HEADER_INCONSISTENT, "trial ids are not contiguous", str(self.path))
        return records

    def count(self) -> int:
        return len(self.load())

