"""Embedded write-ahead log store.

File format: magic header ``ALWL1`` followed by length-prefixed records, each
``<u32 length><u32 crc32><payload>``. A record is committed once fully
written and flushed; recovery scans forward and stops at the first torn or
corrupt frame, so a crash at any byte offset yields exactly the committed
prefix. Records are JSON objects keyed by ``id`` for idempotent re-commit.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path

MAGIC = b"ALWL1"
_HEADER = struct.Struct("<II")


class WalError(Exception):
    pass


class CorruptEntry(WalError):
    pass


class WalStore:
    """Single-writer append-only store; readers use :meth:`recover`."""

    def __init__(self, path):
        self.path = Path(path)
        self._ids: set[str] = set()
        if self.path.exists():
            for rec in self._scan()[0]:
                self._ids.add(rec["id"])
        else:
            self.path.write_bytes(MAGIC)
        self._fh = open(self.path, "ab")

    def close(self):
        self._fh.close()

    def persist(self, record: dict) -> bool:
        """Append a record. Re-committing an id is a no-op (returns False)."""
        rid = record["id"]
        if rid in self._ids:
            return False
        payload = json.dumps(record, sort_keys=True).encode("utf-8")
        frame = _HEADER.pack(len(payload), zlib.crc32(payload)) + payload
        self._fh.write(frame)
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._ids.add(rid)
        return True

    def _scan(self) -> tuple[list[dict], int]:
        blob = self.path.read_bytes()
        if blob[: len(MAGIC)] != MAGIC:
            raise WalError("bad WAL magic header")
        pos = len(MAGIC)
        records: list[dict] = []
        skipped = 0
        seen: set[str] = set()
        while pos + _HEADER.size <= len(blob):
            length, crc = _HEADER.unpack_from(blob, pos)
            start = pos + _HEADER.size
            end = start + length
            if end > len(blob):
                break  # torn write
            payload = blob[start:end]
            if zlib.crc32(payload) != crc:
                skipped += 1
                break  # cannot trust framing past a corrupt record
            rec = json.loads(payload.decode("utf-8"))
            if rec["id"] not in seen:
                seen.add(rec["id"])
                records.append(rec)
            pos = end
        return records, skipped

    def recover(self) -> list[dict]:
        """Every fully-committed record, in write order, deduplicated by id."""
        records, _ = self._scan()
        return records

    def recover_with_stats(self) -> tuple[list[dict], int]:
        return self._scan()

    @property
    def ids(self) -> frozenset[str]:
        return frozenset(self._ids)
