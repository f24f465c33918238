"""Append-only event journal and state snapshots.

The journal is one JSON document per line in ``events.jsonl``; each line is
``{"seq": n, "event": {...}}`` with gapless, monotonically increasing ``seq``.
Snapshots (``state.json``) record the full journaled state at some seq so
recovery replays only the tail. A partially written trailing line (torn
write during a crash) is ignored on read; a malformed line elsewhere, or a
seq gap, means the journal is corrupt.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import YardError
from .model import DomainEvent


class CorruptJournal(YardError):
    def __init__(self, seq: int, detail: str = ""):
        self.seq = seq
        super().__init__(f"journal corrupt at seq {seq}: {detail}")


class SnapshotMismatch(YardError):
    pass


@dataclass(frozen=True)
class JournalEntry:
    seq: int
    event: DomainEvent

    def to_doc(self) -> dict:
        return {"seq": self.seq, "event": self.event.to_doc()}

    @classmethod
    def from_doc(cls, doc: dict) -> "JournalEntry":
        return cls(seq=int(doc["seq"]), event=DomainEvent.from_doc(doc["event"]))


class JournalWriter:
    def __init__(self, path: Path):
        self.path = path
        path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(path, "a", encoding="utf-8")

    def append(self, entry: JournalEntry, fsync: bool = False) -> None:
        self._fh.write(json.dumps(entry.to_doc(), separators=(",", ":")) + "\n")
        self._fh.flush()
        if fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        try:
            self._fh.flush()
            os.fsync(self._fh.fileno())
        except (OSError, ValueError):
            pass
        self._fh.close()


def read_journal(path: Path) -> list[JournalEntry]:
    """All entries in file order. The final line may be torn and is then
    skipped; torn or unparseable lines elsewhere raise CorruptJournal."""
    if not path.exists():
        return []
    entries: list[JournalEntry] = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    for i, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            entries.append(JournalEntry.from_doc(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            if i == len(lines) - 1:
                break
            last_seq = entries[-1].seq if entries else 0
            raise CorruptJournal(last_seq + 1, f"unreadable line {i + 1}: {exc}") from None
    return entries


def write_snapshot(path: Path, seq: int, state: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump({"seq": seq, "state": state}, fh)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def read_snapshot(path: Path) -> tuple[int, dict] | None:
    if not path.exists():
        return None
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    return int(doc["seq"]), doc["state"]
