"""Reference storage server: passive export of yard data.

Appends every request document (which carries the yard state snapshot) as
one JSON line to a dated export file and returns a receipt. Never returns
state mutations — the permission matrix would reject them anyway.
"""
from __future__ import annotations

import json
import threading
import time
from pathlib import Path

from .kit import HandlerFailure


class StorageExporter:
    def __init__(self, export_dir: str | Path):
        self.export_dir = Path(export_dir)
        self._lock = threading.Lock()

    def _export_path(self) -> Path:
        return self.export_dir / f"yard-{time.strftime('%Y%m%d')}.jsonl"

    def __call__(self, doc: dict) -> dict:
        line = json.dumps(doc, separators=(",", ":"))
        try:
            with self._lock:
                self.export_dir.mkdir(parents=True, exist_ok=True)
                with open(self._export_path(), "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
        except OSError as exc:
            raise HandlerFailure(f"storage full or unwritable: {exc}") from None
        return {"stored": True, "bytes": len(line.encode("utf-8"))}
