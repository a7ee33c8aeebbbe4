"""Resumable store for closed-loop sweep outcomes.

One CSV row per finished grid cell, appended and flushed as cells complete,
so an interrupted sweep resumes from whatever made it to disk. A torn final
line (the write that was cut off) is skipped on load. Only the coordinating
process writes; workers hand their results back first.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Mapping

from .simulate import METRIC_FIELDS

CACHE_SCHEMA = "1"

KEY_FIELDS = ("family", "label", "params", "kind", "curvature_level",
              "speed", "length", "v_scale", "w_scale", "drop_p",
              "runs", "seed", "dt", "control_every")
VALUE_FIELDS = METRIC_FIELDS + tuple("se_" + m for m in METRIC_FIELDS) \
    + ("runs_ok", "failed")
_COLUMNS = ("schema",) + KEY_FIELDS + VALUE_FIELDS


class CacheError(ValueError):
    pass


class SweepCache:
    """Append-only CSV cache keyed by the canonical cell tuple."""

    def __init__(self, path):
        self.path = Path(path)
        self._rows: dict[tuple, dict] = {}
        self._writer = None
        self._handle = None
        if self.path.exists() and self.path.stat().st_size > 0:
            self._load()

    def _load(self) -> None:
        with open(self.path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != list(_COLUMNS):
                raise CacheError(
                    f"{self.path}: written by an incompatible cache version")
            for row in reader:
                if len(row) != len(_COLUMNS):
                    continue  # torn tail of an interrupted run
                if row[0] != CACHE_SCHEMA:
                    raise CacheError(
                        f"{self.path}: row schema {row[0]!r}, expected "
                        f"{CACHE_SCHEMA}")
                key = tuple(row[1:1 + len(KEY_FIELDS)])
                try:
                    values = self._parse_values(row[1 + len(KEY_FIELDS):])
                except ValueError:
                    continue
                self._rows[key] = values

    @staticmethod
    def _parse_values(cells: list) -> dict:
        values: dict = {}
        for name, text in zip(VALUE_FIELDS, cells):
            if name in ("runs_ok", "failed"):
                values["runs" if name == "runs_ok" else name] = int(text)
            else:
                values[name] = float(text)
        return values

    def get(self, key: tuple) -> dict | None:
        key = tuple(str(k) for k in key)
        row = self._rows.get(key)
        return dict(row) if row is not None else None

    def put(self, key: tuple, values: Mapping) -> None:
        key = tuple(str(k) for k in key)
        if len(key) != len(KEY_FIELDS):
            raise CacheError(
                f"key has {len(key)} fields, expected {len(KEY_FIELDS)}")
        if key in self._rows:
            return
        stored = {name: values[name] for name in VALUE_FIELDS
                  if name not in ("runs_ok", "failed")}
        stored["runs"] = int(values["runs"])
        stored["failed"] = int(values["failed"])
        self._rows[key] = stored
        if self._writer is None:
            fresh = not self.path.exists() or self.path.stat().st_size == 0
            self._handle = open(self.path, "a", newline="",
                                encoding="utf-8")
            self._writer = csv.writer(self._handle)
            if fresh:
                self._writer.writerow(_COLUMNS)
        out = [CACHE_SCHEMA, *key]
        for name in VALUE_FIELDS:
            if name == "runs_ok":
                out.append(str(stored["runs"]))
            elif name == "failed":
                out.append(str(stored["failed"]))
            else:
                out.append(repr(float(stored[name])))
        self._writer.writerow(out)
        self._handle.flush()

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None
            self._writer = None

    def __enter__(self) -> "SweepCache":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __len__(self) -> int:
        return len(self._rows)

    def __contains__(self, key) -> bool:
        return tuple(str(k) for k in key) in self._rows
