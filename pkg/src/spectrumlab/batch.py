"""Batch layer: immutable master dataset plus precomputed aggregate views.

The master dataset reuses the ingestion segment-file format and is
append-only; compaction deduplicates on (sensor_id, seq) so queue
replays are idempotent.  Aggregate jobs sweep the master dataset and
publish one table per (t_width, f_width) level with an atomic
write-then-rename swap, so queries always see a complete version.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

from .aggregation import Acc, Cell, accumulate_envelope, cells_from_acc
from .errors import InvalidArgument, NoSuchView
from .ingest import _Partition
from .wire import Envelope

# Required levels: the public resolution cap (60 s / 100 kHz) and the
# TV-band occupancy grid (60 s / 1 MHz); 5 s / 100 kHz mirrors the speed
# layer for fusion and equivalence checks.
DEFAULT_LEVELS: list[tuple[int, float]] = [
    (5_000, 100e3),
    (60_000, 100e3),
    (60_000, 1e6),
]


class MasterStore:
    """Append-only deduplicated record store."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._segment = _Partition(self.dir / "master.seg")
        self._seen: set[tuple[str, int]] = set()
        self._lock = threading.Lock()
        self.skipped_corrupt = self._segment.corrupt_skipped
        for env in self.records():
            self._seen.add(env.key)

    def compact(self, envelopes) -> dict:
        """Fold a batch of envelopes in; returns {appended, duplicates, invalid}."""
        stats = {"appended": 0, "duplicates": 0, "invalid": 0}
        for env in envelopes:
            if not isinstance(env, Envelope):
                try:
                    env = Envelope.from_json(env)
                except InvalidArgument:
                    stats["invalid"] += 1
                    continue
            with self._lock:
                if env.key in self._seen:
                    stats["duplicates"] += 1
                    continue
                self._seen.add(env.key)
                self._segment.append(env.to_json().encode(), 0)
                stats["appended"] += 1
        return stats

    def records(self):
        offset = 0
        while True:
            raw, offset = self._segment.read(offset, 4096)
            if not raw:
                return
            for body in raw:
                yield Envelope.from_json(body)

    def count(self) -> int:
        return self._segment.head()

    def close(self) -> None:
        self._segment.close()


def _level_name(t_width_ms: int, f_width_hz: float) -> str:
    return f"t{int(t_width_ms)}_f{int(f_width_hz)}"


def build_aggregates(
    master: MasterStore,
    levels: list[tuple[int, float]] | None = None,
    t_range: tuple[int, int] | None = None,
) -> dict[tuple[int, float], Acc]:
    """Aggregate the master dataset at each requested level.

    Every PSD bin whose t0 falls inside ``t_range`` (when given)
    contributes its linear-mW power to exactly one cell per level.
    """
    levels = levels if levels is not None else list(DEFAULT_LEVELS)
    tables: dict[tuple[int, float], Acc] = {lvl: {} for lvl in levels}
    for env in master.records():
        if env.kind != "psd":
            continue
        if t_range is not None and not t_range[0] <= env.t0_ms < t_range[1]:
            continue
        for (t_w, f_w), acc in tables.items():
            accumulate_envelope(acc, env, t_w, f_w)
    return tables


class AggregateStore:
    """Published aggregate tables, one JSON-lines file per level.

    Writers build a complete table and swap it in with an atomic rename;
    readers hold the in-memory version that was current when they asked.
    """

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self._tables: dict[tuple[int, float], Acc] = {}
        self._lock = threading.Lock()
        self._load_existing()

    def _path(self, level: tuple[int, float]) -> Path:
        return self.dir / f"agg_{_level_name(*level)}.jsonl"

    def _load_existing(self) -> None:
        for path in sorted(self.dir.glob("agg_t*_f*.jsonl")):
            name = path.stem[4:]
            t_part, f_part = name.split("_f")
            level = (int(t_part[1:]), float(f_part))
            acc: Acc = {}
            with open(path) as fh:
                for line in fh:
                    d = json.loads(line)
                    acc[(d["s"], d["t"], d["f"])] = [d["sum"], d["n"], d["max"]]
            self._tables[level] = acc

    def publish(self, tables: dict[tuple[int, float], Acc]) -> None:
        for level, acc in tables.items():
            path = self._path(level)
            tmp = path.with_suffix(".tmp")
            with open(tmp, "w") as fh:
                for (s, t, f) in sorted(acc):
                    total, count, peak = acc[(s, t, f)]
                    fh.write(json.dumps(
                        {"s": s, "t": t, "f": f,
                         "sum": total, "n": count, "max": peak}) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        with self._lock:
            self._tables.update(tables)

    def levels(self) -> list[tuple[int, float]]:
        with self._lock:
            return sorted(self._tables)

    def query(self, sensor_id: str, t0: int, t1: int, f0: float, f1: float,
              level: tuple[int, float], fn: str = "avg") -> list[Cell]:
        """Cells intersecting the half-open ranges, ordered by (t, f)."""
        if fn not in ("avg", "max"):
            raise InvalidArgument(f"unknown aggregation fn: {fn!r}")
        with self._lock:
            if level not in self._tables:
                raise NoSuchView(f"no aggregate view at level {level}")
            acc = self._tables[level]
        t_w, f_w = level
        hits: Acc = {}
        for key, slot in acc.items():
            s, t, f = key
            if s != sensor_id:
                continue
            if t + t_w <= t0 or t >= t1:
                continue
            if f + f_w <= f0 or f >= f1:
                continue
            hits[key] = slot
        return cells_from_acc(hits, t_w, f_w, fn, layer="batch")
