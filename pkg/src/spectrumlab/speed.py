"""Speed layer: continuous tumbling-window aggregation over the live queue.

Windows are epoch-aligned and non-overlapping (default 5 s) so a sealed
window aggregates exactly the same envelopes the batch layer will later
see for that interval.  Envelopes may arrive up to ``lateness_ms`` after
a window ends; later ones are dropped and counted, never silently lost.
Sealed cells live in a small in-memory store with a retention horizon
and are pushed to any registered window listeners (the streaming API).
"""

from __future__ import annotations

import threading
import time

from .aggregation import Acc, Cell, accumulate_envelope, bucket_start, cells_from_acc
from .errors import NoSuchView
from .ingest import PartitionedLog
from .wire import Envelope

DEFAULT_WINDOW_MS = 5_000
DEFAULT_LATENESS_MS = 2_000
DEFAULT_RETENTION_MS = 3_600_000


class SpeedStore:
    """Sealed speed cells keyed by window start, with expiry."""

    def __init__(self, window_ms: int, f_width_hz: float, retention_ms: int,
                 clock):
        self.window_ms = window_ms
        self.f_width_hz = f_width_hz
        self.retention_ms = retention_ms
        self._clock = clock
        self._windows: dict[int, Acc] = {}
        self._lock = threading.Lock()

    def put(self, w_start: int, acc: Acc) -> None:
        with self._lock:
            self._windows[w_start] = acc

    def expire(self) -> None:
        horizon = int(self._clock()) - self.retention_ms
        with self._lock:
            for w in [w for w in self._windows if w + self.window_ms < horizon]:
                del self._windows[w]

    def query_window(self, w_start: int) -> list[Cell]:
        """All cells of one sealed window (both fns, every sensor) at the
        native level - the streaming push payload."""
        with self._lock:
            acc = dict(self._windows.get(w_start, {}))
        avg = cells_from_acc(acc, self.window_ms, self.f_width_hz, "avg", "speed")
        peak = cells_from_acc(acc, self.window_ms, self.f_width_hz, "max", "speed")
        return avg + peak

    def query(self, sensor_id: str, t0: int, t1: int, f0: float, f1: float,
              level: tuple[int, float] | None = None,
              fn: str = "avg") -> list[Cell]:
        """Cells at the native (window, f_width) level or a coarsening of it."""
        t_w, f_w = level if level is not None else (self.window_ms, self.f_width_hz)
        if t_w % self.window_ms or f_w % self.f_width_hz:
            raise NoSuchView(
                f"speed store serves ({self.window_ms} ms, {self.f_width_hz} Hz) "
                f"or integer coarsenings, not ({t_w}, {f_w})"
            )
        horizon = int(self._clock()) - self.retention_ms
        merged: Acc = {}
        with self._lock:
            for w_start, acc in self._windows.items():
                if w_start + self.window_ms < horizon:
                    continue
                if w_start + self.window_ms <= t0 or w_start >= t1:
                    continue
                for (s, t, f), slot in acc.items():
                    if s != sensor_id:
                        continue
                    if f + self.f_width_hz <= f0 or f >= f1:
                        continue
                    key = (s, int(bucket_start(t, t_w)), bucket_start(f, f_w))
                    target = merged.get(key)
                    if target is None:
                        merged[key] = list(slot)
                    else:
                        target[0] += slot[0]
                        target[1] += slot[1]
                        if slot[2] > target[2]:
                            target[2] = slot[2]
        return cells_from_acc(merged, t_w, f_w, fn, layer="speed")


class SpeedLayer:
    def __init__(
        self,
        log: PartitionedLog,
        window_ms: int = DEFAULT_WINDOW_MS,
        f_width_hz: float = 100e3,
        lateness_ms: int = DEFAULT_LATENESS_MS,
        retention_ms: int = DEFAULT_RETENTION_MS,
        clock=None,
        poll_s: float = 0.25,
    ):
        self.log = log
        self.window_ms = window_ms
        self.f_width_hz = f_width_hz
        self.lateness_ms = lateness_ms
        self.poll_s = poll_s
        self._clock = clock or (lambda: time.time() * 1000)
        self.store = SpeedStore(window_ms, f_width_hz, retention_ms, self._clock)
        self._offsets = [0] * log.n_partitions
        self._open: dict[int, Acc] = {}
        self._seen: dict[int, set] = {}      # per-window (sensor, seq) dedup
        self._closed_until = 0               # window starts below this are sealed
        self._listeners: list = []
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self.metrics = {
            "late_dropped": 0,
            "windows_closed": 0,
            "envelopes_seen": 0,
            "last_close_lag_ms": 0,
        }

    def add_window_listener(self, callback) -> None:
        """callback(w_start_ms, window_ms, cells: list[Cell] incl. avg+max)."""
        self._listeners.append(callback)

    # -- ingestion ----------------------------------------------------------

    def pump(self) -> int:
        """Drain new envelopes from every partition; returns count."""
        n = 0
        for pid in range(self.log.n_partitions):
            while True:
                envs, nxt = self.log.consume(pid, self._offsets[pid], 2048)
                if not envs:
                    break
                self._offsets[pid] = nxt
                for env in envs:
                    self._on_envelope(env)
                    n += 1
        return n

    def _on_envelope(self, env: Envelope) -> None:
        if env.kind != "psd":
            return
        self.metrics["envelopes_seen"] += 1
        w_start = int(bucket_start(env.t0_ms, self.window_ms))
        with self._lock:
            if w_start < self._closed_until:
                self.metrics["late_dropped"] += 1
                return
            seen = self._seen.setdefault(w_start, set())
            if env.key in seen:
                return
            seen.add(env.key)
            acc = self._open.setdefault(w_start, {})
            accumulate_envelope(acc, env, self.window_ms, self.f_width_hz)

    # -- window lifecycle ---------------------------------------------------

    def close_due_windows(self) -> list[int]:
        """Seal every window whose end + lateness has passed."""
        now = int(self._clock())
        seal_below = int(bucket_start(now - self.window_ms - self.lateness_ms,
                                      self.window_ms)) + self.window_ms
        sealed = []
        with self._lock:
            if seal_below <= self._closed_until:
                return []
            due = sorted(w for w in self._open if w < seal_below)
            self._closed_until = seal_below
            for w in due:
                acc = self._open.pop(w)
                self._seen.pop(w, None)
                self.store.put(w, acc)
                sealed.append(w)
                self.metrics["windows_closed"] += 1
                self.metrics["last_close_lag_ms"] = now - (w + self.window_ms)
        for w in sealed:
            cells = self.store.query_window(w)
            for listener in self._listeners:
                try:
                    listener(w, self.window_ms, cells)
                except Exception:
                    pass
        self.store.expire()
        return sealed

    def seal_all(self) -> list[int]:
        """Force-close every open window (end-of-replay helper)."""
        with self._lock:
            due = sorted(self._open)
            if due:
                self._closed_until = max(self._closed_until,
                                         due[-1] + self.window_ms)
            sealed = []
            for w in due:
                self.store.put(w, self._open.pop(w))
                self._seen.pop(w, None)
                sealed.append(w)
                self.metrics["windows_closed"] += 1
        for w in sealed:
            cells = self.store.query_window(w)
            for listener in self._listeners:
                try:
                    listener(w, self.window_ms, cells)
                except Exception:
                    pass
        return sealed

    # -- loop ---------------------------------------------------------------

    def run(self) -> None:
        while not self._stop.is_set():
            self.pump()
            self.close_due_windows()
            self._stop.wait(self.poll_s)

    def start(self) -> threading.Thread:
        self._stop.clear()
        self._thread = threading.Thread(target=self.run, daemon=True,
                                        name="speed-layer")
        self._thread.start()
        return self._thread

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2)
