"""Serving layer: the open API over the batch and speed views.

Fusion rule: wherever both layers have a cell for the same bucket, the
batch cell wins; speed only fills the recent gap batch has not reached.
Resolution caps for non-owners (60 s / 100 kHz) are applied before any
store is touched and the applied resolutions are echoed back, so the
clamping is observable.  All stored values are linear mW; this module is
the dB edge - responses report dBm.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

from .aggregation import Cell, coarsen
from .batch import AggregateStore, MasterStore
from .control import CampaignManager, SensorRegistry
from .errors import (
    InvalidArgument,
    NotFound,
    NoSuchView,
    PermissionDenied,
    Unavailable,
)
from .sensor import IqMessage, PsdSegment
from .speed import SpeedLayer
from .units import mw_to_dbm

MIN_PUBLIC_T_RES_MS = 60_000
MIN_PUBLIC_F_RES_HZ = 100e3
IQ_STAGING_TTL_MS = 3_600_000


class TokenAuth:
    """Static bearer-token table; None means anonymous."""

    def __init__(self, tokens: dict[str, str] | None = None):
        self._tokens = dict(tokens or {})

    def add(self, token: str, user_id: str) -> None:
        self._tokens[token] = user_id

    def resolve(self, authorization: str | None) -> str | None:
        if not authorization:
            return None
        parts = authorization.split(None, 1)
        token = parts[1] if len(parts) == 2 and parts[0].lower() == "bearer" else parts[0]
        return self._tokens.get(token)


@dataclass
class QuerySpec:
    sensor_id: str
    t0_ms: int
    t1_ms: int
    f0_hz: float
    f1_hz: float
    t_res_ms: int = MIN_PUBLIC_T_RES_MS
    f_res_hz: float = MIN_PUBLIC_F_RES_HZ
    fn: str = "avg"
    mode: str = "aggregated"

    def __post_init__(self):
        if self.t1_ms <= self.t0_ms or self.f1_hz <= self.f0_hz:
            raise InvalidArgument("empty query range")
        if self.t_res_ms <= 0 or self.f_res_hz <= 0:
            raise InvalidArgument("resolutions must be positive")
        if self.fn not in ("avg", "max"):
            raise InvalidArgument(f"unknown aggregation fn: {self.fn!r}")


@dataclass
class AggregatedGrid:
    sensor_id: str
    applied_t_res_ms: int
    applied_f_res_hz: float
    fn: str
    cells: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sensor_id": self.sensor_id,
            "applied_t_res_ms": self.applied_t_res_ms,
            "applied_f_res_hz": self.applied_f_res_hz,
            "fn": self.fn,
            "cells": self.cells,
        }


class ServingLayer:
    def __init__(
        self,
        registry: SensorRegistry,
        master: MasterStore | None,
        aggregates: AggregateStore | None,
        speed: SpeedLayer | None,
        campaigns: CampaignManager | None = None,
        log=None,
        clock=None,
        iq_ttl_ms: int = IQ_STAGING_TTL_MS,
    ):
        self.registry = registry
        self.master = master
        self.aggregates = aggregates
        self.speed = speed
        self.campaigns = campaigns
        self.log = log
        self._clock = clock or (lambda: time.time() * 1000)
        self.stream_hub = StreamHub(self)
        if speed is not None:
            speed.add_window_listener(self.stream_hub.on_window)
        self._iq_ttl_ms = iq_ttl_ms
        self._iq_staging: dict[str, dict] = {}
        self._iq_lock = threading.Lock()

    # -- access control -----------------------------------------------------

    def _record(self, sensor_id: str):
        return self.registry.get(sensor_id)          # raises NotFound

    def is_owner(self, user: str | None, sensor_id: str) -> bool:
        return user is not None and self._record(sensor_id).owner_id == user

    def check_view(self, user: str | None, sensor_id: str) -> None:
        rec = self._record(sensor_id)
        if rec.visibility == "private" and rec.owner_id != user:
            raise PermissionDenied(f"sensor {sensor_id} is private")
        if rec.visibility == "restricted" and user is None:
            raise PermissionDenied(f"sensor {sensor_id} requires authentication")

    def clamp_resolution(self, user: str | None, sensor_id: str,
                         t_res_ms: int, f_res_hz: float) -> tuple[int, float]:
        if self.is_owner(user, sensor_id):
            return t_res_ms, f_res_hz
        return (max(t_res_ms, MIN_PUBLIC_T_RES_MS),
                max(f_res_hz, MIN_PUBLIC_F_RES_HZ))

    # -- aggregated queries ---------------------------------------------------

    def _batch_cells(self, spec: QuerySpec, level: tuple[int, float]) -> list[Cell]:
        if self.aggregates is None:
            raise NoSuchView("no batch store attached")
        stored = self.aggregates.levels()
        if level in stored:
            return self.aggregates.query(spec.sensor_id, spec.t0_ms, spec.t1_ms,
                                         spec.f0_hz, spec.f1_hz, level, spec.fn)
        # Derive from the finest stored level that divides the request.
        for cand in stored:
            if level[0] % cand[0] == 0 and level[1] % cand[1] == 0:
                fine = self.aggregates.query(spec.sensor_id, spec.t0_ms, spec.t1_ms,
                                             spec.f0_hz, spec.f1_hz, cand, spec.fn)
                return coarsen(fine, level[0], level[1])
        raise NoSuchView(f"no stored view can serve level {level}")

    def _speed_cells(self, spec: QuerySpec, level: tuple[int, float]) -> list[Cell]:
        if self.speed is None:
            raise NoSuchView("no speed store attached")
        return self.speed.store.query(spec.sensor_id, spec.t0_ms, spec.t1_ms,
                                      spec.f0_hz, spec.f1_hz, level, spec.fn)

    def query_aggregated(self, user: str | None, spec: QuerySpec) -> AggregatedGrid:
        self.check_view(user, spec.sensor_id)
        t_res, f_res = self.clamp_resolution(user, spec.sensor_id,
                                             spec.t_res_ms, spec.f_res_hz)
        level = (t_res, f_res)
        batch_err = speed_err = None
        try:
            batch_cells = self._batch_cells(spec, level)
        except NoSuchView as e:
            batch_cells, batch_err = [], e
        try:
            speed_cells = self._speed_cells(spec, level)
        except NoSuchView as e:
            speed_cells, speed_err = [], e
        if batch_err is not None and speed_err is not None:
            raise batch_err

        fused: dict[tuple[int, float], Cell] = {}
        for c in speed_cells:
            fused[(c.t_start_ms, c.f_start_hz)] = c
        for c in batch_cells:                     # batch wins on conflicts
            fused[(c.t_start_ms, c.f_start_hz)] = c

        grid = AggregatedGrid(sensor_id=spec.sensor_id, applied_t_res_ms=t_res,
                              applied_f_res_hz=f_res, fn=spec.fn)
        for key in sorted(fused):
            c = fused[key]
            grid.cells.append({
                "t_start_ms": c.t_start_ms,
                "t_width_ms": c.t_width_ms,
                "f_start_hz": c.f_start_hz,
                "f_width_hz": c.f_width_hz,
                "dbm": mw_to_dbm(c.value_mw),
                "count": c.count,
                "layer": c.layer,
            })
        return grid

    # -- raw queries ----------------------------------------------------------

    def query_raw(self, user: str | None, sensor_id: str, t0_ms: int, t1_ms: int,
                  f0_hz: float | None = None,
                  f1_hz: float | None = None) -> list[PsdSegment]:
        if not self.is_owner(user, sensor_id):
            self._record(sensor_id)
            raise PermissionDenied("raw FFT data is owner-only")
        if self.master is None:
            return []
        out = []
        for env in self.master.records():
            if env.kind != "psd" or env.sensor_id != sensor_id:
                continue
            if not t0_ms <= env.t0_ms < t1_ms:
                continue
            if f0_hz is not None and f1_hz is not None:
                half_span = env.bin_width * len(env.bins) / 2
                if env.center_freq + half_span <= f0_hz:
                    continue
                if env.center_freq - half_span >= f1_hz:
                    continue
            out.append(env.to_segment())
        out.sort(key=lambda s: (s.t0_ms, s.center_freq))
        return out

    # -- IQ on demand -----------------------------------------------------------

    def request_iq(self, user: str | None, sensor_id: str,
                   duration_ms: int = 1000, band=None) -> str:
        """Stage an on-demand IQ capture; returns the request id.

        The capture rides a transient IQ campaign through the control
        plane; messages arriving on the ingestion queue for that campaign
        are staged, downloadable by the owner until the TTL expires, and
        deleted afterwards.  Blocks for roughly ``duration_ms``.
        """
        if not self.is_owner(user, sensor_id):
            self._record(sensor_id)
            raise PermissionDenied("IQ capture is owner-only")
        rec = self._record(sensor_id)
        if rec.status != "online":
            raise Unavailable(f"sensor {sensor_id} is offline")
        if self.campaigns is None or self.log is None:
            raise Unavailable("no control plane / ingestion queue attached")

        request_id = f"iq-{uuid.uuid4().hex[:10]}"
        heads = [self.log.head(p) for p in range(self.log.n_partitions)]
        campaign = self.campaigns.create(
            band=band or self._default_iq_band(sensor_id),
            pipeline="iq", targets=(sensor_id,))
        report = self.campaigns.start(campaign.campaign_id)
        if sensor_id in report.unreachable:
            self.campaigns.stop(campaign.campaign_id)
            raise Unavailable(f"sensor {sensor_id} did not ack the IQ campaign")

        messages: list[IqMessage] = []
        deadline = time.monotonic() + duration_ms / 1000 + 2.0
        while time.monotonic() < deadline:
            for pid in range(self.log.n_partitions):
                envs, heads[pid] = self.log.consume(pid, heads[pid], 1024)
                for env in envs:
                    if env.kind == "iq" and env.campaign_id == campaign.campaign_id:
                        messages.append(env.to_iq_message())
            if messages and time.monotonic() >= deadline - 2.0:
                break
            time.sleep(0.05)
        self.campaigns.stop(campaign.campaign_id)

        with self._iq_lock:
            self._iq_staging[request_id] = {
                "request_id": request_id,
                "owner": user,
                "sensor_id": sensor_id,
                "expires_ms": int(self._clock()) + self._iq_ttl_ms,
                "messages": messages,
                "campaign_id": campaign.campaign_id,
            }
        return request_id

    def _default_iq_band(self, sensor_id: str) -> tuple[float, float]:
        """A single-hop window so the temporary capture stays put."""
        from .units import DEFAULT_SAMPLE_RATE
        return (600e6, 600e6 + DEFAULT_SAMPLE_RATE)

    def fetch_iq(self, user: str | None, request_id: str) -> list[IqMessage]:
        self.purge_expired_iq()
        with self._iq_lock:
            entry = self._iq_staging.get(request_id)
            if entry is None:
                raise NotFound(f"no staged IQ request {request_id!r}")
            if entry["owner"] != user:
                raise PermissionDenied("staged IQ data is owner-only")
            return list(entry["messages"])

    def purge_expired_iq(self) -> None:
        now = int(self._clock())
        with self._iq_lock:
            for rid in [r for r, e in self._iq_staging.items()
                        if e["expires_ms"] <= now]:
                del self._iq_staging[rid]


# --------------------------------------------------------------------------
# Live streaming
# --------------------------------------------------------------------------

class StreamSubscriber:
    def __init__(self, user: str | None, sensors: list[str],
                 f0_hz: float | None, f1_hz: float | None, maxsize: int = 64):
        import queue as _q
        self.user = user
        self.sensors = set(sensors)
        self.f0_hz = f0_hz
        self.f1_hz = f1_hz
        self.queue: "_q.Queue[dict]" = _q.Queue(maxsize=maxsize)
        self.dropped = 0
        self.active = True

    def push(self, record: dict) -> None:
        import queue as _q
        try:
            self.queue.put_nowait(record)
        except _q.Full:
            # Slow consumer: drop the oldest record, keep the stream moving.
            try:
                self.queue.get_nowait()
                self.dropped += 1
            except _q.Empty:
                pass
            try:
                self.queue.put_nowait(record)
            except _q.Full:
                self.dropped += 1

    def get(self, timeout: float | None = None) -> dict | None:
        import queue as _q
        try:
            return self.queue.get(timeout=timeout)
        except _q.Empty:
            return None


class StreamHub:
    """Fans sealed speed windows out to per-subscriber queues."""

    def __init__(self, serving: ServingLayer):
        self.serving = serving
        self._subs: list[StreamSubscriber] = []
        self._lock = threading.Lock()

    def subscribe(self, user: str | None, sensors: list[str],
                  f0_hz: float | None = None,
                  f1_hz: float | None = None) -> StreamSubscriber:
        for sid in sensors:
            self.serving.check_view(user, sid)    # deny before any data flows
        sub = StreamSubscriber(user, sensors, f0_hz, f1_hz)
        with self._lock:
            self._subs.append(sub)
        return sub

    def unsubscribe(self, sub: StreamSubscriber) -> None:
        sub.active = False
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def on_window(self, w_start: int, window_ms: int, cells: list[Cell]) -> None:
        with self._lock:
            subs = list(self._subs)
        if not subs:
            return
        for sub in subs:
            if not sub.active:
                continue
            chosen = [c for c in cells if c.sensor_id in sub.sensors]
            if sub.f0_hz is not None:
                chosen = [c for c in chosen
                          if c.f_start_hz + c.f_width_hz > sub.f0_hz]
            if sub.f1_hz is not None:
                chosen = [c for c in chosen if c.f_start_hz < sub.f1_hz]
            if not chosen:
                continue
            out_cells = []
            for sensor_id in sorted({c.sensor_id for c in chosen}):
                per_sensor = [c for c in chosen if c.sensor_id == sensor_id]
                # Frequency cap for non-owners: coarsen sub-cap cells up to
                # 100 kHz; the window width itself is the live display rate.
                if (not self.serving.is_owner(sub.user, sensor_id)
                        and per_sensor[0].f_width_hz < MIN_PUBLIC_F_RES_HZ):
                    capped = []
                    for fn in ("avg", "max"):
                        capped.extend(coarsen(
                            [c for c in per_sensor if c.fn == fn],
                            window_ms, MIN_PUBLIC_F_RES_HZ))
                    per_sensor = capped
                out_cells.extend({
                    "sensor_id": c.sensor_id,
                    "f_start_hz": c.f_start_hz,
                    "f_width_hz": c.f_width_hz,
                    "fn": c.fn,
                    "dbm": mw_to_dbm(c.value_mw),
                    "count": c.count,
                } for c in per_sensor)
            if out_cells:
                sub.push({
                    "t_start_ms": w_start,
                    "t_width_ms": window_ms,
                    "cells": out_cells,
                })
