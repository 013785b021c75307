"""Sensor registry and campaign manager.

Registration assigns each sensor a stable obfuscated public location
(uniform draw in a disc, seeded by the sensor id) so the published map
never reveals the true position.  Campaigns fan scan commands out over
the broker on ``control/<sensor_id>/cmd`` and collect acknowledgements
on ``control/<sensor_id>/ack`` within a fixed timeout.
"""

from __future__ import annotations

import hashlib
import math
import threading
import time
import uuid
from dataclasses import dataclass, field, replace

from .broker import Broker
from .errors import InvalidArgument, NotFound, StateError
from .sensor import SensorConfig
from .units import PLATFORM_F_HI, PLATFORM_F_LO

DEFAULT_OBFUSCATION_RADIUS_KM = 5.0
ACK_TIMEOUT_S = 2.0
KM_PER_DEG = 111.195  # mean earth radius * pi / 180

COMMAND_VERBS = ("set-band", "set-strategy", "set-sample-rate", "set-pipeline", "stop")

# Command targets revert to this when stopped: full-range sequential sweep.
DEFAULT_SWEEP_CONFIG = SensorConfig()


def haversine_km(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    r = 6371.0088
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dp = p2 - p1
    dl = math.radians(lon2 - lon1)
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * r * math.asin(math.sqrt(a))


def obfuscate_location(lat: float, lon: float, radius_km: float,
                       sensor_key: str) -> tuple[float, float]:
    """Offset a position uniformly within a disc of ``radius_km``.

    The draw is seeded by a hash of ``sensor_key`` so repeated calls give
    the same public location.  Planar small-angle approximation with
    latitude-corrected longitude; mean displacement is (2/3) * radius.
    """
    if radius_km < 0:
        raise InvalidArgument("radius_km must be >= 0")
    if radius_km == 0:
        return (lat, lon)
    digest = hashlib.sha256(sensor_key.encode()).digest()
    u = int.from_bytes(digest[:8], "big") / 2**64
    v = int.from_bytes(digest[8:16], "big") / 2**64
    r = radius_km * math.sqrt(u)
    theta = 2 * math.pi * v
    north_km = r * math.cos(theta)
    east_km = r * math.sin(theta)
    new_lat = lat + north_km / KM_PER_DEG
    new_lon = lon + east_km / (KM_PER_DEG * math.cos(math.radians(lat)))
    return (new_lat, new_lon)


@dataclass
class SensorRecord:
    sensor_id: str
    owner_id: str
    true_location: tuple[float, float]
    public_location: tuple[float, float]
    antenna_desc: str
    visibility: str = "public"          # public | restricted | private
    status: str = "offline"
    registered_at: int = 0

    def public_view(self) -> dict:
        return {
            "sensor_id": self.sensor_id,
            "location": list(self.public_location),
            "antenna_desc": self.antenna_desc,
            "visibility": self.visibility,
            "status": self.status,
            "registered_at": self.registered_at,
        }

    def owner_view(self) -> dict:
        d = self.public_view()
        d["true_location"] = list(self.true_location)
        d["owner_id"] = self.owner_id
        return d


class SensorRegistry:
    def __init__(self, obfuscation_radius_km: float = DEFAULT_OBFUSCATION_RADIUS_KM,
                 clock=None):
        self.radius_km = obfuscation_radius_km
        self._records: dict[str, SensorRecord] = {}
        self._lock = threading.Lock()
        self._clock = clock or (lambda: time.time() * 1000)

    def register(self, owner_id: str, lat: float, lon: float,
                 antenna_desc: str = "", visibility: str = "public",
                 sensor_id: str | None = None) -> SensorRecord:
        if not -90 <= lat <= 90 or not -180 <= lon <= 180:
            raise InvalidArgument(f"coordinates out of range: ({lat}, {lon})")
        if visibility not in ("public", "restricted", "private"):
            raise InvalidArgument(f"unknown visibility: {visibility!r}")
        sid = sensor_id or f"sn-{uuid.uuid4().hex[:10]}"
        record = SensorRecord(
            sensor_id=sid,
            owner_id=owner_id,
            true_location=(lat, lon),
            public_location=obfuscate_location(lat, lon, self.radius_km, sid),
            antenna_desc=antenna_desc,
            visibility=visibility,
            registered_at=int(self._clock()),
        )
        with self._lock:
            self._records[sid] = record
        return record

    def get(self, sensor_id: str) -> SensorRecord:
        with self._lock:
            if sensor_id not in self._records:
                raise NotFound(f"unknown sensor {sensor_id!r}")
            return self._records[sensor_id]

    def exists(self, sensor_id: str) -> bool:
        with self._lock:
            return sensor_id in self._records

    def list(self, viewer: str | None = None) -> list[dict]:
        """Map listing: owners see their own true locations, everyone else
        the obfuscated public ones."""
        with self._lock:
            records = list(self._records.values())
        out = []
        for r in sorted(records, key=lambda r: r.sensor_id):
            out.append(r.owner_view() if viewer and r.owner_id == viewer
                       else r.public_view())
        return out

    def set_status(self, sensor_id: str, status: str) -> None:
        with self._lock:
            if sensor_id in self._records:
                self._records[sensor_id].status = status


# --------------------------------------------------------------------------
# Commands
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Command:
    command_id: str
    campaign_id: str
    verb: str
    args: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verb not in COMMAND_VERBS:
            raise InvalidArgument(f"unknown command verb: {self.verb!r}")

    def to_dict(self) -> dict:
        return {"command_id": self.command_id, "campaign_id": self.campaign_id,
                "verb": self.verb, "args": self.args}

    @classmethod
    def from_dict(cls, d: dict) -> "Command":
        return cls(command_id=d["command_id"], campaign_id=d["campaign_id"],
                   verb=d["verb"], args=d.get("args", {}))


def apply_command(config: SensorConfig, cmd: Command) -> SensorConfig:
    """Pure config transition; raises InvalidArgument and leaves the input
    untouched on bad arguments (caller publishes the negative ack)."""
    if cmd.verb == "set-band":
        f_lo, f_hi = float(cmd.args["f_lo_hz"]), float(cmd.args["f_hi_hz"])
        if f_lo < PLATFORM_F_LO or f_hi > PLATFORM_F_HI or f_hi <= f_lo:
            raise InvalidArgument(
                f"band [{f_lo}, {f_hi}] outside platform range "
                f"[{PLATFORM_F_LO:.0f}, {PLATFORM_F_HI:.0f}]"
            )
        return config.with_updates(band=(f_lo, f_hi))
    if cmd.verb == "set-strategy":
        return config.with_updates(strategy=cmd.args["strategy"])
    if cmd.verb == "set-sample-rate":
        rate = float(cmd.args["sample_rate_hz"])
        if rate <= 0:
            raise InvalidArgument("sample rate must be > 0")
        return config.with_updates(sample_rate=rate)
    if cmd.verb == "set-pipeline":
        return config.with_updates(pipeline=cmd.args["pipeline"])
    if cmd.verb == "stop":
        return replace(DEFAULT_SWEEP_CONFIG)
    raise InvalidArgument(f"unknown command verb: {cmd.verb!r}")


# --------------------------------------------------------------------------
# Campaigns
# --------------------------------------------------------------------------

@dataclass
class Campaign:
    campaign_id: str
    band: tuple[float, float]
    strategy: str = "sequential"
    sample_rate: float = 2.4e6
    pipeline: str = "psd"
    target_sensors: tuple[str, ...] = ()
    state: str = "created"              # created -> running -> stopped

    def __post_init__(self):
        f_lo, f_hi = self.band
        if f_lo < PLATFORM_F_LO or f_hi > PLATFORM_F_HI or f_hi <= f_lo:
            raise InvalidArgument("campaign band outside 20 MHz - 6 GHz")

    def commands(self) -> list[Command]:
        mk = lambda verb, args: Command(
            command_id=f"cmd-{uuid.uuid4().hex[:8]}", campaign_id=self.campaign_id,
            verb=verb, args=args)
        return [
            mk("set-band", {"f_lo_hz": self.band[0], "f_hi_hz": self.band[1]}),
            mk("set-strategy", {"strategy": self.strategy}),
            mk("set-sample-rate", {"sample_rate_hz": self.sample_rate}),
            mk("set-pipeline", {"pipeline": self.pipeline}),
        ]

    def to_dict(self) -> dict:
        return {
            "campaign_id": self.campaign_id,
            "band_hz": list(self.band),
            "strategy": self.strategy,
            "sample_rate_hz": self.sample_rate,
            "pipeline": self.pipeline,
            "target_sensors": list(self.target_sensors),
            "state": self.state,
        }


@dataclass
class FanoutReport:
    campaign_id: str
    acked: list[str]
    unreachable: list[str]

    def to_dict(self) -> dict:
        return {"campaign_id": self.campaign_id, "acked": self.acked,
                "unreachable": self.unreachable}


class CampaignManager:
    """Single logical writer over campaigns; ack callbacks only set events."""

    def __init__(self, broker: Broker, registry: SensorRegistry,
                 ack_timeout_s: float = ACK_TIMEOUT_S):
        self.broker = broker
        self.registry = registry
        self.ack_timeout_s = ack_timeout_s
        self.campaigns: dict[str, Campaign] = {}
        self.reports: dict[str, FanoutReport] = {}
        self._lock = threading.Lock()

    def create(self, band, strategy="sequential", sample_rate=2.4e6,
               pipeline="psd", targets=()) -> Campaign:
        c = Campaign(
            campaign_id=f"cmp-{uuid.uuid4().hex[:8]}",
            band=(float(band[0]), float(band[1])),
            strategy=strategy,
            sample_rate=float(sample_rate),
            pipeline=pipeline,
            target_sensors=tuple(targets),
        )
        with self._lock:
            self.campaigns[c.campaign_id] = c
        return c

    def get(self, campaign_id: str) -> Campaign:
        with self._lock:
            if campaign_id not in self.campaigns:
                raise NotFound(f"unknown campaign {campaign_id!r}")
            return self.campaigns[campaign_id]

    def list(self) -> list[Campaign]:
        with self._lock:
            return sorted(self.campaigns.values(), key=lambda c: c.campaign_id)

    def start(self, campaign_id: str) -> FanoutReport:
        c = self.get(campaign_id)
        if c.state != "created":
            raise StateError(f"campaign {campaign_id} is {c.state}, not created")

        commands = c.commands()
        expected = {cmd.command_id for cmd in commands}
        pending: dict[str, set[str]] = {}
        done: dict[str, threading.Event] = {}
        acked: list[str] = []
        unreachable: list[str] = []
        lock = threading.Lock()
        subs = []

        def make_handler(sid):
            def on_ack(topic, payload):
                if not payload.get("ok", False):
                    return
                with lock:
                    pending[sid].discard(payload.get("command_id"))
                    if not pending[sid]:
                        done[sid].set()
            return on_ack

        targets = [s for s in c.target_sensors]
        for sid in targets:
            if not self.registry.exists(sid):
                unreachable.append(sid)
                continue
            pending[sid] = set(expected)
            done[sid] = threading.Event()
            subs.append(self.broker.subscribe(f"control/{sid}/ack", make_handler(sid)))

        for sid in list(pending):
            for cmd in commands:
                self.broker.publish(f"control/{sid}/cmd", cmd.to_dict())

        deadline = time.monotonic() + self.ack_timeout_s
        for sid in list(pending):
            remaining = max(0.0, deadline - time.monotonic())
            if done[sid].wait(timeout=remaining):
                acked.append(sid)
            else:
                unreachable.append(sid)
        for sub in subs:
            sub.cancel()

        c.state = "running"
        report = FanoutReport(campaign_id=c.campaign_id, acked=sorted(acked),
                              unreachable=sorted(unreachable))
        with self._lock:
            self.reports[c.campaign_id] = report
        return report

    def stop(self, campaign_id: str) -> Campaign:
        c = self.get(campaign_id)
        if c.state != "running":
            raise StateError(f"campaign {campaign_id} is {c.state}, not running")
        stop_cmd = Command(command_id=f"cmd-{uuid.uuid4().hex[:8]}",
                           campaign_id=c.campaign_id, verb="stop")
        for sid in c.target_sensors:
            self.broker.publish(f"control/{sid}/cmd", stop_cmd.to_dict())
        c.state = "stopped"
        return c
