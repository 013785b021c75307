"""MeasurementEnvelope wire format.

Envelopes travel as newline-delimited JSON records shared by the sensor
emitter, the collector socket, the queue and the master dataset:

    {"v": 1, "sensor_id": ..., "campaign_id": ..., "seq": ...,
     "type": "psd" | "iq", "center_freq_hz": ..., "t0_ms": ...,
     "dwell_ms": ..., "gain_meta": {...},
     # psd: "bin_width_hz", "n_avg", "payload": [floats]
     # iq:  "sample_rate_hz", "codec", "payload": base64 string}

``seq`` is a per-sensor monotone counter assigned by the producer.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument
from .sensor import GainMeta, IqMessage, PsdSegment

WIRE_VERSION = 1


@dataclass
class Envelope:
    sensor_id: str
    campaign_id: str
    seq: int
    kind: str                   # "psd" | "iq"
    center_freq: float
    t0_ms: int
    dwell_ms: float
    gain_meta: dict
    # psd fields
    bin_width: float | None = None
    n_avg: int | None = None
    bins: list[float] | None = None
    # iq fields
    sample_rate: float | None = None
    codec: str | None = None
    payload: bytes | None = None

    @property
    def key(self) -> tuple[str, int]:
        return (self.sensor_id, self.seq)

    def to_json(self) -> str:
        d = {
            "v": WIRE_VERSION,
            "sensor_id": self.sensor_id,
            "campaign_id": self.campaign_id,
            "seq": self.seq,
            "type": self.kind,
            "center_freq_hz": self.center_freq,
            "t0_ms": self.t0_ms,
            "dwell_ms": self.dwell_ms,
            "gain_meta": self.gain_meta,
        }
        if self.kind == "psd":
            d["bin_width_hz"] = self.bin_width
            d["n_avg"] = self.n_avg
            d["payload"] = self.bins
        else:
            d["sample_rate_hz"] = self.sample_rate
            d["codec"] = self.codec
            d["payload"] = base64.b64encode(self.payload or b"").decode("ascii")
        return json.dumps(d)

    @classmethod
    def from_json(cls, line: str | bytes) -> "Envelope":
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise InvalidArgument(f"malformed envelope: {e}") from e
        try:
            if d["v"] != WIRE_VERSION:
                raise InvalidArgument(f"unsupported envelope version {d['v']}")
            kind = d["type"]
            env = cls(
                sensor_id=d["sensor_id"],
                campaign_id=d["campaign_id"],
                seq=int(d["seq"]),
                kind=kind,
                center_freq=float(d["center_freq_hz"]),
                t0_ms=int(d["t0_ms"]),
                dwell_ms=float(d["dwell_ms"]),
                gain_meta=d.get("gain_meta", {}),
            )
            if kind == "psd":
                env.bin_width = float(d["bin_width_hz"])
                env.n_avg = int(d["n_avg"])
                env.bins = [float(b) for b in d["payload"]]
            elif kind == "iq":
                env.sample_rate = float(d["sample_rate_hz"])
                env.codec = d["codec"]
                env.payload = base64.b64decode(d["payload"])
            else:
                raise InvalidArgument(f"unknown envelope type {kind!r}")
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidArgument(f"malformed envelope: {e}") from e
        return env

    def to_segment(self) -> PsdSegment:
        if self.kind != "psd":
            raise InvalidArgument("not a PSD envelope")
        return PsdSegment(
            sensor_id=self.sensor_id,
            campaign_id=self.campaign_id,
            center_freq=self.center_freq,
            bin_width=self.bin_width,
            t0_ms=self.t0_ms,
            dwell_ms=self.dwell_ms,
            bins=np.array(self.bins),
            n_avg=self.n_avg,
            gain_meta=GainMeta.from_dict(self.gain_meta),
        )

    def to_iq_message(self) -> IqMessage:
        if self.kind != "iq":
            raise InvalidArgument("not an IQ envelope")
        return IqMessage(
            sensor_id=self.sensor_id,
            campaign_id=self.campaign_id,
            center_freq=self.center_freq,
            sample_rate=self.sample_rate,
            t0_ms=self.t0_ms,
            codec=self.codec,
            payload=self.payload,
        )


def envelope_from_segment(seg: PsdSegment, seq: int) -> Envelope:
    return Envelope(
        sensor_id=seg.sensor_id,
        campaign_id=seg.campaign_id,
        seq=seq,
        kind="psd",
        center_freq=seg.center_freq,
        t0_ms=seg.t0_ms,
        dwell_ms=seg.dwell_ms,
        gain_meta=seg.gain_meta.to_dict(),
        bin_width=seg.bin_width,
        n_avg=seg.n_avg,
        bins=[float(b) for b in seg.bins],
    )


def envelope_from_iq(msg: IqMessage, seq: int) -> Envelope:
    return Envelope(
        sensor_id=msg.sensor_id,
        campaign_id=msg.campaign_id,
        seq=seq,
        kind="iq",
        center_freq=msg.center_freq,
        t0_ms=msg.t0_ms,
        dwell_ms=0.0,
        gain_meta={},
        sample_rate=msg.sample_rate,
        codec=msg.codec,
        payload=msg.payload,
    )
