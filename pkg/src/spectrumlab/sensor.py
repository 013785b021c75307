"""Sensor-side signal processing and scan scheduling.

The PSD pipeline turns an IQ block into averaged squared-magnitude FFT
bins (Bartlett averaging, contiguous non-overlapping frames).  Scaling
convention - bins are physical per-bin powers in linear mW:

    bins[k] = (1 / (n_avg * fft_size^2)) * sum_m |X_m[k]|^2

with X the plain (unnormalized) DFT of the windowed frame and the window
scaled so sum(w^2) = fft_size.  Consequences, all load-bearing
downstream: sum_k bins[k] equals the mean frame power, Parseval reads

    sum_k bins[k] * n_avg * fft_size == sum over all used samples |x|^2

exactly (rectangular window), in-band power is a plain sum of bins, and
bins[k] / bin_width estimates the PSD in mW/Hz.  Output bins are
FFT-shifted so bin 0 sits at the low edge of the tuned window and bin
centers ascend in absolute frequency.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgument
from .scene import SampleBlock
from .units import DEFAULT_SAMPLE_RATE, PLATFORM_F_HI, PLATFORM_F_LO

HEADER_BYTES = 64          # documented fixed envelope header size for rate math
BITS_PER_BIN = 32          # PSD bins travel as 32-bit floats
SCHED_EPSILON = 1e-6       # mW; liveness floor for bursty-weighted hopping
EWMA_ALPHA = 0.3           # burstiness smoothing factor


@dataclass
class GainMeta:
    antenna_gain_db: float = 0.0
    frontend_gain_db: float = 0.0
    cable_loss_db: float = 0.0

    @property
    def system_gain_db(self) -> float:
        return self.antenna_gain_db + self.frontend_gain_db - self.cable_loss_db

    def to_dict(self) -> dict:
        return {
            "antenna_gain_db": self.antenna_gain_db,
            "frontend_gain_db": self.frontend_gain_db,
            "cable_loss_db": self.cable_loss_db,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GainMeta":
        return cls(
            antenna_gain_db=d.get("antenna_gain_db", 0.0),
            frontend_gain_db=d.get("frontend_gain_db", 0.0),
            cable_loss_db=d.get("cable_loss_db", 0.0),
        )


@dataclass
class PsdSegment:
    sensor_id: str
    campaign_id: str
    center_freq: float
    bin_width: float
    t0_ms: int
    dwell_ms: float
    bins: np.ndarray            # linear mW per bin, ascending absolute frequency
    n_avg: int
    gain_meta: GainMeta = field(default_factory=GainMeta)

    @property
    def f_lo(self) -> float:
        return self.center_freq - self.bin_width * len(self.bins) / 2

    def bin_centers(self) -> np.ndarray:
        n = len(self.bins)
        return self.center_freq + (np.arange(n) - n // 2) * self.bin_width


@dataclass
class IqMessage:
    sensor_id: str
    campaign_id: str
    center_freq: float
    sample_rate: float
    t0_ms: int
    codec: str
    payload: bytes


# --------------------------------------------------------------------------
# PSD pipeline
# --------------------------------------------------------------------------

def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def window_coefficients(window: str, fft_size: int) -> np.ndarray:
    """Window scaled so sum(w^2) == fft_size (power-preserving)."""
    if window == "rectangular":
        return np.ones(fft_size)
    if window == "hann":
        w = np.hanning(fft_size)
        return w * math.sqrt(fft_size / np.sum(w**2))
    raise InvalidArgument(f"unknown window: {window!r}")


def psd_pipeline(
    block: SampleBlock,
    fft_size: int,
    n_avg: int,
    window: str = "rectangular",
    campaign_id: str = "",
    gain_meta: GainMeta | None = None,
) -> PsdSegment:
    if not _is_pow2(fft_size):
        raise InvalidArgument(f"fft_size must be a power of two, got {fft_size}")
    if n_avg < 1:
        raise InvalidArgument("n_avg must be >= 1")
    needed = fft_size * n_avg
    if len(block.samples) < needed:
        raise InvalidArgument(
            f"block has {len(block.samples)} samples, needs {needed}"
        )

    w = window_coefficients(window, fft_size)
    frames = np.asarray(block.samples[:needed]).reshape(n_avg, fft_size)
    spectra = np.fft.fft(frames * w, axis=1)
    bins = np.abs(spectra) ** 2
    bins = bins.sum(axis=0) / (n_avg * fft_size**2)
    bins = np.fft.fftshift(bins)

    return PsdSegment(
        sensor_id=block.sensor_id,
        campaign_id=campaign_id,
        center_freq=block.center_freq,
        bin_width=block.sample_rate / fft_size,
        t0_ms=block.t0_ms,
        dwell_ms=1000.0 * needed / block.sample_rate,
        bins=bins,
        n_avg=n_avg,
        gain_meta=gain_meta or GainMeta(),
    )


# --------------------------------------------------------------------------
# IQ pipeline
# --------------------------------------------------------------------------

IQ_CODECS = ("none", "lossless-zip", "int8")


def _pack_f32(samples: np.ndarray) -> bytes:
    out = np.empty(2 * len(samples), dtype="<f4")
    out[0::2] = samples.real.astype(np.float32)
    out[1::2] = samples.imag.astype(np.float32)
    return out.tobytes()


def iq_pipeline(block: SampleBlock, codec: str = "none",
                campaign_id: str = "") -> IqMessage:
    """Encode a block's samples. ``none`` and ``lossless-zip`` round-trip the
    float32 representation bit-exactly; ``int8`` quantizes (lossy, 4 B/sample
    plus a float32 scale header)."""
    if codec == "none":
        payload = _pack_f32(np.asarray(block.samples))
    elif codec == "lossless-zip":
        payload = zlib.compress(_pack_f32(np.asarray(block.samples)))
    elif codec == "int8":
        s = np.asarray(block.samples)
        scale = float(max(np.abs(s.real).max(), np.abs(s.imag).max(), 1e-30))
        q = np.empty(2 * len(s), dtype=np.int8)
        q[0::2] = np.clip(np.round(s.real / scale * 127), -127, 127)
        q[1::2] = np.clip(np.round(s.imag / scale * 127), -127, 127)
        payload = np.float32(scale).tobytes() + q.tobytes()
    else:
        raise InvalidArgument(f"unknown IQ codec: {codec!r}")
    return IqMessage(
        sensor_id=block.sensor_id,
        campaign_id=campaign_id,
        center_freq=block.center_freq,
        sample_rate=block.sample_rate,
        t0_ms=block.t0_ms,
        codec=codec,
        payload=payload,
    )


def iq_decode(msg: IqMessage) -> np.ndarray:
    """Inverse of :func:`iq_pipeline`; returns complex64 samples."""
    if msg.codec == "none":
        raw = msg.payload
    elif msg.codec == "lossless-zip":
        raw = zlib.decompress(msg.payload)
    elif msg.codec == "int8":
        scale = float(np.frombuffer(msg.payload[:4], dtype=np.float32)[0])
        q = np.frombuffer(msg.payload[4:], dtype=np.int8).astype(np.float32)
        return ((q[0::2] + 1j * q[1::2]) * (scale / 127)).astype(np.complex64)
    else:
        raise InvalidArgument(f"unknown IQ codec: {msg.codec!r}")
    flat = np.frombuffer(raw, dtype="<f4")
    return (flat[0::2] + 1j * flat[1::2]).astype(np.complex64)


def iq_rate_bps(sample_rate: float, codec: str = "none") -> float:
    """Wire rate of a continuous IQ stream (payload only)."""
    if codec in ("none", "lossless-zip"):
        return sample_rate * 64          # 2 x float32 per sample
    if codec == "int8":
        return sample_rate * 16          # 2 x int8 per sample
    raise InvalidArgument(f"unknown IQ codec: {codec!r}")


# --------------------------------------------------------------------------
# Scan scheduling
# --------------------------------------------------------------------------

def plan_hops(f_lo: float, f_hi: float, sample_rate: float) -> list[float]:
    """Window centers covering [f_lo, f_hi] spaced by sample_rate.

    ceil(span / sample_rate) hops; the last hop is pulled back so its
    window stays inside the band (it may overlap its neighbour).
    """
    if f_hi <= f_lo:
        raise InvalidArgument("band must have f_hi > f_lo")
    span = f_hi - f_lo
    n = max(1, math.ceil(span / sample_rate))
    if n == 1:
        return [(f_lo + f_hi) / 2]
    centers = [f_lo + sample_rate / 2 + i * sample_rate for i in range(n)]
    centers[-1] = min(centers[-1], f_hi - sample_rate / 2)
    return centers


@dataclass
class ScanState:
    hop_list: list[float]
    strategy: str = "sequential"            # or "bursty-weighted"
    visit_counts: list[int] = field(default_factory=list)
    burstiness: list[float] = field(default_factory=list)
    last_power: list[float | None] = field(default_factory=list)
    cursor: int = 0
    epsilon: float = SCHED_EPSILON

    def __post_init__(self):
        n = len(self.hop_list)
        if not self.visit_counts:
            self.visit_counts = [0] * n
        if not self.burstiness:
            self.burstiness = [0.0] * n
        if not self.last_power:
            self.last_power = [None] * n

    @classmethod
    def for_band(cls, f_lo: float, f_hi: float, sample_rate: float,
                 strategy: str = "sequential") -> "ScanState":
        return cls(hop_list=plan_hops(f_lo, f_hi, sample_rate), strategy=strategy)


def next_hop(state: ScanState) -> float:
    """Pick the next window center and bump its visit count.

    Sequential: round-robin in frequency order.  Bursty-weighted: the hop
    maximizing (burstiness + eps) / (visits + 1); the epsilon keeps cold
    hops live, and ties resolve to the lowest frequency.
    """
    if not state.hop_list:
        raise InvalidArgument("hop_list is empty")
    if state.strategy == "sequential":
        idx = state.cursor % len(state.hop_list)
        state.cursor += 1
    else:
        scores = [
            (state.burstiness[i] + state.epsilon) / (state.visit_counts[i] + 1)
            for i in range(len(state.hop_list))
        ]
        best = max(scores)
        idx = min(i for i, s in enumerate(scores) if s == best)
    state.visit_counts[idx] += 1
    return state.hop_list[idx]


def update_burstiness(state: ScanState, segment: PsdSegment) -> ScanState:
    """EWMA (alpha=0.3) of |delta in-band total power| for the segment's hop.

    The first visit just records the power; the score stays 0 until a
    second look produces a delta.
    """
    diffs = [abs(h - segment.center_freq) for h in state.hop_list]
    idx = diffs.index(min(diffs))
    power = float(np.sum(segment.bins))
    prev = state.last_power[idx]
    if prev is not None:
        delta = abs(power - prev)
        state.burstiness[idx] = (
            EWMA_ALPHA * delta + (1 - EWMA_ALPHA) * state.burstiness[idx]
        )
    state.last_power[idx] = power
    return state


# --------------------------------------------------------------------------
# Configuration and rate arithmetic
# --------------------------------------------------------------------------

@dataclass
class SensorConfig:
    pipeline: str = "psd"                   # "psd" | "iq"
    fft_size: int = 256
    n_avg: int = 16
    window: str = "rectangular"
    sample_rate: float = DEFAULT_SAMPLE_RATE
    band: tuple[float, float] = (PLATFORM_F_LO, PLATFORM_F_HI)
    dwell_ms: float = 125.0
    strategy: str = "sequential"
    iq_codec: str = "lossless-zip"

    def __post_init__(self):
        if self.pipeline not in ("psd", "iq"):
            raise InvalidArgument(f"unknown pipeline: {self.pipeline!r}")
        if not _is_pow2(self.fft_size) or not 256 <= self.fft_size <= 65536:
            raise InvalidArgument("fft_size must be a power of two in [256, 65536]")
        f_lo, f_hi = self.band
        if f_lo < PLATFORM_F_LO or f_hi > PLATFORM_F_HI or f_hi <= f_lo:
            raise InvalidArgument(
                f"band must sit within [{PLATFORM_F_LO:.0f}, {PLATFORM_F_HI:.0f}] Hz"
            )
        if self.dwell_ms <= 0:
            raise InvalidArgument("dwell_ms must be > 0")
        if self.strategy not in ("sequential", "bursty-weighted"):
            raise InvalidArgument(f"unknown strategy: {self.strategy!r}")

    def scan_state(self) -> ScanState:
        return ScanState.for_band(self.band[0], self.band[1],
                                  self.sample_rate, self.strategy)

    def to_dict(self) -> dict:
        return {
            "pipeline": self.pipeline,
            "fft_size": self.fft_size,
            "n_avg": self.n_avg,
            "window": self.window,
            "sample_rate_hz": self.sample_rate,
            "band_hz": list(self.band),
            "dwell_ms": self.dwell_ms,
            "strategy": self.strategy,
            "iq_codec": self.iq_codec,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensorConfig":
        kwargs = {}
        mapping = {
            "pipeline": "pipeline", "fft_size": "fft_size", "n_avg": "n_avg",
            "window": "window", "sample_rate_hz": "sample_rate",
            "dwell_ms": "dwell_ms", "strategy": "strategy", "iq_codec": "iq_codec",
        }
        for key, attr in mapping.items():
            if key in d:
                kwargs[attr] = d[key]
        if "band_hz" in d:
            kwargs["band"] = tuple(d["band_hz"])
        return cls(**kwargs)

    def with_updates(self, **kwargs) -> "SensorConfig":
        return replace(self, **kwargs)


def estimate_output_rate(config: SensorConfig) -> float:
    """PSD-pipeline wire rate in bits/s: one segment per dwell."""
    if config.pipeline != "psd":
        raise InvalidArgument("rate estimate applies to the PSD pipeline")
    bits = config.fft_size * BITS_PER_BIN + HEADER_BYTES * 8
    return bits / (config.dwell_ms / 1000.0)


def storage_bytes(rate_bps: float, n_sensors: int, days: float) -> float:
    """Fleet storage demand for a constant per-sensor rate."""
    return rate_bps * n_sensors * days * 86400 / 8


def sweep_time_s(f_lo: float, f_hi: float, sample_rate: float,
                 dwell_ms: float) -> float:
    return len(plan_hops(f_lo, f_hi, sample_rate)) * dwell_ms / 1000.0
