"""Synthetic RF environment standing in for the radio front-end.

A :class:`Scene` is a set of flat-spectrum rectangular emitters over a
complex-Gaussian noise floor.  ``synthesize_block`` produces baseband IQ
for any tuned window, and ``expected_psd`` is the matching analytic
oracle: noise density plus power/bandwidth of every emitter covering a
frequency while ON.

Determinism contract: the same (scene, sensor_id, center_freq, t0)
always yields bit-identical samples, regardless of call order.  Streams
are keyed through a counter-based generator (Philox) so each (query,
emitter) pair owns an independent substream; in particular the noise
stream does not depend on the emitter list at all.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument


# --------------------------------------------------------------------------
# Activity (duty-cycle) models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AlwaysOn:
    kind: str = "always-on"


@dataclass(frozen=True)
class Periodic:
    """ON for the first ``on_ms`` of every ``period_ms`` window, phase 0."""

    period_ms: float
    on_ms: float
    kind: str = "periodic"

    def __post_init__(self):
        if self.period_ms <= 0 or self.on_ms <= 0:
            raise InvalidArgument("periodic activity needs positive period and on time")
        if self.on_ms > self.period_ms:
            raise InvalidArgument("on_ms cannot exceed period_ms")


@dataclass(frozen=True)
class Bursty:
    """Alternating exponential ON/OFF holding times, discretized to 1 ms.

    The process starts ON at t=0 and is fully determined by ``seed``.
    """

    mean_on_ms: float
    mean_off_ms: float
    seed: int
    kind: str = "bursty"

    def __post_init__(self):
        if self.mean_on_ms <= 0 or self.mean_off_ms <= 0:
            raise InvalidArgument("bursty activity needs positive mean holding times")


Activity = AlwaysOn | Periodic | Bursty

# Lazily extended switch-time timelines for bursty activities, keyed by the
# (hashable, frozen) activity instance.  Extension is guarded by a lock so
# concurrent sensors can share one scene.
_burst_cache: dict[Bursty, list[float]] = {}
_burst_lock = threading.Lock()


def _bursty_switches(act: Bursty, t_ms: float) -> list[float]:
    with _burst_lock:
        switches = _burst_cache.setdefault(act, [0.0])
        if switches[-1] <= t_ms:
            rng = np.random.default_rng(act.seed)
            # Replay already-consumed draws, then extend past t.
            switches = [0.0]
            state_on = True
            while switches[-1] <= t_ms:
                mean = act.mean_on_ms if state_on else act.mean_off_ms
                hold = max(1.0, round(float(rng.exponential(mean))))
                switches.append(switches[-1] + hold)
                state_on = not state_on
            _burst_cache[act] = switches
        return _burst_cache[act]


def is_on(activity: Activity, t_ms: float) -> bool:
    """Evaluate an activity model at one instant (ms since epoch)."""
    if isinstance(activity, AlwaysOn):
        return True
    if isinstance(activity, Periodic):
        return (t_ms % activity.period_ms) < activity.on_ms
    if isinstance(activity, Bursty):
        if t_ms < 0:
            return True
        switches = _bursty_switches(activity, t_ms)
        # Number of switch boundaries at or before t decides the state;
        # segment 0 (after switches[0]=0) is ON.
        idx = int(np.searchsorted(np.asarray(switches), t_ms, side="right")) - 1
        return idx % 2 == 0
    raise InvalidArgument(f"unknown activity model: {activity!r}")


# --------------------------------------------------------------------------
# Scene model
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Emitter:
    """Flat-spectrum rectangle: ``power`` mW spread evenly over ``bandwidth``."""

    center_freq: float          # Hz
    bandwidth: float            # Hz
    power: float                # total in-band power, linear mW
    activity: Activity = field(default_factory=AlwaysOn)

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise InvalidArgument("emitter bandwidth must be > 0")
        if self.power < 0:
            raise InvalidArgument("emitter power must be >= 0")

    @property
    def f_lo(self) -> float:
        return self.center_freq - self.bandwidth / 2

    @property
    def f_hi(self) -> float:
        return self.center_freq + self.bandwidth / 2


@dataclass(frozen=True)
class Scene:
    emitters: tuple[Emitter, ...]
    noise_density: float        # mW per Hz
    rng_seed: int = 0

    def __post_init__(self):
        if self.noise_density <= 0:
            raise InvalidArgument("noise_density must be > 0")
        object.__setattr__(self, "emitters", tuple(self.emitters))


@dataclass
class SampleBlock:
    """Complex baseband capture with its tuning metadata."""

    sensor_id: str
    center_freq: float
    sample_rate: float
    t0_ms: int
    samples: np.ndarray         # complex128


# --------------------------------------------------------------------------
# Synthesis
# --------------------------------------------------------------------------

def _philox(*parts) -> np.random.Generator:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    key = np.frombuffer(digest[:16], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def synthesize_block(
    scene: Scene,
    sensor_id: str,
    center_freq: float,
    sample_rate: float,
    n_samples: int,
    t0_ms: int,
) -> SampleBlock:
    """Generate one baseband IQ block for the window [fc - fs/2, fc + fs/2].

    Noise carries total power ``noise_density * sample_rate``; each emitter
    intersecting the window and ON at ``t0_ms`` contributes the intersecting
    fraction of its power as band-limited flat-spectrum noise shifted to
    baseband.  The activity model is sampled once at the block start, so a
    block is assumed short relative to ON/OFF timescales.
    """
    if n_samples <= 0:
        raise InvalidArgument("n_samples must be > 0")
    if sample_rate <= 0:
        raise InvalidArgument("sample_rate must be > 0")

    rng = _philox(scene.rng_seed, sensor_id, f"{center_freq:.3f}", t0_ms, "noise")
    sigma = math.sqrt(scene.noise_density * sample_rate / 2.0)
    x = (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)) * sigma

    win_lo = center_freq - sample_rate / 2
    win_hi = center_freq + sample_rate / 2
    bin_freqs = np.fft.fftfreq(n_samples, d=1.0 / sample_rate)  # baseband bin centers

    for i, em in enumerate(scene.emitters):
        lo = max(em.f_lo, win_lo)
        hi = min(em.f_hi, win_hi)
        if hi <= lo or em.power == 0 or not is_on(em.activity, t0_ms):
            continue
        p_in = em.power * (hi - lo) / em.bandwidth
        rel_lo, rel_hi = lo - center_freq, hi - center_freq
        kept = np.nonzero((bin_freqs >= rel_lo) & (bin_freqs < rel_hi))[0]
        if kept.size == 0:
            # Narrower than a bin: park all power on the nearest bin (CW-like).
            kept = np.array([np.argmin(np.abs(bin_freqs - (rel_lo + rel_hi) / 2))])
        erng = _philox(scene.rng_seed, sensor_id, f"{center_freq:.3f}", t0_ms, "emitter", i)
        # Draw spectrum directly on the kept bins; with numpy's ifft (1/N)
        # normalization, per-bin variance P*N^2/len(kept) gives E|x|^2 = P.
        amp = math.sqrt(p_in * n_samples**2 / kept.size / 2.0)
        spectrum = np.zeros(n_samples, dtype=complex)
        spectrum[kept] = (erng.standard_normal(kept.size)
                          + 1j * erng.standard_normal(kept.size)) * amp
        x += np.fft.ifft(spectrum)

    return SampleBlock(
        sensor_id=sensor_id,
        center_freq=center_freq,
        sample_rate=sample_rate,
        t0_ms=int(t0_ms),
        samples=x,
    )


def expected_psd(scene: Scene, freq: float, t_ms: float) -> float:
    """Analytic PSD oracle in mW/Hz: noise density plus each ON emitter
    covering ``freq`` (half-open band [f_lo, f_hi)) at power/bandwidth."""
    density = scene.noise_density
    for em in scene.emitters:
        if em.f_lo <= freq < em.f_hi and is_on(em.activity, t_ms):
            density += em.power / em.bandwidth
    return density


# --------------------------------------------------------------------------
# Scene description files
# --------------------------------------------------------------------------
#
# JSON schema (all keys required unless noted):
# {
#   "noise_density_mw_per_hz": 1e-12,
#   "rng_seed": 42,                      // optional, default 0
#   "emitters": [
#     {"center_freq_hz": 602e6, "bandwidth_hz": 8e6, "power_mw": 1e-6,
#      "activity": {"kind": "always-on"}},                          // default
#     {..., "activity": {"kind": "periodic", "period_ms": 100, "on_ms": 25}},
#     {..., "activity": {"kind": "bursty", "mean_on_ms": 40,
#                        "mean_off_ms": 160, "seed": 7}}
#   ]
# }

def _activity_from_dict(d: dict | None) -> Activity:
    if d is None:
        return AlwaysOn()
    kind = d.get("kind", "always-on")
    if kind == "always-on":
        return AlwaysOn()
    if kind == "periodic":
        return Periodic(period_ms=d["period_ms"], on_ms=d["on_ms"])
    if kind == "bursty":
        return Bursty(mean_on_ms=d["mean_on_ms"], mean_off_ms=d["mean_off_ms"],
                      seed=d["seed"])
    raise InvalidArgument(f"unknown activity kind: {kind!r}")


def _activity_to_dict(a: Activity) -> dict:
    if isinstance(a, AlwaysOn):
        return {"kind": "always-on"}
    if isinstance(a, Periodic):
        return {"kind": "periodic", "period_ms": a.period_ms, "on_ms": a.on_ms}
    if isinstance(a, Bursty):
        return {"kind": "bursty", "mean_on_ms": a.mean_on_ms,
                "mean_off_ms": a.mean_off_ms, "seed": a.seed}
    raise InvalidArgument(f"unknown activity model: {a!r}")


def scene_from_dict(d: dict) -> Scene:
    emitters = tuple(
        Emitter(
            center_freq=e["center_freq_hz"],
            bandwidth=e["bandwidth_hz"],
            power=e["power_mw"],
            activity=_activity_from_dict(e.get("activity")),
        )
        for e in d.get("emitters", [])
    )
    return Scene(
        emitters=emitters,
        noise_density=d["noise_density_mw_per_hz"],
        rng_seed=int(d.get("rng_seed", 0)),
    )


def scene_to_dict(scene: Scene) -> dict:
    return {
        "noise_density_mw_per_hz": scene.noise_density,
        "rng_seed": scene.rng_seed,
        "emitters": [
            {
                "center_freq_hz": e.center_freq,
                "bandwidth_hz": e.bandwidth,
                "power_mw": e.power,
                "activity": _activity_to_dict(e.activity),
            }
            for e in scene.emitters
        ],
    }


def load_scene(path: str | Path) -> Scene:
    return scene_from_dict(json.loads(Path(path).read_text()))


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2))
