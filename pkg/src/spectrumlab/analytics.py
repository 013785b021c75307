"""Reference applications over the serving API: occupancy / white-space
detection and calibrated RSSI extraction.

Occupancy is plain energy detection: a bucket's duty cycle is the
fraction of finest-available max-aggregate sub-cells exceeding a
threshold.  Sub-cells with no data at all are absent from the store and
therefore excluded from the denominator (a sweeping sensor only sees
each hop intermittently).  The default threshold is the estimated noise
floor (median sub-cell power) plus 6 dB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .aggregation import bucket_start
from .errors import InvalidArgument
from .sensor import PsdSegment, plan_hops
from .units import mw_to_dbm

TV_BAND = (400e6, 800e6)
DEFAULT_T_RES_MS = 60_000
DEFAULT_F_RES_HZ = 1e6
THRESHOLD_MARGIN_DB = 6.0


@dataclass
class CalibrationProfile:
    antenna_gain_db: float = 0.0
    frontend_gain_db: float = 0.0
    cable_loss_db: float = 0.0

    @property
    def system_gain_db(self) -> float:
        return self.antenna_gain_db + self.frontend_gain_db - self.cable_loss_db


@dataclass
class OccupancyMap:
    sensor_id: str
    band: tuple[float, float]
    t_res_ms: int
    f_res_hz: float
    threshold_dbm: float
    # {(t_start_ms, f_start_hz): duty in [0, 1]}
    grid: dict[tuple[int, float], float] = field(default_factory=dict)

    def f_buckets(self) -> list[float]:
        return sorted({f for (_t, f) in self.grid})

    def t_buckets(self) -> list[int]:
        return sorted({t for (t, _f) in self.grid})

    def mean_duty_by_freq(self) -> dict[float, float]:
        sums: dict[float, list] = {}
        for (_t, f), duty in self.grid.items():
            slot = sums.setdefault(f, [0.0, 0])
            slot[0] += duty
            slot[1] += 1
        return {f: s / n for f, (s, n) in sums.items()}


def occupancy(
    query_fn,
    sensor_id: str,
    t0_ms: int,
    t1_ms: int,
    band: tuple[float, float] = TV_BAND,
    t_res_ms: int = DEFAULT_T_RES_MS,
    f_res_hz: float = DEFAULT_F_RES_HZ,
    threshold_dbm: float | None = None,
    fine_t_res_ms: int | None = None,
    fine_f_res_hz: float | None = None,
) -> OccupancyMap:
    """Duty-cycle grid from max-aggregates.

    ``query_fn(sensor_id, t0, t1, f0, f1, t_res_ms, f_res_hz, fn)`` must
    return cell dicts with t_start_ms / f_start_hz / dbm keys - both the
    in-process serving layer and the HTTP client satisfy it.  Max cells
    (not avg) are used so short bursts register.
    """
    fine_t = fine_t_res_ms or min(5_000, t_res_ms)
    fine_f = fine_f_res_hz or f_res_hz
    cells = query_fn(sensor_id, t0_ms, t1_ms, band[0], band[1],
                     fine_t, fine_f, "max")
    if threshold_dbm is None:
        if not cells:
            threshold_dbm = -200.0
        else:
            threshold_dbm = float(np.median([c["dbm"] for c in cells])
                                  ) + THRESHOLD_MARGIN_DB

    hits: dict[tuple[int, float], list] = {}
    for c in cells:
        key = (int(bucket_start(c["t_start_ms"], t_res_ms)),
               bucket_start(c["f_start_hz"], f_res_hz))
        slot = hits.setdefault(key, [0, 0])
        slot[1] += 1
        if c["dbm"] > threshold_dbm:
            slot[0] += 1

    grid = {key: above / total for key, (above, total) in hits.items()}
    return OccupancyMap(sensor_id=sensor_id, band=band, t_res_ms=t_res_ms,
                        f_res_hz=f_res_hz, threshold_dbm=threshold_dbm,
                        grid=grid)


def detect_whitespace(occ: OccupancyMap,
                      max_duty: float = 0.1) -> list[tuple[float, float]]:
    """Maximal contiguous frequency ranges whose time-averaged duty cycle
    stays at or below ``max_duty``.

    A bucket with no observations at all is never declared free: white
    space requires evidence of absence, not absence of evidence.
    """
    mean_duty = occ.mean_duty_by_freq()
    f0, f1 = occ.band
    free: list[float] = []
    f = bucket_start(f0, occ.f_res_hz)
    while f < f1:
        duty = mean_duty.get(f)
        if duty is not None and duty <= max_duty:
            free.append(f)
        f += occ.f_res_hz
    if not free:
        return []
    ranges = []
    start = prev = free[0]
    for f in free[1:]:
        if f - prev > occ.f_res_hz:
            ranges.append((start, prev + occ.f_res_hz))
            start = f
        prev = f
    ranges.append((start, prev + occ.f_res_hz))
    return ranges


def calibrated_rssi(segment: PsdSegment, band: tuple[float, float],
                    profile: CalibrationProfile) -> float:
    """In-band power in dBm after removing the receive-chain system gain."""
    f_lo, f_hi = band
    win_lo = segment.center_freq - segment.bin_width * len(segment.bins) / 2
    win_hi = segment.center_freq + segment.bin_width * len(segment.bins) / 2
    if f_lo < win_lo - segment.bin_width / 2 or f_hi > win_hi + segment.bin_width / 2:
        raise InvalidArgument(
            f"band [{f_lo}, {f_hi}] outside the segment window "
            f"[{win_lo}, {win_hi}]"
        )
    centers = segment.bin_centers()
    mask = (centers >= f_lo) & (centers < f_hi)
    total_mw = float(np.sum(segment.bins[mask]))
    return mw_to_dbm(total_mw) - profile.system_gain_db


def capture_fraction(
    packet_period_s: float,
    duration_s: float,
    dwell_ms: float,
    band: tuple[float, float],
    target_freq: float,
    sample_rate: float = 2.4e6,
    start_offset_s: float = 0.0,
) -> float:
    """Fraction of periodic packets a sweeping sensor catches.

    The sensor walks the band's hop plan round-robin; a packet is caught
    when the hop window tuned at its emission instant covers the target
    frequency.  For an unsynchronized transmitter this hovers around
    dwell_time / sweep_time.
    """
    hops = plan_hops(band[0], band[1], sample_rate)
    dwell_s = dwell_ms / 1000.0
    sweep_s = len(hops) * dwell_s
    caught = 0
    total = 0
    t = start_offset_s
    while t < duration_s:
        hop_idx = int((t % sweep_s) / dwell_s)
        c = hops[hop_idx]
        if c - sample_rate / 2 <= target_freq < c + sample_rate / 2:
            caught += 1
        total += 1
        t += packet_period_s
    return caught / total if total else 0.0


def render_occupancy_plot(occ: OccupancyMap, path: str) -> None:
    """Optional artifact output; requires matplotlib."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ts = occ.t_buckets()
    fs = occ.f_buckets()
    if not ts or not fs:
        raise InvalidArgument("occupancy map is empty")
    t_index = {t: i for i, t in enumerate(ts)}
    f_index = {f: j for j, f in enumerate(fs)}
    img = np.full((len(fs), len(ts)), np.nan)
    for (t, f), duty in occ.grid.items():
        img[f_index[f], t_index[t]] = duty
    fig, ax = plt.subplots(figsize=(10, 6))
    im = ax.imshow(img, aspect="auto", origin="lower", vmin=0, vmax=1,
                   extent=[0, len(ts), fs[0] / 1e6, (fs[-1] + occ.f_res_hz) / 1e6])
    ax.set_xlabel(f"time bucket ({occ.t_res_ms / 1000:.0f} s each)")
    ax.set_ylabel("frequency (MHz)")
    ax.set_title(f"occupancy, sensor {occ.sensor_id}, "
                 f"threshold {occ.threshold_dbm:.1f} dBm")
    fig.colorbar(im, ax=ax, label="duty cycle")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
