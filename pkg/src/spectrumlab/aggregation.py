"""Time/frequency bucket math shared by the batch and speed layers.

Buckets are half-open, aligned to absolute zero: a value v falls in
[floor(v / width) * width, ...+width).  Bin-to-bucket assignment uses the
bin center frequency; boundary values go to the lower bucket by the
half-open convention.  All aggregation happens in linear mW - avg cells
carry their contributing count so coarser levels merge exactly
(count-weighted mean; max of maxima).

Both layers accumulate through the same code in the same order (per
sensor: seq ascending, bins ascending), so sealed windows agree
bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .wire import Envelope

# accumulator value: [weighted sum, count, max]
Key = tuple[str, int, float]            # (sensor_id, t_start_ms, f_start_hz)
Acc = dict[Key, list]


def bucket_start(value: float, width: float) -> float:
    return math.floor(value / width) * width


def accumulate_envelope(acc: Acc, env: Envelope, t_width_ms: int,
                        f_width_hz: float) -> None:
    """Fold one PSD envelope's bins into the accumulator for one level.

    Window-edge bins are guarded: the post-shift bin 0 of an even-length
    segment is the Nyquist bin, where +fs/2 and -fs/2 are indistinguishable,
    and the few bins around the +/-fs/2 seam collect mainlobe bleed from
    content at the opposite edge (the DFT is circular).  With hop windows
    tiled at fs spacing that content belongs to the neighbouring hop, so a
    proportional guard (n/128 bins per edge, at least the Nyquist bin) is
    skipped.  Segments keep all their bins; only aggregation ignores guards.
    """
    if env.kind != "psd":
        return
    n = len(env.bins)
    t_bucket = int(bucket_start(env.t0_ms, t_width_ms))
    half = n // 2
    if n % 2 == 0:
        guard = n // 128
        lo, hi = guard + 1, n - guard
    else:
        lo, hi = 0, n
    for k in range(lo, hi):
        f_center = env.center_freq + (k - half) * env.bin_width
        f_bucket = bucket_start(f_center, f_width_hz)
        key = (env.sensor_id, t_bucket, f_bucket)
        v = env.bins[k]
        slot = acc.get(key)
        if slot is None:
            acc[key] = [v, 1, v]
        else:
            slot[0] += v
            slot[1] += 1
            if v > slot[2]:
                slot[2] = v


@dataclass
class Cell:
    sensor_id: str
    t_start_ms: int
    t_width_ms: int
    f_start_hz: float
    f_width_hz: float
    fn: str                     # "avg" | "max"
    value_mw: float
    count: int
    layer: str                  # "batch" | "speed"

    def to_dict(self) -> dict:
        return {
            "sensor_id": self.sensor_id,
            "t_start_ms": self.t_start_ms,
            "t_width_ms": self.t_width_ms,
            "f_start_hz": self.f_start_hz,
            "f_width_hz": self.f_width_hz,
            "fn": self.fn,
            "value_mw": self.value_mw,
            "count": self.count,
            "layer": self.layer,
        }


def cells_from_acc(acc: Acc, t_width_ms: int, f_width_hz: float, fn: str,
                   layer: str) -> list[Cell]:
    out = []
    for (sensor_id, t_start, f_start), (total, count, peak) in acc.items():
        value = total / count if fn == "avg" else peak
        out.append(Cell(sensor_id, t_start, t_width_ms, f_start, f_width_hz,
                        fn, value, count, layer))
    out.sort(key=lambda c: (c.sensor_id, c.t_start_ms, c.f_start_hz))
    return out


def coarsen(cells: list[Cell], t_width_ms: int, f_width_hz: float) -> list[Cell]:
    """Merge cells up to a coarser level.

    avg: count-weighted mean of children; max: max of children.  Target
    widths must be integer multiples of the source widths.
    """
    merged: dict[tuple[str, str, int, float], list] = {}
    meta: dict[tuple[str, str, int, float], Cell] = {}
    for c in cells:
        if t_width_ms % c.t_width_ms or f_width_hz % c.f_width_hz:
            raise ValueError(
                f"cannot coarsen ({c.t_width_ms}, {c.f_width_hz}) "
                f"to ({t_width_ms}, {f_width_hz})"
            )
        key = (c.sensor_id, c.fn,
               int(bucket_start(c.t_start_ms, t_width_ms)),
               bucket_start(c.f_start_hz, f_width_hz))
        slot = merged.get(key)
        if slot is None:
            merged[key] = [c.value_mw * c.count, c.count, c.value_mw]
            meta[key] = c
        else:
            slot[0] += c.value_mw * c.count
            slot[1] += c.count
            if c.value_mw > slot[2]:
                slot[2] = c.value_mw
    out = []
    for key, (total, count, peak) in merged.items():
        sensor_id, fn, t_start, f_start = key
        value = total / count if fn == "avg" else peak
        out.append(Cell(sensor_id, t_start, t_width_ms, f_start, f_width_hz,
                        fn, value, count, meta[key].layer))
    out.sort(key=lambda c: (c.sensor_id, c.t_start_ms, c.f_start_hz))
    return out
