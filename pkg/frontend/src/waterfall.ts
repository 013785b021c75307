/**
 * Rolling waterfall model: one row per speed window, newest at the end.
 *
 * Rows only ever append in window-time order; a missing window becomes a
 * blank row (never interpolated) and the row count is capped so memory
 * stays bounded no matter how long the console is left open.
 */

import type { WindowRecord } from "./api.js";

export const MAX_ROWS = 720; // one hour of 5 s windows

export interface WaterfallRow {
  tStartMs: number;
  /** dBm per frequency bucket; null where no data. */
  values: (number | null)[];
  blank: boolean;
}

export class WaterfallModel {
  rows: WaterfallRow[] = [];
  fStartHz = NaN;
  bucketWidthHz = NaN;
  nBuckets = 0;
  windowMs = NaN;
  private lastT = NaN;

  constructor(
    public sensorId: string,
    public fn: "avg" | "max" = "avg",
    public maxRows: number = MAX_ROWS,
  ) {}

  get ready(): boolean {
    return this.nBuckets > 0;
  }

  /** Establish the frequency axis from the first record that has cells. */
  private initAxis(record: WindowRecord): boolean {
    const cells = record.cells.filter(
      (c) => c.sensor_id === this.sensorId && c.fn === this.fn,
    );
    if (cells.length === 0) return false;
    const starts = cells.map((c) => c.f_start_hz);
    this.bucketWidthHz = cells[0].f_width_hz;
    this.fStartHz = Math.min(...starts);
    const fEnd = Math.max(...starts) + this.bucketWidthHz;
    this.nBuckets = Math.round((fEnd - this.fStartHz) / this.bucketWidthHz);
    this.windowMs = record.t_width_ms;
    return true;
  }

  private blankValues(): (number | null)[] {
    return new Array(this.nBuckets).fill(null);
  }

  private push(row: WaterfallRow): void {
    this.rows.push(row);
    if (this.rows.length > this.maxRows) {
      this.rows.splice(0, this.rows.length - this.maxRows);
    }
  }

  /** Append one stream record; fills any gap with blank rows first. */
  appendWindow(record: WindowRecord): void {
    if (!this.ready && !this.initAxis(record)) return;
    if (!Number.isNaN(this.lastT) && record.t_start_ms <= this.lastT) {
      return; // late or duplicate window: rows append in time order only
    }
    if (!Number.isNaN(this.lastT)) {
      let expected = this.lastT + this.windowMs;
      let guard = this.maxRows;
      while (expected < record.t_start_ms && guard-- > 0) {
        this.push({ tStartMs: expected, values: this.blankValues(), blank: true });
        expected += this.windowMs;
      }
    }
    const values = this.blankValues();
    let any = false;
    for (const c of record.cells) {
      if (c.sensor_id !== this.sensorId || c.fn !== this.fn) continue;
      const idx = Math.round((c.f_start_hz - this.fStartHz) / this.bucketWidthHz);
      if (idx >= 0 && idx < this.nBuckets) {
        values[idx] = c.dbm;
        any = true;
      }
    }
    this.push({ tStartMs: record.t_start_ms, values, blank: !any });
    this.lastT = record.t_start_ms;
  }

  /** With no data flowing, blank rows still advance with the wall clock. */
  advanceTo(nowMs: number): number {
    if (!this.ready || Number.isNaN(this.lastT)) return 0;
    let added = 0;
    // A window is definitely missing once its close + a grace period passed.
    while (nowMs - (this.lastT + this.windowMs) > 2 * this.windowMs) {
      this.lastT += this.windowMs;
      this.push({ tStartMs: this.lastT, values: this.blankValues(), blank: true });
      added += 1;
    }
    return added;
  }

  bucketFreqHz(idx: number): number {
    return this.fStartHz + idx * this.bucketWidthHz;
  }
}

/** Map dBm into an RGB heat color between the scale bounds. */
export function heatColor(
  dbm: number | null,
  minDbm: number,
  maxDbm: number,
): [number, number, number] {
  if (dbm === null || Number.isNaN(dbm)) return [16, 16, 24];
  const t = Math.min(1, Math.max(0, (dbm - minDbm) / (maxDbm - minDbm)));
  // dark blue -> cyan -> yellow -> red
  if (t < 1 / 3) {
    const u = t * 3;
    return [0, Math.round(120 * u), Math.round(90 + 140 * u)];
  }
  if (t < 2 / 3) {
    const u = (t - 1 / 3) * 3;
    return [Math.round(255 * u), Math.round(120 + 120 * u), Math.round(230 * (1 - u))];
  }
  const u = (t - 2 / 3) * 3;
  return [255, Math.round(240 * (1 - u)), 0];
}

/** Autoscale color bounds from the data present in the model. */
export function scaleBounds(model: WaterfallModel): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const row of model.rows) {
    for (const v of row.values) {
      if (v === null) continue;
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (!Number.isFinite(lo)) return [-110, -40];
  if (hi - lo < 10) hi = lo + 10;
  return [lo, hi];
}
