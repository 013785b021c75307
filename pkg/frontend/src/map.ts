/** Project sensor locations onto a fixed-size panel (equirectangular,
 * auto-fit with padding). The map shows public locations only; the
 * owner toggle re-fetches with the token and swaps in true locations. */

import type { SensorInfo } from "./api.js";

export interface MapPoint {
  sensorId: string;
  x: number;
  y: number;
  status: string;
  isTrue: boolean;
}

export function projectSensors(
  sensors: SensorInfo[],
  width: number,
  height: number,
  useTrueWhereAvailable = false,
  pad = 24,
): MapPoint[] {
  if (sensors.length === 0) return [];
  const coords = sensors.map((s) => {
    const loc =
      useTrueWhereAvailable && s.true_location ? s.true_location : s.location;
    return { s, lat: loc[0], lon: loc[1], isTrue: Boolean(useTrueWhereAvailable && s.true_location) };
  });
  const lats = coords.map((c) => c.lat);
  const lons = coords.map((c) => c.lon);
  const latSpan = Math.max(Math.max(...lats) - Math.min(...lats), 1e-3);
  const lonSpan = Math.max(Math.max(...lons) - Math.min(...lons), 1e-3);
  const lat0 = Math.min(...lats);
  const lon0 = Math.min(...lons);
  return coords.map(({ s, lat, lon, isTrue }) => ({
    sensorId: s.sensor_id,
    x: pad + ((lon - lon0) / lonSpan) * (width - 2 * pad),
    y: height - pad - ((lat - lat0) / latSpan) * (height - 2 * pad),
    status: s.status,
    isTrue,
  }));
}
