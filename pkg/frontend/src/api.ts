/**
 * Typed client for the platform HTTP API.
 *
 * Every request the console makes goes through this module, so the
 * contract test can assert that only documented endpoints are touched.
 * Errors are surfaced with their HTTP status and the server's message,
 * verbatim.
 */

export interface ConsoleConfig {
  apiBaseUrl: string;
  token?: string;
}

export interface SensorInfo {
  sensor_id: string;
  location: [number, number];
  true_location?: [number, number];
  owner_id?: string;
  antenna_desc: string;
  visibility: "public" | "restricted" | "private";
  status: "online" | "offline";
  registered_at: number;
}

export interface CampaignInfo {
  campaign_id: string;
  band_hz: [number, number];
  strategy: string;
  sample_rate_hz: number;
  pipeline: string;
  target_sensors: string[];
  state: "created" | "running" | "stopped";
}

export interface FanoutReport {
  campaign_id: string;
  acked: string[];
  unreachable: string[];
}

export interface StreamCell {
  sensor_id: string;
  f_start_hz: number;
  f_width_hz: number;
  fn: "avg" | "max";
  dbm: number;
  count: number;
}

export interface WindowRecord {
  t_start_ms: number;
  t_width_ms: number;
  cells: StreamCell[];
}

export interface AggregatedGrid {
  sensor_id: string;
  applied_t_res_ms: number;
  applied_f_res_hz: number;
  fn: string;
  cells: {
    t_start_ms: number;
    t_width_ms: number;
    f_start_hz: number;
    f_width_hz: number;
    dbm: number;
    count: number;
    layer: "batch" | "speed";
  }[];
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(`${status} ${code}: ${message}`);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private config: ConsoleConfig,
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private headers(json = false): Record<string, string> {
    const h: Record<string, string> = {};
    if (this.config.token) h["Authorization"] = `Bearer ${this.config.token}`;
    if (json) h["Content-Type"] = "application/json";
    return h;
  }

  private async parse<T>(resp: Response): Promise<T> {
    const body = await resp.json();
    if (!resp.ok) {
      throw new ApiError(
        resp.status,
        body.error ?? "error",
        body.message ?? resp.statusText,
      );
    }
    return body as T;
  }

  async listSensors(): Promise<SensorInfo[]> {
    const resp = await this.fetchFn(`${this.config.apiBaseUrl}/api/v1/sensors`, {
      headers: this.headers(),
    });
    return (await this.parse<{ sensors: SensorInfo[] }>(resp)).sensors;
  }

  async registerSensor(body: {
    lat: number;
    lon: number;
    antenna_desc?: string;
    visibility?: string;
  }): Promise<SensorInfo> {
    const resp = await this.fetchFn(`${this.config.apiBaseUrl}/api/v1/sensors`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
    return (await this.parse<{ sensor: SensorInfo }>(resp)).sensor;
  }

  async listCampaigns(): Promise<CampaignInfo[]> {
    const resp = await this.fetchFn(
      `${this.config.apiBaseUrl}/api/v1/campaigns`,
      { headers: this.headers() },
    );
    return (await this.parse<{ campaigns: CampaignInfo[] }>(resp)).campaigns;
  }

  async createCampaign(body: {
    band_hz: [number, number];
    strategy?: string;
    sample_rate_hz?: number;
    pipeline?: string;
    targets: string[];
  }): Promise<{ campaign: CampaignInfo; report: FanoutReport }> {
    const resp = await this.fetchFn(
      `${this.config.apiBaseUrl}/api/v1/campaigns`,
      {
        method: "POST",
        headers: this.headers(true),
        body: JSON.stringify(body),
      },
    );
    return this.parse(resp);
  }

  async stopCampaign(campaignId: string): Promise<CampaignInfo> {
    const resp = await this.fetchFn(
      `${this.config.apiBaseUrl}/api/v1/campaigns/${campaignId}/stop`,
      { method: "POST", headers: this.headers() },
    );
    return (await this.parse<{ campaign: CampaignInfo }>(resp)).campaign;
  }

  async queryAggregated(params: {
    sensor: string;
    t0: number;
    t1: number;
    f0: number;
    f1: number;
    tRes?: number;
    fRes?: number;
    fn?: string;
  }): Promise<AggregatedGrid> {
    const q = new URLSearchParams({
      sensor: params.sensor,
      t0: String(params.t0),
      t1: String(params.t1),
      f0: String(params.f0),
      f1: String(params.f1),
    });
    if (params.tRes !== undefined) q.set("tRes", String(params.tRes));
    if (params.fRes !== undefined) q.set("fRes", String(params.fRes));
    if (params.fn) q.set("fn", params.fn);
    const resp = await this.fetchFn(
      `${this.config.apiBaseUrl}/api/v1/spectrum/aggregated?${q}`,
      { headers: this.headers() },
    );
    return this.parse(resp);
  }

  streamUrl(sensors: string[], f0?: number, f1?: number): string {
    const q = new URLSearchParams({ sensors: sensors.join(",") });
    if (f0 !== undefined) q.set("f0", String(f0));
    if (f1 !== undefined) q.set("f1", String(f1));
    return `${this.config.apiBaseUrl}/api/v1/spectrum/stream?${q}`;
  }

  /**
   * Open the streaming endpoint and invoke onRecord per ndjson line.
   * Resolves when the server closes the stream; rejects on transport
   * errors. Keepalive lines are filtered out here.
   */
  async readStream(
    url: string,
    onRecord: (record: WindowRecord) => void,
    signal?: AbortSignal,
  ): Promise<void> {
    const resp = await this.fetchFn(url, { headers: this.headers(), signal });
    if (!resp.ok || !resp.body) {
      const body = await resp.json().catch(() => ({}) as any);
      throw new ApiError(
        resp.status,
        (body as any).error ?? "stream-error",
        (body as any).message ?? resp.statusText,
      );
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let idx;
      while ((idx = buffer.indexOf("\n")) >= 0) {
        const line = buffer.slice(0, idx).trim();
        buffer = buffer.slice(idx + 1);
        if (!line) continue;
        const parsed = JSON.parse(line);
        if (parsed.keepalive) continue;
        onRecord(parsed as WindowRecord);
      }
    }
  }
}
