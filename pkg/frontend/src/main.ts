/** Console wiring: sensor map, campaign control, live waterfall. */

import { ApiClient, ApiError, ConsoleConfig, FanoutReport, SensorInfo } from "./api.js";
import { projectSensors } from "./map.js";
import { StreamSubscription } from "./stream.js";
import { validateCampaignForm } from "./validate.js";
import { heatColor, scaleBounds, WaterfallModel } from "./waterfall.js";

const $ = <T extends HTMLElement>(id: string): T =>
  document.getElementById(id) as T;

async function loadConfig(): Promise<ConsoleConfig> {
  try {
    const resp = await fetch("./config.json");
    if (resp.ok) return (await resp.json()) as ConsoleConfig;
  } catch {
    /* fall through to defaults */
  }
  return { apiBaseUrl: "http://127.0.0.1:8742" };
}

function showError(err: unknown): void {
  const box = $("error-box");
  box.textContent =
    err instanceof ApiError
      ? `API error ${err.status} (${err.code}): ${err.message}`
      : String(err);
  box.classList.add("visible");
  setTimeout(() => box.classList.remove("visible"), 6000);
}

// ---------------------------------------------------------------------------
// Sensors: table + map with the owner-only true-location toggle
// ---------------------------------------------------------------------------

let sensors: SensorInfo[] = [];

async function refreshSensors(api: ApiClient): Promise<void> {
  sensors = await api.listSensors();
  const tbody = $("sensor-rows");
  tbody.innerHTML = "";
  for (const s of sensors) {
    const tr = document.createElement("tr");
    tr.innerHTML =
      `<td>${s.sensor_id}</td>` +
      `<td>${s.location[0].toFixed(3)}, ${s.location[1].toFixed(3)}</td>` +
      `<td>${s.visibility}</td>` +
      `<td><span class="badge ${s.status}">${s.status}</span></td>`;
    tbody.appendChild(tr);
  }
  renderMap();
  const select = $("wf-sensor") as unknown as HTMLSelectElement;
  const targets = $("campaign-targets") as unknown as HTMLSelectElement;
  for (const el of [select, targets]) {
    const prev = Array.from(el.selectedOptions).map((o) => o.value);
    el.innerHTML = "";
    for (const s of sensors) {
      const option = document.createElement("option");
      option.value = s.sensor_id;
      option.textContent = s.sensor_id;
      option.selected = prev.includes(s.sensor_id);
      el.appendChild(option);
    }
  }
}

function renderMap(): void {
  const svg = $("sensor-map");
  const useTrue = ($("map-true-toggle") as unknown as HTMLInputElement).checked;
  const points = projectSensors(sensors, 420, 260, useTrue);
  svg.innerHTML = "";
  for (const p of points) {
    const c = document.createElementNS("http://www.w3.org/2000/svg", "circle");
    c.setAttribute("cx", String(p.x));
    c.setAttribute("cy", String(p.y));
    c.setAttribute("r", "7");
    c.setAttribute("class", `dot ${p.status} ${p.isTrue ? "true-loc" : ""}`);
    const title = document.createElementNS("http://www.w3.org/2000/svg", "title");
    title.textContent = `${p.sensorId}${p.isTrue ? " (true location)" : " (public)"}`;
    c.appendChild(title);
    svg.appendChild(c);
    const t = document.createElementNS("http://www.w3.org/2000/svg", "text");
    t.setAttribute("x", String(p.x + 10));
    t.setAttribute("y", String(p.y + 4));
    t.textContent = p.sensorId;
    svg.appendChild(t);
  }
}

// ---------------------------------------------------------------------------
// Campaigns
// ---------------------------------------------------------------------------

const reports = new Map<string, FanoutReport>();

async function refreshCampaigns(api: ApiClient): Promise<void> {
  const campaigns = await api.listCampaigns();
  const tbody = $("campaign-rows");
  tbody.innerHTML = "";
  for (const c of campaigns) {
    const tr = document.createElement("tr");
    const report = reports.get(c.campaign_id);
    const badges = c.target_sensors
      .map((sid) => {
        const cls = report
          ? report.acked.includes(sid)
            ? "acked"
            : "unreachable"
          : "unknown";
        return `<span class="badge ${cls}" data-sensor="${sid}">${sid}</span>`;
      })
      .join(" ");
    const stop =
      c.state === "running"
        ? `<button data-stop="${c.campaign_id}">stop</button>`
        : "";
    tr.innerHTML =
      `<td>${c.campaign_id}</td>` +
      `<td>${(c.band_hz[0] / 1e6).toFixed(1)}-${(c.band_hz[1] / 1e6).toFixed(1)} MHz</td>` +
      `<td>${c.pipeline}/${c.strategy}</td>` +
      `<td class="state-${c.state}">${c.state}</td>` +
      `<td>${badges}</td><td>${stop}</td>`;
    tbody.appendChild(tr);
  }
}

function wireCampaignForm(api: ApiClient): void {
  $("campaign-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const targets = Array.from(
      ($("campaign-targets") as unknown as HTMLSelectElement).selectedOptions,
    ).map((o) => o.value);
    const form = {
      fLoMhz: Number(($("band-lo") as unknown as HTMLInputElement).value),
      fHiMhz: Number(($("band-hi") as unknown as HTMLInputElement).value),
      sampleRateHz: Number(($("sample-rate") as unknown as HTMLInputElement).value) * 1e6,
      strategy: ($("strategy") as unknown as HTMLSelectElement).value,
      pipeline: ($("pipeline") as unknown as HTMLSelectElement).value,
      targets,
    };
    const check = validateCampaignForm(form);
    const problems = $("campaign-problems");
    problems.textContent = check.errors.join("; ");
    if (!check.ok) return; // client-side rejection: nothing leaves the page
    void api
      .createCampaign({
        band_hz: [form.fLoMhz * 1e6, form.fHiMhz * 1e6],
        strategy: form.strategy,
        sample_rate_hz: form.sampleRateHz,
        pipeline: form.pipeline,
        targets,
      })
      .then(({ campaign, report }) => {
        reports.set(campaign.campaign_id, report);
        return refreshCampaigns(api);
      })
      .catch(showError);
  });

  $("campaign-rows").addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const id = target.getAttribute("data-stop");
    if (id) {
      void api.stopCampaign(id).then(() => refreshCampaigns(api)).catch(showError);
    }
  });
}

// ---------------------------------------------------------------------------
// Waterfall
// ---------------------------------------------------------------------------

let subscription: StreamSubscription | null = null;
let model: WaterfallModel | null = null;

function drawWaterfall(): void {
  if (!model || !model.ready) return;
  const canvas = $("waterfall") as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const [lo, hi] = scaleBounds(model);
  const rows = model.rows;
  const cellW = canvas.width / model.nBuckets;
  const cellH = Math.max(1, Math.floor(canvas.height / Math.max(rows.length, 1)));
  ctx.fillStyle = "rgb(16,16,24)";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  for (let r = 0; r < rows.length; r++) {
    const y = canvas.height - (rows.length - r) * cellH;
    for (let b = 0; b < model.nBuckets; b++) {
      const [red, green, blue] = heatColor(rows[r].values[b], lo, hi);
      ctx.fillStyle = `rgb(${red},${green},${blue})`;
      ctx.fillRect(b * cellW, y, Math.ceil(cellW), cellH);
    }
  }
  $("wf-meta").textContent =
    `${model.nBuckets} buckets x ${model.bucketWidthHz / 1e3} kHz, ` +
    `${rows.length} rows, scale [${lo.toFixed(1)}, ${hi.toFixed(1)}] dBm`;
}

function wireWaterfall(api: ApiClient): void {
  $("wf-start").addEventListener("click", () => {
    subscription?.stop();
    const sensorId = ($("wf-sensor") as unknown as HTMLSelectElement).value;
    if (!sensorId) return;
    model = new WaterfallModel(sensorId, "avg");
    const indicator = $("wf-state");
    subscription = new StreamSubscription(
      api,
      api.streamUrl([sensorId]),
      (record) => {
        model?.appendWindow(record);
        drawWaterfall();
      },
      (state) => {
        indicator.textContent = state;
        indicator.className = `stream-state ${state}`;
      },
    );
    subscription.start();
  });
  // Blank rows keep advancing with the wall clock when the band goes quiet.
  setInterval(() => {
    if (model && model.advanceTo(Date.now()) > 0) drawWaterfall();
  }, 1000);
}

// ---------------------------------------------------------------------------

async function init(): Promise<void> {
  const config = await loadConfig();
  const api = new ApiClient(config);
  $("api-url").textContent = config.apiBaseUrl;

  $("register-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    void api
      .registerSensor({
        lat: Number(($("reg-lat") as unknown as HTMLInputElement).value),
        lon: Number(($("reg-lon") as unknown as HTMLInputElement).value),
        antenna_desc: ($("reg-antenna") as unknown as HTMLInputElement).value,
        visibility: ($("reg-visibility") as unknown as HTMLSelectElement).value,
      })
      .then(() => refreshSensors(api))
      .catch(showError);
  });
  $("map-true-toggle").addEventListener("change", () => renderMap());

  wireCampaignForm(api);
  wireWaterfall(api);

  await refreshSensors(api).catch(showError);
  await refreshCampaigns(api).catch(showError);
  setInterval(() => void refreshSensors(api).catch(() => {}), 10_000);
  setInterval(() => void refreshCampaigns(api).catch(() => {}), 5_000);
}

void init();
