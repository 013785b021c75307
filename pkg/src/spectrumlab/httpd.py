"""HTTP face of the platform.

Endpoints (all JSON; times ms UTC, frequencies Hz, powers dBm):

    POST /api/v1/sensors                  register (bearer token = owner)
    GET  /api/v1/sensors                  map listing (public view)
    POST /api/v1/campaigns                create + start, returns fanout report
    GET  /api/v1/campaigns                list campaigns
    POST /api/v1/campaigns/{id}/stop
    GET  /api/v1/spectrum/aggregated?sensor=&t0=&t1=&f0=&f1=&tRes=&fRes=&fn=
    GET  /api/v1/spectrum/raw?sensor=&t0=&t1=&f0=&f1=
    GET  /api/v1/spectrum/stream?sensors=a,b&f0=&f1=   (ndjson push)
    POST /api/v1/iq/requests              on-demand IQ capture (blocks)
    GET  /api/v1/iq/requests/{id}         staged messages until TTL
    GET  /metrics                         speed-layer lag / late-drop counters

The stream endpoint holds the connection open and writes one JSON line
per sealed speed window; a comment line ``{"keepalive": true}`` goes out
when nothing closed for a while so proxies do not time out.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from urllib.parse import parse_qs, urlparse

from .errors import (
    InvalidArgument,
    NotFound,
    NoSuchView,
    OutOfRetention,
    PermissionDenied,
    SpectrumLabError,
    StateError,
    Unavailable,
)
from .serving import QuerySpec

_STATUS = {
    InvalidArgument: 400,
    NoSuchView: 400,
    PermissionDenied: 403,
    NotFound: 404,
    StateError: 409,
    OutOfRetention: 410,
    Unavailable: 503,
}


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "spectrumlab/0.1"

    # -- plumbing -------------------------------------------------------------

    def log_message(self, fmt, *args):
        pass

    @property
    def stack(self):
        return self.server.stack  # type: ignore[attr-defined]

    def _user(self):
        return self.stack.auth.resolve(self.headers.get("Authorization"))

    def _cors(self):
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Authorization, Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")

    def _send_json(self, obj, status: int = 200):
        body = json.dumps(obj).encode()
        self.send_response(status)
        self._cors()
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error_obj(self, exc: Exception):
        if isinstance(exc, SpectrumLabError):
            status = _STATUS.get(type(exc), 500)
            self._send_json({"error": exc.code, "message": str(exc)}, status)
        else:
            self._send_json({"error": "internal", "message": str(exc)}, 500)

    def _body_json(self) -> dict:
        length = int(self.headers.get("Content-Length") or 0)
        if length == 0:
            return {}
        try:
            return json.loads(self.rfile.read(length))
        except json.JSONDecodeError as e:
            raise InvalidArgument(f"bad JSON body: {e}") from e

    def _query(self) -> dict:
        return {k: v[0] for k, v in parse_qs(urlparse(self.path).query).items()}

    # -- dispatch ---------------------------------------------------------------

    def do_OPTIONS(self):
        self.send_response(204)
        self._cors()
        self.send_header("Content-Length", "0")
        self.end_headers()

    def do_GET(self):
        path = urlparse(self.path).path
        try:
            if path == "/api/v1/sensors":
                self._send_json({"sensors": self.stack.registry.list(self._user())})
            elif path == "/api/v1/campaigns":
                self._send_json({"campaigns": [
                    c.to_dict() for c in self.stack.campaigns.list()]})
            elif path == "/api/v1/spectrum/aggregated":
                self._get_aggregated()
            elif path == "/api/v1/spectrum/raw":
                self._get_raw()
            elif path == "/api/v1/spectrum/stream":
                self._get_stream()
            elif path.startswith("/api/v1/iq/requests/"):
                self._get_iq(path.rsplit("/", 1)[1])
            elif path == "/metrics":
                self._send_json(self.stack.metrics())
            else:
                self._send_json({"error": "not-found", "message": path}, 404)
        except BrokenPipeError:
            pass
        except Exception as e:
            try:
                self._send_error_obj(e)
            except BrokenPipeError:
                pass

    def do_POST(self):
        path = urlparse(self.path).path
        try:
            if path == "/api/v1/sensors":
                self._post_sensor()
            elif path == "/api/v1/campaigns":
                self._post_campaign()
            elif path.startswith("/api/v1/campaigns/") and path.endswith("/stop"):
                campaign_id = path.split("/")[-2]
                c = self.stack.campaigns.stop(campaign_id)
                self._send_json({"campaign": c.to_dict()})
            elif path == "/api/v1/iq/requests":
                self._post_iq()
            else:
                self._send_json({"error": "not-found", "message": path}, 404)
        except Exception as e:
            self._send_error_obj(e)

    # -- handlers -----------------------------------------------------------------

    def _post_sensor(self):
        user = self._user()
        if user is None:
            raise PermissionDenied("registration requires a bearer token")
        body = self._body_json()
        record = self.stack.registry.register(
            owner_id=user,
            lat=float(body["lat"]),
            lon=float(body["lon"]),
            antenna_desc=body.get("antenna_desc", ""),
            visibility=body.get("visibility", "public"),
        )
        if getattr(self.stack, "spawn_on_register", False):
            self.stack.spawn_node(record.sensor_id)
        self._send_json({"sensor": record.owner_view()}, 201)

    def _post_campaign(self):
        user = self._user()
        if user is None:
            raise PermissionDenied("campaign control requires a bearer token")
        body = self._body_json()
        band = body.get("band_hz")
        if not band or len(band) != 2:
            raise InvalidArgument("band_hz must be [f_lo, f_hi]")
        campaign = self.stack.campaigns.create(
            band=(float(band[0]), float(band[1])),
            strategy=body.get("strategy", "sequential"),
            sample_rate=float(body.get("sample_rate_hz", 2.4e6)),
            pipeline=body.get("pipeline", "psd"),
            targets=tuple(body.get("targets", [])),
        )
        report = self.stack.campaigns.start(campaign.campaign_id)
        self._send_json({"campaign": campaign.to_dict(),
                         "report": report.to_dict()}, 201)

    def _get_aggregated(self):
        q = self._query()
        spec = QuerySpec(
            sensor_id=q.get("sensor", ""),
            t0_ms=int(float(q["t0"])),
            t1_ms=int(float(q["t1"])),
            f0_hz=float(q["f0"]),
            f1_hz=float(q["f1"]),
            t_res_ms=int(float(q.get("tRes", 60_000))),
            f_res_hz=float(q.get("fRes", 100e3)),
            fn=q.get("fn", "avg"),
        )
        grid = self.stack.serving.query_aggregated(self._user(), spec)
        self._send_json(grid.to_dict())

    def _get_raw(self):
        q = self._query()
        segments = self.stack.serving.query_raw(
            self._user(), q.get("sensor", ""),
            int(float(q["t0"])), int(float(q["t1"])),
            float(q["f0"]) if "f0" in q else None,
            float(q["f1"]) if "f1" in q else None,
        )
        self._send_json({"segments": [
            {
                "sensor_id": s.sensor_id,
                "campaign_id": s.campaign_id,
                "center_freq_hz": s.center_freq,
                "bin_width_hz": s.bin_width,
                "t0_ms": s.t0_ms,
                "dwell_ms": s.dwell_ms,
                "n_avg": s.n_avg,
                "gain_meta": s.gain_meta.to_dict(),
                "bins_mw": [float(b) for b in s.bins],
            }
            for s in segments
        ]})

    def _get_stream(self):
        q = self._query()
        sensors = [s for s in q.get("sensors", "").split(",") if s]
        if not sensors:
            raise InvalidArgument("stream needs ?sensors=a,b")
        sub = self.stack.serving.stream_hub.subscribe(
            self._user(), sensors,
            float(q["f0"]) if "f0" in q else None,
            float(q["f1"]) if "f1" in q else None,
        )
        self.send_response(200)
        self._cors()
        self.send_header("Content-Type", "application/x-ndjson")
        self.send_header("Cache-Control", "no-cache")
        self.end_headers()
        try:
            idle = 0.0
            while True:
                record = sub.get(timeout=1.0)
                if record is None:
                    idle += 1.0
                    if idle >= 10.0:
                        self.wfile.write(b'{"keepalive": true}\n')
                        self.wfile.flush()
                        idle = 0.0
                    continue
                idle = 0.0
                self.wfile.write((json.dumps(record) + "\n").encode())
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.stack.serving.stream_hub.unsubscribe(sub)
            self.close_connection = True

    def _post_iq(self):
        body = self._body_json()
        request_id = self.stack.serving.request_iq(
            self._user(), body.get("sensor_id", ""),
            duration_ms=int(body.get("duration_ms", 1000)),
            band=tuple(body["band_hz"]) if body.get("band_hz") else None,
        )
        self._send_json({"request_id": request_id}, 201)

    def _get_iq(self, request_id: str):
        import base64
        messages = self.stack.serving.fetch_iq(self._user(), request_id)
        self._send_json({"messages": [
            {
                "sensor_id": m.sensor_id,
                "campaign_id": m.campaign_id,
                "center_freq_hz": m.center_freq,
                "sample_rate_hz": m.sample_rate,
                "t0_ms": m.t0_ms,
                "codec": m.codec,
                "payload_b64": base64.b64encode(m.payload).decode("ascii"),
            }
            for m in messages
        ]})


class ApiServer(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, stack, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _Handler)
        self.stack = stack

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True, name="api-http")
        t.start()
        return t
