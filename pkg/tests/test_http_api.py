"""End-to-end over HTTP against a live stack: registration, campaigns,
clamped queries, raw access, streaming, IQ staging, metrics."""

import base64
import http.client
import json
import time

import numpy as np
import pytest

from spectrumlab import (
    LocalStack,
    Emitter,
    Scene,
    SensorConfig,
    iq_decode,
    synthesize_block,
)

NOISE = 1e-12


@pytest.fixture(scope="module")
def live(tmp_path_factory):
    scene = Scene(
        emitters=(Emitter(center_freq=605e6, bandwidth=2e6,
                          power=NOISE * 100 * 2e6),),
        noise_density=NOISE, rng_seed=13)
    stack = LocalStack(scene, tmp_path_factory.mktemp("live"),
                       use_collector_socket=True,
                       speed_window_ms=1000, speed_lateness_ms=500,
                       speed_poll_s=0.05)
    stack.add_user("alice", "tok-alice")
    stack.add_user("bob", "tok-bob")
    stack.add_sensor("alice", lat=47.0, lon=8.0, sensor_id="sn-live",
                     config=SensorConfig(band=(600e6, 612e6)))
    stack.start_live()
    yield stack
    stack.shutdown()


def request(stack, method, path, token=None, body=None):
    host, port = stack.api.address
    conn = http.client.HTTPConnection(host, port, timeout=30)
    headers = {}
    if token:
        headers["Authorization"] = f"Bearer {token}"
    payload = None
    if body is not None:
        payload = json.dumps(body)
        headers["Content-Type"] = "application/json"
    conn.request(method, path, body=payload, headers=headers)
    resp = conn.getresponse()
    data = json.loads(resp.read())
    conn.close()
    return resp.status, data


def test_register_and_listing_views(live):
    status, data = request(live, "POST", "/api/v1/sensors", token="tok-bob",
                           body={"lat": 46.5, "lon": 7.5,
                                 "antenna_desc": "dipole",
                                 "visibility": "private"})
    assert status == 201
    assert data["sensor"]["true_location"] == [46.5, 7.5]

    status, data = request(live, "GET", "/api/v1/sensors")
    assert status == 200
    by_id = {s["sensor_id"]: s for s in data["sensors"]}
    assert "sn-live" in by_id
    assert all("true_location" not in s for s in data["sensors"])

    status, data = request(live, "GET", "/api/v1/sensors", token="tok-alice")
    owned = [s for s in data["sensors"] if s.get("owner_id") == "alice"]
    assert owned and owned[0]["true_location"] == [47.0, 8.0]


def test_register_requires_token(live):
    status, data = request(live, "POST", "/api/v1/sensors",
                           body={"lat": 0, "lon": 0})
    assert status == 403
    assert data["error"] == "permission-denied"


def test_campaign_fanout_and_stop(live):
    status, data = request(live, "POST", "/api/v1/campaigns", token="tok-alice",
                           body={"band_hz": [600e6, 606e6],
                                 "targets": ["sn-live"]})
    assert status == 201
    assert data["report"]["acked"] == ["sn-live"]
    cid = data["campaign"]["campaign_id"]
    assert data["campaign"]["state"] == "running"

    status, data = request(live, "GET", "/api/v1/campaigns")
    assert any(c["campaign_id"] == cid for c in data["campaigns"])

    status, data = request(live, "POST", f"/api/v1/campaigns/{cid}/stop",
                           token="tok-alice")
    assert status == 200 and data["campaign"]["state"] == "stopped"
    # Node reverts to the default wide sweep on its next step.
    deadline = time.monotonic() + 3
    node = live.nodes["sn-live"]
    while time.monotonic() < deadline and node.config.band != (20e6, 6e9):
        time.sleep(0.05)
    assert node.config.band == (20e6, 6e9)
    # Re-point it at the test band for the rest of the module.
    status, data = request(live, "POST", "/api/v1/campaigns", token="tok-alice",
                           body={"band_hz": [600e6, 612e6],
                                 "targets": ["sn-live"]})
    assert data["report"]["acked"] == ["sn-live"]


def test_campaign_band_validation_surfaces_as_400(live):
    status, data = request(live, "POST", "/api/v1/campaigns", token="tok-alice",
                           body={"band_hz": [1e6, 2e6], "targets": []})
    assert status == 400
    assert data["error"] == "invalid-argument"


def test_stream_delivers_window_records(live):
    host, port = live.api.address
    conn = http.client.HTTPConnection(host, port, timeout=20)
    conn.request("GET", "/api/v1/spectrum/stream?sensors=sn-live",
                 headers={"Authorization": "Bearer tok-alice"})
    resp = conn.getresponse()
    assert resp.status == 200
    t0 = time.monotonic()
    records = []
    while len(records) < 2 and time.monotonic() - t0 < 15:
        line = resp.readline()
        if not line.strip():
            continue
        rec = json.loads(line)
        if rec.get("keepalive"):
            continue
        records.append(rec)
    conn.close()
    assert len(records) == 2
    assert records[0]["t_width_ms"] == 1000
    assert records[1]["t_start_ms"] > records[0]["t_start_ms"]
    cells = records[0]["cells"]
    assert cells and {c["fn"] for c in cells} == {"avg", "max"}
    assert all(c["sensor_id"] == "sn-live" for c in cells)
    assert all(c["f_width_hz"] >= 100e3 for c in cells)


def test_aggregated_clamp_visible_over_http(live):
    time.sleep(1.5)                      # let some envelopes accumulate
    live.run_batch()
    now = int(time.time() * 1000)
    q = (f"/api/v1/spectrum/aggregated?sensor=sn-live&t0={now - 600_000}"
         f"&t1={now}&f0=600e6&f1=612e6&tRes=1000&fRes=10000&fn=max")
    status, data = request(live, "GET", q, token="tok-bob")
    assert status == 200
    assert data["applied_t_res_ms"] == 60_000
    assert data["applied_f_res_hz"] == 100e3
    assert data["cells"], "expected data in the queried range"
    assert all(c["t_width_ms"] == 60_000 for c in data["cells"])
    assert all("dbm" in c and "layer" in c for c in data["cells"])

    # Finer than any stored or derivable view: an honest no-such-view error.
    status, err = request(live, "GET", q, token="tok-alice")
    assert status == 400 and err["error"] == "no-such-view"

    q_fine = (f"/api/v1/spectrum/aggregated?sensor=sn-live&t0={now - 600_000}"
              f"&t1={now}&f0=600e6&f1=612e6&tRes=1000&fRes=100000&fn=max")
    status, owner_data = request(live, "GET", q_fine, token="tok-alice")
    assert status == 200
    assert owner_data["applied_t_res_ms"] == 1000
    assert any(c["t_width_ms"] == 1000 for c in owner_data["cells"])


def test_raw_owner_only_over_http(live):
    now = int(time.time() * 1000)
    q = f"/api/v1/spectrum/raw?sensor=sn-live&t0=0&t1={now}"
    status, data = request(live, "GET", q, token="tok-bob")
    assert status == 403
    status, data = request(live, "GET", q, token="tok-alice")
    assert status == 200
    assert data["segments"]
    seg = data["segments"][0]
    assert len(seg["bins_mw"]) == 256


def test_iq_request_staged_and_owner_gated(live):
    status, data = request(live, "POST", "/api/v1/iq/requests",
                           token="tok-bob", body={"sensor_id": "sn-live"})
    assert status == 403

    status, data = request(live, "POST", "/api/v1/iq/requests",
                           token="tok-alice",
                           body={"sensor_id": "sn-live", "duration_ms": 600,
                                 "band_hz": [604e6, 606.4e6]})
    assert status == 201
    rid = data["request_id"]

    status, data = request(live, "GET", f"/api/v1/iq/requests/{rid}",
                           token="tok-bob")
    assert status == 403
    status, data = request(live, "GET", f"/api/v1/iq/requests/{rid}",
                           token="tok-alice")
    assert status == 200
    msgs = data["messages"]
    assert msgs, "no IQ messages staged"
    m = msgs[0]
    payload = base64.b64decode(m["payload_b64"])
    from spectrumlab.sensor import IqMessage
    decoded = iq_decode(IqMessage(
        sensor_id=m["sensor_id"], campaign_id=m["campaign_id"],
        center_freq=m["center_freq_hz"], sample_rate=m["sample_rate_hz"],
        t0_ms=m["t0_ms"], codec=m["codec"], payload=payload))
    oracle = synthesize_block(live.scene, m["sensor_id"], m["center_freq_hz"],
                              m["sample_rate_hz"], len(decoded), m["t0_ms"])
    np.testing.assert_array_equal(
        decoded, np.asarray(oracle.samples).astype(np.complex64))
    # The node is back on the PSD pipeline after the transient campaign.
    deadline = time.monotonic() + 3
    while time.monotonic() < deadline and live.nodes["sn-live"].config.pipeline != "psd":
        time.sleep(0.05)
    assert live.nodes["sn-live"].config.pipeline == "psd"


def test_metrics_endpoint(live):
    status, data = request(live, "GET", "/metrics")
    assert status == 200
    for key in ("late_dropped", "windows_closed", "envelopes_seen",
                "last_close_lag_ms", "queue_heads", "master_records"):
        assert key in data


def test_unknown_route_404(live):
    status, data = request(live, "GET", "/api/v1/nope")
    assert status == 404
