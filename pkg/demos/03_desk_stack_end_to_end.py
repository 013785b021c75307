"""The whole platform in one process: fleet, campaign, lambda backend, API.

Spins the live stack (collector socket, durable queue, speed layer, HTTP
API), registers two sensors, starts a campaign over the broker, lets the
speed layer stream a few windows, runs a batch job, then issues fused
queries as owner and stranger to show the resolution caps.
"""

import json
import tempfile
import time
import urllib.request

from spectrumlab import Emitter, LocalStack, Scene, SensorConfig

NOISE = 1e-12
scene = Scene(
    emitters=(Emitter(center_freq=605e6, bandwidth=2e6, power=NOISE * 100 * 2e6),),
    noise_density=NOISE, rng_seed=99)

tmp = tempfile.mkdtemp(prefix="spectrumlab-demo-")
stack = LocalStack(scene, tmp, use_collector_socket=True,
                   speed_window_ms=1000, speed_lateness_ms=500,
                   speed_poll_s=0.05)
alice = stack.add_user("alice", "tok-alice")
bob = stack.add_user("bob", "tok-bob")
stack.add_sensor("alice", lat=47.37, lon=8.54, sensor_id="sn-zrh",
                 config=SensorConfig(band=(600e6, 612e6)))
stack.add_sensor("alice", lat=40.42, lon=-3.70, sensor_id="sn-mad",
                 config=SensorConfig(band=(600e6, 612e6)))
stack.start_live()
api = stack.api_url()
print(f"stack up at {api}, data in {tmp}")


def get(path, token=None):
    req = urllib.request.Request(api + path)
    if token:
        req.add_header("Authorization", f"Bearer {token}")
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


def post(path, body, token=None):
    req = urllib.request.Request(api + path, data=json.dumps(body).encode(),
                                 method="POST",
                                 headers={"Content-Type": "application/json"})
    if token:
        req.add_header("Authorization", f"Bearer {token}")
    with urllib.request.urlopen(req) as resp:
        return json.loads(resp.read())


sensors = get("/api/v1/sensors")["sensors"]
print(f"\nsensor map shows {len(sensors)} sensors (obfuscated locations):")
for s in sensors:
    print(f"  {s['sensor_id']}: {s['location'][0]:.3f}, {s['location'][1]:.3f}"
          f"  [{s['status']}]")

out = post("/api/v1/campaigns",
           {"band_hz": [602e6, 608e6], "targets": ["sn-zrh", "sn-mad"]},
           token="tok-alice")
print(f"\ncampaign {out['campaign']['campaign_id']}: "
      f"acked={out['report']['acked']} unreachable={out['report']['unreachable']}")

print("\nletting the speed layer close a few windows...")
time.sleep(4)
stack.run_batch()
print(f"batch run done: {stack.master.count()} master records")
time.sleep(7)       # a full 5 s bucket of fresh windows closes post-batch

now = int(time.time() * 1000)
q = (f"/api/v1/spectrum/aggregated?sensor=sn-zrh&t0={now - 300_000}&t1={now}"
     f"&f0=602e6&f1=608e6&tRes=5000&fRes=100000&fn=max")
owner = get(q, token="tok-alice")
stranger = get(q, token="tok-bob")
print(f"\nsame query, owner vs stranger:")
print(f"  owner    applied resolution: {owner['applied_t_res_ms']} ms / "
      f"{owner['applied_f_res_hz'] / 1e3:.0f} kHz, {len(owner['cells'])} cells")
print(f"  stranger applied resolution: {stranger['applied_t_res_ms']} ms / "
      f"{stranger['applied_f_res_hz'] / 1e3:.0f} kHz, {len(stranger['cells'])} cells")
hot = [c for c in owner["cells"] if 604e6 <= c["f_start_hz"] < 606e6]
cold = [c for c in owner["cells"] if c["f_start_hz"] < 603e6]
if hot and cold:
    print(f"  emitter bucket ~{max(c['dbm'] for c in hot):.1f} dBm, "
          f"quiet bucket ~{max(c['dbm'] for c in cold):.1f} dBm")
print(f"  layers in fused result: {sorted({c['layer'] for c in owner['cells']})}")

metrics = get("/metrics")
print(f"\nmetrics: {metrics['windows_closed']} windows closed, "
      f"{metrics['late_dropped']} late drops")
stack.shutdown()
print("stack down")
