"""Command-line entry points: sensor, batchctl, analyze, spectrumd."""

from __future__ import annotations

import argparse
import json
import signal
import sys
import time
from pathlib import Path

from .scene import load_scene
from .sensor import SensorConfig


# --------------------------------------------------------------------------
# sensor
# --------------------------------------------------------------------------

def sensor_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sensor", description="Run one simulated sensor against a collector")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="stream measurements to a collector")
    run.add_argument("--scene", required=True, help="scene description file (JSON)")
    run.add_argument("--config", required=True, help="sensor config file (JSON)")
    run.add_argument("--collector", required=True, help="host:port of the collector")
    run.add_argument("--sensor-id", default="sn-cli")
    run.add_argument("--duration", type=float, default=None,
                     help="seconds to run (default: until interrupted)")
    run.add_argument("--no-pacing", action="store_true",
                     help="do not sleep between dwells")
    args = parser.parse_args(argv)

    from .ingest import CollectorClient
    from .node import SensorNode

    scene = load_scene(args.scene)
    config = SensorConfig.from_dict(json.loads(Path(args.config).read_text()))
    host, port_s = args.collector.rsplit(":", 1)
    client = CollectorClient(host, int(port_s))
    node = SensorNode(args.sensor_id, scene, config, emit=client.send)

    stopping = []
    signal.signal(signal.SIGINT, lambda *a: stopping.append(True) or node.stop())
    print(f"sensor {args.sensor_id}: {len(node.scan.hop_list)} hops, "
          f"{config.pipeline} pipeline, dwell {config.dwell_ms} ms", file=sys.stderr)
    node.run(duration_s=args.duration, realtime=not args.no_pacing)
    client.close()
    print(f"sensor {args.sensor_id}: emitted {node.seq} envelopes", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# batchctl
# --------------------------------------------------------------------------

def batchctl_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="batchctl", description="Run batch jobs over the ingestion queue")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="compact the queue and rebuild aggregates")
    run.add_argument("--data-dir", required=True,
                     help="stack data directory (holds queue/, master/, aggregates/)")
    run.add_argument("--from", dest="t_from", type=int, default=None,
                     help="aggregate window start, ms since epoch")
    run.add_argument("--to", dest="t_to", type=int, default=None,
                     help="aggregate window end, ms since epoch")
    run.add_argument("--levels", default=None,
                     help='aggregation levels as "t_ms:f_hz,t_ms:f_hz,..."')
    args = parser.parse_args(argv)

    from .batch import DEFAULT_LEVELS, AggregateStore, MasterStore, build_aggregates
    from .ingest import PartitionedLog

    data_dir = Path(args.data_dir)
    log = PartitionedLog(data_dir / "queue")
    master = MasterStore(data_dir / "master")
    store = AggregateStore(data_dir / "aggregates")

    stats = master.compact(log.replay_all())
    levels = DEFAULT_LEVELS
    if args.levels:
        levels = []
        for part in args.levels.split(","):
            t_s, f_s = part.split(":")
            levels.append((int(t_s), float(f_s)))
    t_range = None
    if args.t_from is not None and args.t_to is not None:
        t_range = (args.t_from, args.t_to)
    tables = build_aggregates(master, levels=levels, t_range=t_range)
    store.publish(tables)
    log.close()
    master.close()

    print(f"compacted: +{stats['appended']} records "
          f"({stats['duplicates']} duplicates, {stats['invalid']} invalid)")
    for (t_w, f_w), acc in sorted(tables.items()):
        print(f"level t={t_w} ms f={f_w:.0f} Hz: {len(acc)} cells")
    return 0


# --------------------------------------------------------------------------
# analyze
# --------------------------------------------------------------------------

def _http_query_fn(api_url: str, token: str | None):
    import urllib.request

    def query(sensor_id, t0, t1, f0, f1, t_res_ms, f_res_hz, fn):
        url = (f"{api_url}/api/v1/spectrum/aggregated?sensor={sensor_id}"
               f"&t0={t0}&t1={t1}&f0={f0}&f1={f1}"
               f"&tRes={t_res_ms}&fRes={f_res_hz}&fn={fn}")
        req = urllib.request.Request(url)
        if token:
            req.add_header("Authorization", f"Bearer {token}")
        with urllib.request.urlopen(req) as resp:
            return json.loads(resp.read())["cells"]

    return query


def analyze_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="analyze", description="Spectrum analytics over the query API")
    parser.add_argument("--api", default="http://127.0.0.1:8742")
    parser.add_argument("--token", default=None)
    sub = parser.add_subparsers(dest="command", required=True)

    occ = sub.add_parser("occupancy", help="duty-cycle grid for a band")
    whitespace = sub.add_parser("whitespace", help="free frequency ranges")
    for p in (occ, whitespace):
        p.add_argument("--sensor", required=True)
        p.add_argument("--t0", type=int, required=True)
        p.add_argument("--t1", type=int, required=True)
        p.add_argument("--band", default="400e6:800e6")
        p.add_argument("--t-res", type=int, default=60_000)
        p.add_argument("--f-res", type=float, default=1e6)
        p.add_argument("--threshold-dbm", type=float, default=None)
    occ.add_argument("--plot", default=None, help="write an occupancy PNG here")
    whitespace.add_argument("--max-duty", type=float, default=0.1)

    rssi = sub.add_parser("rssi", help="calibrated in-band power per segment")
    rssi.add_argument("--sensor", required=True)
    rssi.add_argument("--t0", type=int, required=True)
    rssi.add_argument("--t1", type=int, required=True)
    rssi.add_argument("--band", required=True, help="f_lo:f_hi in Hz")
    rssi.add_argument("--antenna-gain-db", type=float, default=0.0)
    rssi.add_argument("--frontend-gain-db", type=float, default=0.0)
    rssi.add_argument("--cable-loss-db", type=float, default=0.0)

    args = parser.parse_args(argv)
    from . import analytics

    if args.command in ("occupancy", "whitespace"):
        f_lo, f_hi = (float(x) for x in args.band.split(":"))
        query = _http_query_fn(args.api, args.token)
        occ_map = analytics.occupancy(
            query, args.sensor, args.t0, args.t1, band=(f_lo, f_hi),
            t_res_ms=args.t_res, f_res_hz=args.f_res,
            threshold_dbm=args.threshold_dbm)
        if args.command == "occupancy":
            print(f"# occupancy sensor={args.sensor} "
                  f"threshold={occ_map.threshold_dbm:.1f} dBm")
            print("t_start_ms\tf_start_hz\tduty")
            for (t, f) in sorted(occ_map.grid):
                print(f"{t}\t{f:.0f}\t{occ_map.grid[(t, f)]:.3f}")
            if args.plot:
                analytics.render_occupancy_plot(occ_map, args.plot)
                print(f"# plot written to {args.plot}")
        else:
            ranges = analytics.detect_whitespace(occ_map, max_duty=args.max_duty)
            print(f"# whitespace sensor={args.sensor} max_duty={args.max_duty}")
            print("f_start_hz\tf_end_hz\twidth_mhz")
            for f0, f1 in ranges:
                print(f"{f0:.0f}\t{f1:.0f}\t{(f1 - f0) / 1e6:.1f}")
        return 0

    # rssi: pull owner raw segments and calibrate
    import urllib.request
    f_lo, f_hi = (float(x) for x in args.band.split(":"))
    url = (f"{args.api}/api/v1/spectrum/raw?sensor={args.sensor}"
           f"&t0={args.t0}&t1={args.t1}&f0={f_lo}&f1={f_hi}")
    req = urllib.request.Request(url)
    if args.token:
        req.add_header("Authorization", f"Bearer {args.token}")
    with urllib.request.urlopen(req) as resp:
        segments = json.loads(resp.read())["segments"]
    profile = analytics.CalibrationProfile(
        antenna_gain_db=args.antenna_gain_db,
        frontend_gain_db=args.frontend_gain_db,
        cable_loss_db=args.cable_loss_db)
    print(f"# rssi sensor={args.sensor} band=[{f_lo:.0f}, {f_hi:.0f}] "
          f"system_gain={profile.system_gain_db:.1f} dB")
    print("t0_ms\trssi_dbm")
    import numpy as np

    from .sensor import GainMeta, PsdSegment
    for s in segments:
        seg = PsdSegment(
            sensor_id=s["sensor_id"], campaign_id=s["campaign_id"],
            center_freq=s["center_freq_hz"], bin_width=s["bin_width_hz"],
            t0_ms=s["t0_ms"], dwell_ms=s["dwell_ms"],
            bins=np.array(s["bins_mw"]), n_avg=s["n_avg"],
            gain_meta=GainMeta.from_dict(s["gain_meta"]))
        win_lo = seg.center_freq - seg.bin_width * len(seg.bins) / 2
        win_hi = seg.center_freq + seg.bin_width * len(seg.bins) / 2
        if f_lo < win_lo or f_hi > win_hi:
            continue
        print(f"{seg.t0_ms}\t{analytics.calibrated_rssi(seg, (f_lo, f_hi), profile):.2f}")
    return 0


# --------------------------------------------------------------------------
# spectrumd
# --------------------------------------------------------------------------

def spectrumd_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="spectrumd",
        description="Run the whole desk-scale stack: collector, queue, speed "
                    "layer, HTTP API and an optional simulated fleet")
    parser.add_argument("--scene", required=True)
    parser.add_argument("--data-dir", required=True)
    parser.add_argument("--http-port", type=int, default=8742)
    parser.add_argument("--sensors", type=int, default=2,
                        help="simulated sensors to spawn (owner: 'demo')")
    parser.add_argument("--band", default="400e6:800e6",
                        help="initial sweep band for the fleet")
    parser.add_argument("--token", action="append", default=[],
                        help="user:token pairs to preload", metavar="USER:TOKEN")
    parser.add_argument("--batch-every", type=float, default=30.0,
                        help="seconds between batch job runs (0 = never)")
    parser.add_argument("--spawn-on-register", action="store_true",
                        help="spawn a simulated node for every HTTP registration")
    args = parser.parse_args(argv)

    from .runtime import LocalStack

    scene = load_scene(args.scene)
    f_lo, f_hi = (float(x) for x in args.band.split(":"))
    stack = LocalStack(scene, args.data_dir, use_collector_socket=True,
                       spawn_on_register=args.spawn_on_register)
    stack.add_user("demo", "token-demo")
    for pair in args.token:
        user, token = pair.split(":", 1)
        stack.add_user(user, token)
    for i in range(args.sensors):
        stack.add_sensor("demo", lat=47.0 + i * 0.01, lon=8.0,
                         config=SensorConfig(band=(f_lo, f_hi)),
                         sensor_id=f"sn-demo-{i:02d}")
    stack.start_live(http=True, http_port=args.http_port)
    host, port = stack.api.address
    print(f"spectrumd: API http://{host}:{port}  "
          f"collector {stack.collector.address[0]}:{stack.collector.address[1]}",
          flush=True)
    print(f"spectrumd: {len(stack.nodes)} sensors sweeping "
          f"[{f_lo / 1e6:.0f}, {f_hi / 1e6:.0f}] MHz; tokens: demo -> token-demo",
          flush=True)

    stop = []
    signal.signal(signal.SIGINT, lambda *a: stop.append(True))
    signal.signal(signal.SIGTERM, lambda *a: stop.append(True))
    last_batch = time.monotonic()
    try:
        while not stop:
            time.sleep(0.5)
            if args.batch_every > 0 and time.monotonic() - last_batch >= args.batch_every:
                stats = stack.run_batch()
                print(f"spectrumd: batch run: +{stats['appended']} records, "
                      f"{stack.master.count()} in master", flush=True)
                last_batch = time.monotonic()
    finally:
        stack.shutdown()
    return 0


def main() -> int:  # pragma: no cover - convenience dispatcher
    prog = Path(sys.argv[0]).name
    table = {"sensor": sensor_main, "batchctl": batchctl_main,
             "analyze": analyze_main, "spectrumd": spectrumd_main}
    if prog in table:
        return table[prog]()
    print(f"unknown entry point {prog}; use sensor/batchctl/analyze/spectrumd",
          file=sys.stderr)
    return 2


if __name__ == "__main__":
    sys.exit(main())
