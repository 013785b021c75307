"""Access rules, resolution clamping, batch-preferred fusion, dB edge."""

import math
from pathlib import Path

import numpy as np
import pytest

from spectrumlab import (
    AggregateStore,
    InvalidArgument,
    MasterStore,
    NotFound,
    PartitionedLog,
    PermissionDenied,
    QuerySpec,
    SensorRegistry,
    ServingLayer,
    SimClock,
    SpeedLayer,
    TokenAuth,
    build_aggregates,
    mw_to_dbm,
)
from spectrumlab.wire import Envelope


def psd_env(sensor="sn-a", seq=0, t0=0, fc=600e6, bins=(1.0,), bin_width=100e3):
    return Envelope(sensor_id=sensor, campaign_id="", seq=seq, kind="psd",
                    center_freq=fc, t0_ms=t0, dwell_ms=125.0, gain_meta={},
                    bin_width=bin_width, n_avg=4, bins=list(bins))


@pytest.fixture
def rig(tmp_path):
    clock = SimClock(0)
    registry = SensorRegistry(clock=clock)
    registry.register("alice", 47.0, 8.0, sensor_id="sn-a")
    registry.register("bob", 46.0, 7.0, visibility="private", sensor_id="sn-priv")
    registry.register("carol", 45.0, 6.0, visibility="restricted", sensor_id="sn-res")
    log = PartitionedLog(tmp_path / "q", clock=clock)
    master = MasterStore(tmp_path / "m")
    aggregates = AggregateStore(tmp_path / "agg")
    speed = SpeedLayer(log, clock=clock)
    serving = ServingLayer(registry, master, aggregates, speed, clock=clock)
    yield clock, log, master, aggregates, speed, serving
    log.close()
    master.close()


def seed_history(master, aggregates, envs, levels=((60_000, 100e3),
                                                   (5_000, 100e3))):
    master.compact(envs)
    aggregates.publish(build_aggregates(master, levels=list(levels)))


# -- clamping --------------------------------------------------------------

def test_non_owner_clamped_to_public_caps(rig):
    clock, log, master, aggregates, speed, serving = rig
    seed_history(master, aggregates, [psd_env(seq=0, t0=1000, bins=[2.0])])
    spec = QuerySpec("sn-a", 0, 60_000, 599e6, 601e6,
                     t_res_ms=1_000, f_res_hz=10e3)
    grid = serving.query_aggregated("bob", spec)
    assert grid.applied_t_res_ms == 60_000
    assert grid.applied_f_res_hz == 100e3
    assert all(c["t_width_ms"] == 60_000 for c in grid.cells)
    grid_anon = serving.query_aggregated(None, spec)
    assert grid_anon.applied_t_res_ms == 60_000


def test_owner_not_clamped(rig):
    clock, log, master, aggregates, speed, serving = rig
    seed_history(master, aggregates, [psd_env(seq=0, t0=1000, bins=[2.0])])
    spec = QuerySpec("sn-a", 0, 60_000, 599e6, 601e6,
                     t_res_ms=5_000, f_res_hz=100e3)
    grid = serving.query_aggregated("alice", spec)
    assert grid.applied_t_res_ms == 5_000
    assert grid.cells and grid.cells[0]["t_width_ms"] == 5_000


def test_clamp_monotone_property(rig):
    _clock, _log, _master, _agg, _speed, serving = rig
    for t_res in (1, 1_000, 59_000, 60_000, 600_000):
        for f_res in (1e3, 99e3, 100e3, 1e6):
            t, f = serving.clamp_resolution("bob", "sn-a", t_res, f_res)
            assert t >= 60_000 and f >= 100e3
            t, f = serving.clamp_resolution(None, "sn-a", t_res, f_res)
            assert t >= 60_000 and f >= 100e3


# -- access policy -------------------------------------------------------------

def test_private_sensor_denied_to_strangers(rig):
    *_, serving = rig
    spec = QuerySpec("sn-priv", 0, 60_000, 599e6, 601e6)
    with pytest.raises(PermissionDenied):
        serving.query_aggregated("alice", spec)
    with pytest.raises(PermissionDenied):
        serving.query_aggregated(None, spec)
    serving.query_aggregated("bob", spec)      # owner passes


def test_restricted_needs_any_authentication(rig):
    *_, serving = rig
    spec = QuerySpec("sn-res", 0, 60_000, 599e6, 601e6)
    with pytest.raises(PermissionDenied):
        serving.query_aggregated(None, spec)
    serving.query_aggregated("alice", spec)    # any authenticated user


def test_unknown_sensor_not_found(rig):
    *_, serving = rig
    with pytest.raises(NotFound):
        serving.query_aggregated("alice",
                                 QuerySpec("sn-ghost", 0, 1, 0e6, 1e6))


# -- raw access ---------------------------------------------------------------

def test_raw_owner_round_trip_bit_exact(rig):
    clock, log, master, aggregates, speed, serving = rig
    rng = np.random.default_rng(0)
    bins = list(rng.exponential(1e-9, size=256))
    seed_history(master, aggregates,
                 [psd_env(seq=0, t0=1000, bins=bins, bin_width=9375.0)])
    segments = serving.query_raw("alice", "sn-a", 0, 10_000)
    assert len(segments) == 1
    np.testing.assert_array_equal(segments[0].bins, np.array(bins))


def test_raw_denied_to_non_owner_even_public(rig):
    *_, serving = rig
    with pytest.raises(PermissionDenied):
        serving.query_raw("bob", "sn-a", 0, 10_000)
    with pytest.raises(PermissionDenied):
        serving.query_raw(None, "sn-a", 0, 10_000)


def test_raw_empty_range_empty_list(rig):
    *_, serving = rig
    assert serving.query_raw("alice", "sn-a", 5_000_000, 6_000_000) == []


# -- fusion ----------------------------------------------------------------------

def test_batch_preferred_where_both_layers_have_cells(rig):
    clock, log, master, aggregates, speed, serving = rig
    env = psd_env(seq=0, t0=1_000, bins=[2.0])
    log.enqueue(env)
    clock.set(12_000)
    speed.pump()
    speed.close_due_windows()
    # Batch saw a corrected record for the same bucket (different value).
    seed_history(master, aggregates, [psd_env(seq=0, t0=1_000, bins=[8.0])],
                 levels=[(5_000, 100e3)])
    spec = QuerySpec("sn-a", 0, 5_000, 599e6, 601e6,
                     t_res_ms=5_000, f_res_hz=100e3)
    grid = serving.query_aggregated("alice", spec)
    assert len(grid.cells) == 1
    assert grid.cells[0]["layer"] == "batch"
    assert grid.cells[0]["dbm"] == pytest.approx(mw_to_dbm(8.0))


def test_speed_fills_recent_gap(rig):
    clock, log, master, aggregates, speed, serving = rig
    # Batch processed the first minute; a fresh envelope sits only in speed.
    seed_history(master, aggregates, [psd_env(seq=0, t0=1_000, bins=[2.0])],
                 levels=[(5_000, 100e3)])
    log.enqueue(psd_env(seq=1, t0=61_000, bins=[4.0]))
    clock.set(70_000)
    speed.pump()
    speed.close_due_windows()
    spec = QuerySpec("sn-a", 0, 120_000, 599e6, 601e6,
                     t_res_ms=5_000, f_res_hz=100e3)
    grid = serving.query_aggregated("alice", spec)
    layers = {c["t_start_ms"]: c["layer"] for c in grid.cells}
    assert layers[0] == "batch"
    assert layers[60_000] == "speed"


def test_sealed_history_equals_batch_in_dbm(rig):
    clock, log, master, aggregates, speed, serving = rig
    envs = [psd_env(seq=i, t0=i * 1000, bins=[float(i + 1)]) for i in range(30)]
    seed_history(master, aggregates, envs, levels=[(60_000, 100e3)])
    spec = QuerySpec("sn-a", 0, 60_000, 599e6, 601e6)
    grid = serving.query_aggregated("bob", spec)
    batch_cells = aggregates.query("sn-a", 0, 60_000, 599e6, 601e6,
                                   (60_000, 100e3), "avg")
    assert len(grid.cells) == len(batch_cells) == 1
    assert grid.cells[0]["dbm"] == mw_to_dbm(batch_cells[0].value_mw)
    assert grid.cells[0]["layer"] == "batch"


def test_fusion_returns_each_bucket_once(rig):
    clock, log, master, aggregates, speed, serving = rig
    env = psd_env(seq=0, t0=1_000, bins=[2.0])
    log.enqueue(env)
    clock.set(12_000)
    speed.pump()
    speed.close_due_windows()
    seed_history(master, aggregates, [env], levels=[(5_000, 100e3)])
    grid = serving.query_aggregated(
        "alice", QuerySpec("sn-a", 0, 60_000, 599e6, 601e6,
                           t_res_ms=5_000, f_res_hz=100e3))
    keys = [(c["t_start_ms"], c["f_start_hz"]) for c in grid.cells]
    assert len(keys) == len(set(keys))
    assert all("layer" in c for c in grid.cells)


# -- streaming fan-out ------------------------------------------------------------

def test_stream_two_subscribers_identical(rig):
    clock, log, master, aggregates, speed, serving = rig
    sub1 = serving.stream_hub.subscribe("alice", ["sn-a"])
    sub2 = serving.stream_hub.subscribe("bob", ["sn-a"])
    for i in range(3):
        log.enqueue(psd_env(seq=i, t0=i * 5_000 + 100, bins=[float(i + 1)]))
    clock.set(60_000)
    speed.pump()
    speed.close_due_windows()
    got1 = [sub1.get(timeout=0.1) for _ in range(3)]
    got2 = [sub2.get(timeout=0.1) for _ in range(3)]
    assert got1 == got2
    assert [r["t_start_ms"] for r in got1] == [0, 5_000, 10_000]
    # avg + max cells per window, dBm at the edge
    assert {c["fn"] for c in got1[0]["cells"]} == {"avg", "max"}


def test_stream_subscribe_denied_before_data(rig):
    *_, serving = rig
    with pytest.raises(PermissionDenied):
        serving.stream_hub.subscribe("alice", ["sn-priv"])


def test_stream_drop_oldest_on_slow_consumer(rig):
    clock, log, master, aggregates, speed, serving = rig
    sub = serving.stream_hub.subscribe("alice", ["sn-a"])
    n = 80                                  # queue maxsize is 64
    for i in range(n):
        log.enqueue(psd_env(seq=i, t0=i * 5_000 + 100))
    clock.set(n * 5_000 + 60_000)
    speed.pump()
    speed.close_due_windows()
    got = []
    while (rec := sub.get(timeout=0.05)) is not None:
        got.append(rec["t_start_ms"])
    assert len(got) == 64
    assert got == sorted(got)
    assert got[-1] == (n - 1) * 5_000      # newest survived
    assert sub.dropped == n - 64


# -- the dB edge rule ---------------------------------------------------------------

def test_internal_modules_never_convert_to_db():
    """Only the API edge (serving) and analytics may speak dB; every store
    and pipeline stays in linear mW."""
    src = Path(__file__).parent.parent / "src" / "spectrumlab"
    internal = ["scene.py", "sensor.py", "wire.py", "broker.py", "control.py",
                "ingest.py", "aggregation.py", "batch.py", "speed.py",
                "node.py", "runtime.py"]
    for name in internal:
        text = (src / name).read_text()
        assert "log10" not in text, f"{name} performs dB conversion"
        assert "dbm" not in text.replace("_db", "").replace("dbm_", ""), name


def test_auth_token_resolution():
    auth = TokenAuth({"tok-1": "alice"})
    auth.add("tok-2", "bob")
    assert auth.resolve("Bearer tok-1") == "alice"
    assert auth.resolve("bearer tok-2") == "bob"
    assert auth.resolve("tok-1") == "alice"
    assert auth.resolve(None) is None
    assert auth.resolve("Bearer nope") is None


def test_query_spec_validation():
    with pytest.raises(InvalidArgument):
        QuerySpec("s", 10, 10, 0, 1e6)
    with pytest.raises(InvalidArgument):
        QuerySpec("s", 0, 10, 1e6, 1e6)
    with pytest.raises(InvalidArgument):
        QuerySpec("s", 0, 10, 0, 1e6, fn="median")


def test_staged_iq_deleted_after_ttl(rig):
    clock, log, master, aggregates, speed, serving = rig
    with serving._iq_lock:
        serving._iq_staging["iq-test"] = {
            "request_id": "iq-test", "owner": "alice", "sensor_id": "sn-a",
            "expires_ms": int(clock()) + serving._iq_ttl_ms,
            "messages": [], "campaign_id": None,
        }
    assert serving.fetch_iq("alice", "iq-test") == []
    clock.advance(serving._iq_ttl_ms + 1)
    with pytest.raises(NotFound):
        serving.fetch_iq("alice", "iq-test")
