"""Registry, location obfuscation, command application and campaign fanout."""

import threading
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import uniform_disc_mean_displacement
from spectrumlab import (
    Broker,
    CampaignManager,
    Command,
    InvalidArgument,
    SensorConfig,
    SensorRegistry,
    StateError,
    apply_command,
    haversine_km,
    obfuscate_location,
)
from spectrumlab.control import DEFAULT_SWEEP_CONFIG


def cmd(verb, args=None, campaign="c1"):
    return Command(command_id="x", campaign_id=campaign, verb=verb,
                   args=args or {})


# -- obfuscation ------------------------------------------------------------

def test_zero_radius_is_identity():
    assert obfuscate_location(47.0, 8.0, 0.0, "k") == (47.0, 8.0)


def test_obfuscation_deterministic_per_key():
    a = obfuscate_location(47.0, 8.0, 5.0, "sensor-a")
    b = obfuscate_location(47.0, 8.0, 5.0, "sensor-a")
    c = obfuscate_location(47.0, 8.0, 5.0, "sensor-b")
    assert a == b
    assert a != c


def test_offsets_stay_inside_radius():
    for i in range(1000):
        lat, lon = obfuscate_location(47.0, 8.0, 5.0, f"k{i}")
        assert haversine_km(47.0, 8.0, lat, lon) <= 5.0 + 1e-6


def test_mean_displacement_matches_uniform_disc():
    radius = 5.0
    dists = [
        haversine_km(47.0, 8.0, *obfuscate_location(47.0, 8.0, radius, f"m{i}"))
        for i in range(10_000)
    ]
    mean = float(np.mean(dists))
    expected = uniform_disc_mean_displacement(radius)
    assert abs(mean - expected) / expected < 0.05


# -- registry ------------------------------------------------------------------

def test_register_and_views():
    reg = SensorRegistry(obfuscation_radius_km=5.0)
    rec = reg.register("alice", 47.0, 8.0, "discone")
    assert haversine_km(47.0, 8.0, *rec.public_location) <= 5.0
    listing_stranger = reg.list(viewer="bob")
    assert "true_location" not in listing_stranger[0]
    listing_owner = reg.list(viewer="alice")
    assert listing_owner[0]["true_location"] == [47.0, 8.0]


def test_zero_radius_registry_publishes_true_location():
    reg = SensorRegistry(obfuscation_radius_km=0.0)
    rec = reg.register("alice", 10.0, 20.0)
    assert rec.public_location == (10.0, 20.0)


def test_reregistration_same_key_same_public_location():
    reg = SensorRegistry()
    a = reg.register("alice", 47.0, 8.0, sensor_id="sn-fixed")
    b = reg.register("alice", 47.0, 8.0, sensor_id="sn-fixed")
    assert a.public_location == b.public_location


def test_sensor_ids_unique():
    reg = SensorRegistry()
    ids = {reg.register("alice", 0.0, 0.0).sensor_id for _ in range(100)}
    assert len(ids) == 100


def test_register_rejects_bad_coordinates():
    reg = SensorRegistry()
    with pytest.raises(InvalidArgument):
        reg.register("alice", 91.0, 0.0)
    with pytest.raises(InvalidArgument):
        reg.register("alice", 0.0, -181.0)


# -- command application ------------------------------------------------------------

def test_set_band_rebuilds_hop_list():
    cfg = apply_command(SensorConfig(),
                        cmd("set-band", {"f_lo_hz": 400e6, "f_hi_hz": 800e6}))
    assert cfg.band == (400e6, 800e6)
    assert len(cfg.scan_state().hop_list) == 167


def test_stop_reverts_to_default_sweep():
    cfg = apply_command(SensorConfig(band=(400e6, 800e6), strategy="bursty-weighted"),
                        cmd("stop"))
    assert cfg == DEFAULT_SWEEP_CONFIG


def test_band_below_floor_rejected_config_unchanged():
    cfg = SensorConfig()
    with pytest.raises(InvalidArgument):
        apply_command(cfg, cmd("set-band", {"f_lo_hz": 1e6, "f_hi_hz": 2e6}))
    assert cfg == SensorConfig()


@settings(max_examples=30, deadline=None)
@given(f_lo=st.floats(20e6, 5.9e9), width=st.floats(1e6, 100e6),
       rate=st.sampled_from([1e6, 2.4e6, 10e6]),
       strategy=st.sampled_from(["sequential", "bursty-weighted"]))
def test_set_commands_idempotent(f_lo, width, rate, strategy):
    f_hi = min(f_lo + width, 6e9)
    base = SensorConfig()
    for c in (cmd("set-band", {"f_lo_hz": f_lo, "f_hi_hz": f_hi}),
              cmd("set-sample-rate", {"sample_rate_hz": rate}),
              cmd("set-strategy", {"strategy": strategy})):
        once = apply_command(base, c)
        twice = apply_command(once, c)
        assert once == twice


# -- campaigns ------------------------------------------------------------------

class FakeSensor:
    """Acks every command immediately over the broker."""

    def __init__(self, broker, sensor_id):
        self.broker = broker
        self.sensor_id = sensor_id
        self.config = SensorConfig()
        broker.subscribe(f"control/{sensor_id}/cmd", self._on_cmd)

    def _on_cmd(self, topic, payload):
        command = Command.from_dict(payload)
        try:
            self.config = apply_command(self.config, command)
            ok = True
        except InvalidArgument:
            ok = False
        self.broker.publish(f"control/{self.sensor_id}/ack",
                            {"sensor_id": self.sensor_id,
                             "command_id": command.command_id, "ok": ok})


@pytest.fixture
def control_plane():
    broker = Broker()
    registry = SensorRegistry()
    manager = CampaignManager(broker, registry, ack_timeout_s=1.0)
    yield broker, registry, manager
    broker.close()


def test_empty_campaign_runs_vacuously(control_plane):
    _, _, manager = control_plane
    c = manager.create(band=(400e6, 800e6), targets=())
    report = manager.start(c.campaign_id)
    assert c.state == "running"
    assert report.acked == [] and report.unreachable == []


def test_fanout_three_online_sensors(control_plane):
    broker, registry, manager = control_plane
    sensors = []
    for i in range(3):
        rec = registry.register("alice", 0, 0, sensor_id=f"sn-{i}")
        sensors.append(FakeSensor(broker, rec.sensor_id))
    c = manager.create(band=(400e6, 800e6), strategy="bursty-weighted",
                       targets=[s.sensor_id for s in sensors])
    report = manager.start(c.campaign_id)
    assert sorted(report.acked) == ["sn-0", "sn-1", "sn-2"]
    assert report.unreachable == []
    for s in sensors:
        assert s.config.band == (400e6, 800e6)
        assert s.config.strategy == "bursty-weighted"
        assert s.config.pipeline == "psd"


def test_fanout_partial_failure(control_plane):
    broker, registry, manager = control_plane
    for i in range(3):
        registry.register("alice", 0, 0, sensor_id=f"sn-{i}")
    FakeSensor(broker, "sn-0")
    FakeSensor(broker, "sn-2")          # sn-1 registered but silent
    c = manager.create(band=(400e6, 800e6), targets=["sn-0", "sn-1", "sn-2"])
    t0 = time.monotonic()
    report = manager.start(c.campaign_id)
    assert sorted(report.acked) == ["sn-0", "sn-2"]
    assert report.unreachable == ["sn-1"]
    assert c.state == "running"
    assert time.monotonic() - t0 < 3.0


def test_unknown_target_reported_unreachable(control_plane):
    _, registry, manager = control_plane
    registry.register("alice", 0, 0, sensor_id="sn-real")
    c = manager.create(band=(400e6, 800e6), targets=["sn-real", "sn-ghost"])
    report = manager.start(c.campaign_id)
    assert "sn-ghost" in report.unreachable


def test_campaign_state_machine(control_plane):
    _, _, manager = control_plane
    c = manager.create(band=(400e6, 800e6))
    with pytest.raises(StateError):
        manager.stop(c.campaign_id)          # not running yet
    manager.start(c.campaign_id)
    with pytest.raises(StateError):
        manager.start(c.campaign_id)         # already running
    manager.stop(c.campaign_id)
    assert c.state == "stopped"
    with pytest.raises(StateError):
        manager.start(c.campaign_id)         # stopped is terminal
    with pytest.raises(StateError):
        manager.stop(c.campaign_id)


def test_broker_per_topic_ordering():
    broker = Broker()
    got = []
    done = threading.Event()
    broker.subscribe("t/1", lambda t, p: (got.append(p["i"]),
                                          done.set() if p["i"] == 99 else None))
    for i in range(100):
        broker.publish("t/1", {"i": i})
    assert done.wait(2.0)
    assert got == list(range(100))
    broker.close()
