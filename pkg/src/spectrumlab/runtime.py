"""Desk-scale deployment harness.

``LocalStack`` wires the whole platform in one process: broker, registry,
campaign manager, collector + partitioned queue, master dataset, batch
jobs, speed layer, serving layer and HTTP API, plus any number of
simulated sensor nodes over a shared scene.

Two operating styles:

* live - sensors run their own threads against the wall clock, the speed
  layer polls, the HTTP server is up.  This is what `spectrumd` runs and
  what the latency/freshness tests measure.

* driven - no threads; tests construct the stack with a ``SimClock`` and
  call ``node.step()`` / ``speed.pump()`` / ``run_batch()`` themselves,
  which makes batch-vs-speed comparisons exact and fast.
"""

from __future__ import annotations

import threading
import time
from pathlib import Path

from .batch import DEFAULT_LEVELS, AggregateStore, MasterStore, build_aggregates
from .broker import Broker
from .control import CampaignManager, SensorRegistry
from .httpd import ApiServer
from .ingest import CollectorClient, CollectorServer, PartitionedLog
from .node import SensorNode
from .scene import Scene
from .sensor import GainMeta, SensorConfig
from .serving import ServingLayer, TokenAuth
from .speed import SpeedLayer


class SimClock:
    """Manually advanced millisecond clock for driven tests."""

    def __init__(self, start_ms: float = 0.0):
        self._now = float(start_ms)
        self._lock = threading.Lock()

    def __call__(self) -> float:
        with self._lock:
            return self._now

    def advance(self, ms: float) -> float:
        with self._lock:
            self._now += ms
            return self._now

    def set(self, ms: float) -> None:
        with self._lock:
            self._now = float(ms)


def wall_clock_ms() -> float:
    return time.time() * 1000


class LocalStack:
    def __init__(
        self,
        scene: Scene,
        data_dir: str | Path,
        clock=None,
        speed_window_ms: int = 5_000,
        speed_f_width_hz: float = 100e3,
        speed_lateness_ms: int = 2_000,
        speed_poll_s: float = 0.25,
        ack_timeout_s: float = 2.0,
        use_collector_socket: bool = False,
        spawn_on_register: bool = False,
        iq_ttl_ms: int = 3_600_000,
    ):
        self.scene = scene
        self.data_dir = Path(data_dir)
        self.clock = clock or wall_clock_ms
        self.spawn_on_register = spawn_on_register

        self.broker = Broker()
        self.registry = SensorRegistry(clock=self.clock)
        self.campaigns = CampaignManager(self.broker, self.registry,
                                         ack_timeout_s=ack_timeout_s)
        self.log = PartitionedLog(self.data_dir / "queue", clock=self.clock)
        self.master = MasterStore(self.data_dir / "master")
        self.aggregates = AggregateStore(self.data_dir / "aggregates")
        self.speed = SpeedLayer(self.log, window_ms=speed_window_ms,
                                f_width_hz=speed_f_width_hz,
                                lateness_ms=speed_lateness_ms, clock=self.clock,
                                poll_s=speed_poll_s)
        self.serving = ServingLayer(self.registry, self.master, self.aggregates,
                                    self.speed, campaigns=self.campaigns,
                                    log=self.log, clock=self.clock,
                                    iq_ttl_ms=iq_ttl_ms)
        self.auth = TokenAuth()
        self.nodes: dict[str, SensorNode] = {}
        self._batch_offsets = [0] * self.log.n_partitions

        self.collector: CollectorServer | None = None
        self._collector_clients: list[CollectorClient] = []
        if use_collector_socket:
            self.collector = CollectorServer(self.log)
            self.collector.start()

        self.api: ApiServer | None = None

    # -- identities -------------------------------------------------------------

    def add_user(self, user_id: str, token: str | None = None) -> str:
        token = token or f"token-{user_id}"
        self.auth.add(token, user_id)
        return token

    # -- sensors ------------------------------------------------------------------

    def _emit_fn(self):
        if self.collector is not None:
            host, port = self.collector.address
            client = CollectorClient(host, port)
            self._collector_clients.append(client)
            return client.send
        return lambda env: self.log.enqueue(env)

    def add_sensor(
        self,
        owner_id: str,
        lat: float = 0.0,
        lon: float = 0.0,
        config: SensorConfig | None = None,
        visibility: str = "public",
        antenna_desc: str = "omni",
        gain: GainMeta | None = None,
        apply_gain: bool = False,
        sensor_id: str | None = None,
        online: bool = True,
    ) -> SensorNode:
        record = self.registry.register(owner_id, lat, lon, antenna_desc,
                                        visibility, sensor_id=sensor_id)
        node = SensorNode(
            sensor_id=record.sensor_id,
            scene=self.scene,
            config=config or SensorConfig(),
            emit=self._emit_fn(),
            clock=self.clock,
            gain=gain,
            apply_gain=apply_gain,
            broker=self.broker,
        )
        self.nodes[record.sensor_id] = node
        if online:
            self.registry.set_status(record.sensor_id, "online")
        return node

    def spawn_node(self, sensor_id: str) -> SensorNode:
        """Attach and start a default node for an HTTP-registered sensor."""
        node = SensorNode(
            sensor_id=sensor_id,
            scene=self.scene,
            config=SensorConfig(),
            emit=self._emit_fn(),
            clock=self.clock,
            broker=self.broker,
        )
        self.nodes[sensor_id] = node
        self.registry.set_status(sensor_id, "online")
        node.start()
        return node

    # -- batch jobs ----------------------------------------------------------------

    def run_batch(self, levels=None, t_range=None) -> dict:
        """Queue -> master -> aggregate tables, one shot."""
        pulled = []
        for pid in range(self.log.n_partitions):
            while True:
                envs, nxt = self.log.consume(pid, self._batch_offsets[pid], 4096)
                if not envs:
                    break
                self._batch_offsets[pid] = nxt
                pulled.extend(envs)
        stats = self.master.compact(pulled)
        tables = build_aggregates(self.master, levels=levels or DEFAULT_LEVELS,
                                  t_range=t_range)
        self.aggregates.publish(tables)
        stats["levels"] = sorted(tables)
        return stats

    # -- lifecycle -------------------------------------------------------------------

    def start_live(self, http: bool = True, start_nodes: bool = True,
                   http_port: int = 0) -> None:
        self.speed.start()
        if start_nodes:
            for node in self.nodes.values():
                node.start()
        if http:
            self.api = ApiServer(self, port=http_port)
            self.api.start()

    def api_url(self) -> str:
        host, port = self.api.address
        return f"http://{host}:{port}"

    def metrics(self) -> dict:
        m = dict(self.speed.metrics)
        m["queue_heads"] = [self.log.head(p) for p in range(self.log.n_partitions)]
        m["master_records"] = self.master.count()
        return m

    def shutdown(self) -> None:
        for node in self.nodes.values():
            node.stop()
        self.speed.stop()
        if self.api is not None:
            self.api.shutdown()
        if self.collector is not None:
            self.collector.shutdown()
        for client in self._collector_clients:
            client.close()
        self.broker.close()
        self.log.close()
        self.master.close()
