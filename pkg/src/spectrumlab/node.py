"""Sensor node runtime: one logical thread per simulated sensor.

Each step tunes the next hop, pulls a block from the scene, runs the
configured pipeline and hands the envelope to the emit callable.  An
optional broker subscription applies retune commands between steps and
publishes positive/negative acks; command handling only mutates state
through a queue drained by the node's own loop, keeping the pipelines
single-threaded.
"""

from __future__ import annotations

import queue
import threading
import time
from typing import Callable

from .broker import Broker
from .control import Command, apply_command
from .errors import InvalidArgument
from .scene import Scene, synthesize_block
from .sensor import (
    GainMeta,
    ScanState,
    SensorConfig,
    iq_pipeline,
    next_hop,
    psd_pipeline,
    update_burstiness,
)
from .units import db_to_power_ratio
from .wire import Envelope, envelope_from_iq, envelope_from_segment


class SensorNode:
    def __init__(
        self,
        sensor_id: str,
        scene: Scene,
        config: SensorConfig | None = None,
        emit: Callable[[Envelope], None] | None = None,
        clock: Callable[[], float] | None = None,
        gain: GainMeta | None = None,
        apply_gain: bool = False,
        broker: Broker | None = None,
    ):
        self.sensor_id = sensor_id
        self.scene = scene
        self.config = config or SensorConfig()
        self.emit = emit or (lambda env: None)
        self.clock = clock or (lambda: time.time() * 1000)
        self.gain = gain or GainMeta()
        self.apply_gain = apply_gain
        self.campaign_id = ""
        self.seq = 0
        self.scan = self.config.scan_state()
        self._cmd_queue: queue.Queue = queue.Queue()
        self._broker = broker
        self._stop = threading.Event()
        self._step_lock = threading.Lock()
        self._thread: threading.Thread | None = None
        if broker is not None:
            broker.subscribe(f"control/{sensor_id}/cmd",
                             lambda topic, payload: self._cmd_queue.put(payload))

    # -- command handling ---------------------------------------------------

    def _drain_commands(self) -> None:
        while True:
            try:
                payload = self._cmd_queue.get_nowait()
            except queue.Empty:
                return
            self.handle_command(Command.from_dict(payload))

    def handle_command(self, cmd: Command) -> bool:
        """Apply one command; publish ack/nack when a broker is attached."""
        try:
            new_config = apply_command(self.config, cmd)
        except InvalidArgument as e:
            self._ack(cmd, ok=False, error=str(e))
            return False
        self.config = new_config
        self.campaign_id = "" if cmd.verb == "stop" else cmd.campaign_id
        self.scan = self.config.scan_state()
        self._ack(cmd, ok=True)
        return True

    def _ack(self, cmd: Command, ok: bool, error: str = "") -> None:
        if self._broker is None:
            return
        payload = {"sensor_id": self.sensor_id, "command_id": cmd.command_id,
                   "campaign_id": cmd.campaign_id, "ok": ok}
        if error:
            payload["error"] = error
        self._broker.publish(f"control/{self.sensor_id}/ack", payload)

    # -- measurement loop ---------------------------------------------------

    def step(self) -> Envelope:
        """Tune, capture, process, emit one envelope."""
        with self._step_lock:
            return self._step_locked()

    def _step_locked(self) -> Envelope:
        self._drain_commands()
        cfg = self.config
        freq = next_hop(self.scan)
        t0 = int(self.clock())
        n_samples = cfg.fft_size * cfg.n_avg
        block = synthesize_block(self.scene, self.sensor_id, freq,
                                 cfg.sample_rate, n_samples, t0)
        if self.apply_gain:
            # Emulate the receive chain: system gain scales sample amplitude.
            block.samples = block.samples * db_to_power_ratio(
                self.gain.system_gain_db) ** 0.5

        if cfg.pipeline == "psd":
            seg = psd_pipeline(block, cfg.fft_size, cfg.n_avg, cfg.window,
                               campaign_id=self.campaign_id, gain_meta=self.gain)
            seg.dwell_ms = cfg.dwell_ms
            update_burstiness(self.scan, seg)
            env = envelope_from_segment(seg, self.seq)
        else:
            msg = iq_pipeline(block, cfg.iq_codec, campaign_id=self.campaign_id)
            env = envelope_from_iq(msg, self.seq)
        self.seq += 1
        self.emit(env)
        return env

    def run(self, duration_s: float | None = None,
            realtime: bool = True) -> None:
        """Loop steps with dwell pacing until stopped or the duration ends."""
        self._stop.clear()
        t_end = None if duration_s is None else time.monotonic() + duration_s
        while not self._stop.is_set():
            started = time.monotonic()
            self.step()
            if t_end is not None and time.monotonic() >= t_end:
                break
            if realtime:
                budget = self.config.dwell_ms / 1000 - (time.monotonic() - started)
                if budget > 0:
                    self._stop.wait(budget)

    def start(self, **kwargs) -> threading.Thread:
        self._thread = threading.Thread(target=self.run, kwargs=kwargs,
                                        daemon=True, name=f"sensor-{self.sensor_id}")
        self._thread.start()
        return self._thread

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=2)

    def describe(self) -> dict:
        """Config introspection used by fanout verification."""
        return {"sensor_id": self.sensor_id, "campaign_id": self.campaign_id,
                "seq": self.seq, "config": self.config.to_dict()}
