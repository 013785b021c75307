"""In-process publish-subscribe broker for the control plane.

Topic strings follow the usual slash-separated convention
(``control/<sensor_id>/cmd``) so they stay compatible with external
brokers.  Delivery contract: at-least-once, per-topic FIFO ordering.
A single dispatcher thread drains a global queue, which makes the
ordering guarantee trivial; subscriber callbacks are expected to be
quick or to hand off to their own queues.
"""

from __future__ import annotations

import queue
import threading
from typing import Callable


class Subscription:
    def __init__(self, broker: "Broker", pattern: str,
                 callback: Callable[[str, dict], None]):
        self.broker = broker
        self.pattern = pattern
        self.callback = callback
        self.active = True

    def cancel(self) -> None:
        self.active = False
        self.broker._remove(self)

    def matches(self, topic: str) -> bool:
        if self.pattern == topic:
            return True
        # MQTT-style trailing multi-level wildcard.
        if self.pattern.endswith("/#"):
            return topic.startswith(self.pattern[:-1]) or topic == self.pattern[:-2]
        if self.pattern == "#":
            return True
        return False


class Broker:
    def __init__(self):
        self._subs: list[Subscription] = []
        self._lock = threading.Lock()
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._dispatch, daemon=True,
                                        name="broker-dispatch")
        self._closed = threading.Event()
        self._thread.start()

    def subscribe(self, pattern: str,
                  callback: Callable[[str, dict], None]) -> Subscription:
        sub = Subscription(self, pattern, callback)
        with self._lock:
            self._subs.append(sub)
        return sub

    def publish(self, topic: str, payload: dict) -> None:
        self._queue.put((topic, payload))

    def _remove(self, sub: Subscription) -> None:
        with self._lock:
            if sub in self._subs:
                self._subs.remove(sub)

    def _dispatch(self) -> None:
        while not self._closed.is_set():
            try:
                topic, payload = self._queue.get(timeout=0.1)
            except queue.Empty:
                continue
            with self._lock:
                targets = [s for s in self._subs if s.active and s.matches(topic)]
            for sub in targets:
                try:
                    sub.callback(topic, payload)
                except Exception:
                    # A broken subscriber must not stall the fleet.
                    pass

    def drain(self, timeout: float = 2.0) -> bool:
        """Block until the queue is empty (test helper)."""
        import time
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self._queue.empty():
                return True
            time.sleep(0.005)
        return self._queue.empty()

    def close(self) -> None:
        self._closed.set()
        self._thread.join(timeout=1)
