"""Collector endpoint and durable partitioned message queue.

Envelopes land in one of P partitions (stable hash of sensor_id), each an
append-only segment file, so per-sensor order is preserved and batch and
speed consumers replay independently at their own offsets.

Segment file layout (one file per partition at desk scale):

    magic  8 bytes  b"SLSEG001"
    then per record: [length u32 LE][crc32 u32 LE][payload bytes]

where payload is the envelope's JSON line.  Records are flushed before
the enqueue call returns (ack implies the bytes reached the OS, so they
survive a process crash; fsync happens on close).  Producer retries
after a timeout may duplicate records - dedup is the batch layer's job.
"""

from __future__ import annotations

import hashlib
import io
import socket
import socketserver
import struct
import threading
import time
from pathlib import Path

from .errors import InvalidArgument, OutOfRetention
from .wire import Envelope

MAGIC = b"SLSEG001"
DEFAULT_PARTITIONS = 8
DEFAULT_RETENTION_MS = 7 * 24 * 3600 * 1000
_REC_HEADER = struct.Struct("<II")


def partition_for(sensor_id: str, n_partitions: int) -> int:
    digest = hashlib.sha256(sensor_id.encode()).digest()
    return int.from_bytes(digest[:4], "big") % n_partitions


class _Partition:
    def __init__(self, path: Path):
        self.path = path
        self.lock = threading.Lock()
        self.index: list[tuple[int, int]] = []   # offset -> (byte pos, arrival ms)
        self.base_offset = 0                     # first retained offset
        self.corrupt_skipped = 0
        if not path.exists():
            path.write_bytes(MAGIC)
        self._recover()
        self._fh = open(path, "ab")

    def _recover(self) -> None:
        data = self.path.read_bytes()
        if data[:8] != MAGIC:
            raise InvalidArgument(f"{self.path} is not a segment file")
        pos = 8
        while pos + _REC_HEADER.size <= len(data):
            length, crc = _REC_HEADER.unpack_from(data, pos)
            body_start = pos + _REC_HEADER.size
            if body_start + length > len(data):
                break  # torn tail write: drop
            import zlib
            body = data[body_start:body_start + length]
            if zlib.crc32(body) & 0xFFFFFFFF != crc:
                self.corrupt_skipped += 1
                break  # cannot trust anything after a corrupt record
            self.index.append((pos, 0))
            pos = body_start + length
        # Truncate any torn tail so future appends start clean.
        if pos < len(data):
            with open(self.path, "r+b") as fh:
                fh.truncate(pos)

    def append(self, body: bytes, arrival_ms: int) -> int:
        import zlib
        with self.lock:
            pos = self._fh.tell()
            self._fh.write(_REC_HEADER.pack(len(body), zlib.crc32(body) & 0xFFFFFFFF))
            self._fh.write(body)
            self._fh.flush()
            self.index.append((pos, arrival_ms))
            return self.base_offset + len(self.index) - 1

    def read(self, from_offset: int, max_records: int) -> tuple[list[bytes], int]:
        with self.lock:
            if from_offset < self.base_offset:
                raise OutOfRetention(
                    f"offset {from_offset} expired (base {self.base_offset})"
                )
            head = self.base_offset + len(self.index)
            if from_offset >= head:
                return [], from_offset
            lo = from_offset - self.base_offset
            hi = min(lo + max_records, len(self.index))
            positions = [self.index[i][0] for i in range(lo, hi)]
        out = []
        with open(self.path, "rb") as fh:
            for pos in positions:
                fh.seek(pos)
                length, _crc = _REC_HEADER.unpack(fh.read(_REC_HEADER.size))
                out.append(fh.read(length))
        return out, from_offset + len(out)

    def head(self) -> int:
        with self.lock:
            return self.base_offset + len(self.index)

    def trim(self, cutoff_ms: int) -> int:
        """Drop records that arrived before the cutoff; returns new base."""
        with self.lock:
            keep = 0
            while keep < len(self.index) and self.index[keep][1] < cutoff_ms:
                keep += 1
            self.base_offset += keep
            self.index = self.index[keep:]
            return self.base_offset

    def close(self) -> None:
        with self.lock:
            self._fh.flush()
            try:
                import os
                os.fsync(self._fh.fileno())
            except OSError:
                pass
            self._fh.close()


class PartitionedLog:
    def __init__(self, directory: str | Path,
                 n_partitions: int = DEFAULT_PARTITIONS,
                 retention_ms: int = DEFAULT_RETENTION_MS,
                 clock=None):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.n_partitions = n_partitions
        self.retention_ms = retention_ms
        self._clock = clock or (lambda: time.time() * 1000)
        self.partitions = [
            _Partition(self.dir / f"partition-{i:02d}.seg")
            for i in range(n_partitions)
        ]

    def enqueue(self, envelope: Envelope | str | bytes) -> tuple[int, int]:
        """Durably append; returns (partition_id, offset) once flushed."""
        if isinstance(envelope, Envelope):
            env = envelope
            body = envelope.to_json().encode()
        else:
            env = Envelope.from_json(envelope)   # schema validation
            body = envelope if isinstance(envelope, bytes) else envelope.encode()
        pid = partition_for(env.sensor_id, self.n_partitions)
        offset = self.partitions[pid].append(body, int(self._clock()))
        return pid, offset

    def consume(self, partition_id: int, from_offset: int,
                max_records: int = 1000) -> tuple[list[Envelope], int]:
        if from_offset < 0:
            raise InvalidArgument("from_offset must be >= 0")
        raw, next_offset = self.partitions[partition_id].read(from_offset, max_records)
        return [Envelope.from_json(r) for r in raw], next_offset

    def head(self, partition_id: int) -> int:
        return self.partitions[partition_id].head()

    def enforce_retention(self) -> None:
        cutoff = int(self._clock()) - self.retention_ms
        for p in self.partitions:
            p.trim(cutoff)

    def replay_all(self) -> list[Envelope]:
        """Full retained log across partitions (batch bootstrap path)."""
        out = []
        for pid in range(self.n_partitions):
            offset = self.partitions[pid].base_offset
            while True:
                envs, offset = self.consume(pid, offset, 4096)
                if not envs:
                    break
                out.extend(envs)
        return out

    def close(self) -> None:
        for p in self.partitions:
            p.close()


# --------------------------------------------------------------------------
# Collector socket
# --------------------------------------------------------------------------

class _CollectorHandler(socketserver.StreamRequestHandler):
    def handle(self):
        log: PartitionedLog = self.server.log  # type: ignore[attr-defined]
        while True:
            line = self.rfile.readline()
            if not line:
                return
            line = line.strip()
            if not line:
                continue
            try:
                pid, offset = log.enqueue(line)
                self.wfile.write(f"ok {pid} {offset}\n".encode())
            except InvalidArgument as e:
                self.wfile.write(f"err {e}\n".encode())
            self.wfile.flush()


class CollectorServer(socketserver.ThreadingTCPServer):
    """Accepts newline-delimited envelopes; acks each line with its offset."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, log: PartitionedLog, host: str = "127.0.0.1", port: int = 0):
        super().__init__((host, port), _CollectorHandler)
        self.log = log

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True,
                             name="collector")
        t.start()
        return t


class CollectorClient:
    """Producer side: sends envelopes, waits for the ack, retries once on
    timeout (which may legally duplicate a record)."""

    def __init__(self, host: str, port: int, timeout_s: float = 5.0):
        self.addr = (host, port)
        self.timeout_s = timeout_s
        self._sock: socket.socket | None = None
        self._rfile: io.BufferedReader | None = None
        self._lock = threading.Lock()

    def _connect(self):
        self._sock = socket.create_connection(self.addr, timeout=self.timeout_s)
        self._rfile = self._sock.makefile("rb")

    def send(self, envelope: Envelope) -> None:
        line = (envelope.to_json() + "\n").encode()
        with self._lock:
            for attempt in (0, 1):
                try:
                    if self._sock is None:
                        self._connect()
                    self._sock.sendall(line)
                    ack = self._rfile.readline()
                    if ack.startswith(b"ok"):
                        return
                    raise InvalidArgument(ack.decode(errors="replace").strip())
                except (OSError, socket.timeout):
                    self.close()
                    if attempt == 1:
                        raise

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        self._sock = None
        self._rfile = None
