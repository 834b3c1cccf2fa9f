"""Concurrent TCP ingestion: assemble device streams into clips, classify, persist.

One session per device connection. Validated frames are appended to the
device's sample buffer in sequence order; sequence gaps are zero-filled
(sized by the revealing frame) and counted, duplicates are dropped. Every
time a full clip's worth of samples accumulates, the clip is resampled to
the canonical rate if needed, featurized, classified with the loaded
checkpoint, and appended to the JSON-lines store by the single writer
thread. Malformed frames are counted, never fatal.
"""

from __future__ import annotations

import logging
import queue
import socketserver
import threading
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from ..audio import AudioClip, CANONICAL_RATE, pcm16_to_float, resample_linear, save_wav
from ..errors import IntegrityError, ProtocolError, ServerStartupError, TruncationError
from ..features import FeatureConfig, StandardizeStats, apply_standardize, mfcc_frames, mfcc_mean
from ..models import ModelKind, predict
from ..nn import load_checkpoint
from . import protocol
from .store import DetectionRecord, append_records

log = logging.getLogger(__name__)

_STOP = object()


class _DeviceSession:
    """Reassembly state for one device connection."""

    def __init__(self, clip_seconds: float):
        self.clip_seconds = clip_seconds
        self.device_id: int | None = None
        self.sample_rate: int | None = None
        self.next_seq = 0
        self.chunks: list[np.ndarray] = []
        self.buffered = 0
        self.stream_position = 0  # absolute sample index of the next clip start
        self.clip_index = 0

    @property
    def clip_samples(self) -> int:
        return int(round(self.clip_seconds * self.sample_rate))

    def accept(self, frame: protocol.DeviceFrame, stats: "_Stats") -> list[np.ndarray]:
        """Fold one validated frame in; returns any completed clips."""
        if self.device_id is None:
            self.device_id = frame.device_id
            self.sample_rate = frame.sample_rate
        if frame.device_id != self.device_id or frame.sample_rate != self.sample_rate:
            stats.bump("protocol_errors")
            return []
        if frame.seq < self.next_seq:
            stats.bump("duplicate_frames")
            return []
        samples = np.frombuffer(frame.payload, dtype="<i2")
        if frame.seq > self.next_seq:
            missing = frame.seq - self.next_seq
            self.chunks.append(np.zeros(missing * len(samples), dtype="<i2"))
            self.buffered += missing * len(samples)
            stats.bump("sequence_gaps")
        self.chunks.append(samples)
        self.buffered += len(samples)
        self.next_seq = frame.seq + 1

        clips = []
        if self.buffered >= self.clip_samples:
            buffer = np.concatenate(self.chunks)
            while len(buffer) >= self.clip_samples:
                clips.append(buffer[: self.clip_samples])
                buffer = buffer[self.clip_samples :]
            self.chunks = [buffer] if len(buffer) else []
            self.buffered = len(buffer)
        return clips


class _Stats:
    def __init__(self):
        self._lock = threading.Lock()
        self._counts: dict[str, int] = {
            "frames_ok": 0,
            "integrity_errors": 0,
            "protocol_errors": 0,
            "duplicate_frames": 0,
            "sequence_gaps": 0,
            "records_written": 0,
            "classify_errors": 0,
        }

    def bump(self, key: str, by: int = 1) -> None:
        with self._lock:
            self._counts[key] += by

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        server: IngestServer = self.server.owner
        session = _DeviceSession(server.clip_seconds)
        while True:
            try:
                frame = protocol.read_frame(self.rfile)
            except IntegrityError:
                server.stats.bump("integrity_errors")
                continue
            except TruncationError:
                break
            except ProtocolError:
                server.stats.bump("protocol_errors")
                break  # cannot resync after a framing violation
            if frame is None:
                break
            server.stats.bump("frames_ok")
            for clip_pcm in session.accept(frame, server.stats):
                server.process_clip(session, clip_pcm)


class _TCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class IngestServer:
    """Owns the socket, the classifier, and the single store writer."""

    def __init__(self, port: int, checkpoint_path: str | Path, store_path: str | Path,
                 archive_dir: str | Path | None = None, clip_seconds: float = 5.0,
                 host: str = "127.0.0.1"):
        self.clip_seconds = clip_seconds
        self.store_path = Path(store_path)
        self.archive_dir = Path(archive_dir) if archive_dir else None
        self.stats = _Stats()

        checkpoint = load_checkpoint(checkpoint_path)
        self._graph = checkpoint.graph
        self._kind = ModelKind(checkpoint.kind)
        self._checkpoint_id = checkpoint.digest
        self._feature_config = (FeatureConfig.from_dict(checkpoint.feature_config)
                                if checkpoint.feature_config else FeatureConfig())
        self._stats_norm = (StandardizeStats.from_dict(checkpoint.feature_stats)
                            if checkpoint.feature_stats else None)
        if self._kind is not ModelKind.DNN_MEAN and self._stats_norm is None:
            raise ServerStartupError(
                f"checkpoint {checkpoint_path} lacks feature standardization stats"
            )

        try:
            with open(self.store_path, "a", encoding="utf-8"):
                pass
        except OSError as exc:
            raise ServerStartupError(f"store not writable: {exc}") from exc
        if self.archive_dir:
            self.archive_dir.mkdir(parents=True, exist_ok=True)

        try:
            self._tcp = _TCPServer((host, port), _Handler)
        except OSError as exc:
            raise ServerStartupError(f"cannot bind {host}:{port}: {exc}") from exc
        self._tcp.owner = self
        self._queue: queue.Queue = queue.Queue()
        self._writer = threading.Thread(target=self._write_loop, name="store-writer", daemon=True)
        self._serve_thread: threading.Thread | None = None

    @property
    def port(self) -> int:
        return self._tcp.server_address[1]

    def start(self) -> None:
        self._writer.start()
        self._serve_thread = threading.Thread(target=self._tcp.serve_forever,
                                              name="ingest-accept", daemon=True)
        self._serve_thread.start()

    def stop(self) -> None:
        self._tcp.shutdown()
        self._tcp.server_close()
        if self._serve_thread:
            self._serve_thread.join(timeout=5)
        self._queue.put(_STOP)
        self._writer.join(timeout=5)

    # -- classification path -------------------------------------------------

    def classify_pcm(self, pcm: np.ndarray, sample_rate: int) -> tuple[str, float]:
        """Label and P(infested) for one clip of int16 samples."""
        clip = AudioClip(pcm16_to_float(pcm), sample_rate)
        if sample_rate != CANONICAL_RATE:
            clip = resample_linear(clip, CANONICAL_RATE)
        matrix = mfcc_frames(clip, self._feature_config)
        if self._kind is ModelKind.DNN_MEAN:
            x = mfcc_mean(matrix)[None, :]
        else:
            x = apply_standardize(matrix, self._stats_norm)[None, :, :]
        probs, labels = predict(self._graph, x)
        return ("infested" if labels[0] == 1 else "clean"), float(probs[0, 1])

    def process_clip(self, session: _DeviceSession, clip_pcm: np.ndarray) -> None:
        start = session.stream_position
        session.stream_position += len(clip_pcm)
        index = session.clip_index
        session.clip_index += 1
        try:
            label, p_infested = self.classify_pcm(clip_pcm, session.sample_rate)
        except Exception:
            self.stats.bump("classify_errors")
            log.exception("classification failed for device %s clip %d", session.device_id, index)
            return
        if self.archive_dir:
            clip = AudioClip(pcm16_to_float(clip_pcm), session.sample_rate)
            save_wav(clip, self.archive_dir / f"device{session.device_id}_clip{index:04d}.wav")
        record = DetectionRecord(
            timestamp=datetime.now(timezone.utc).isoformat(),
            device_id=session.device_id,
            clip_start=start,
            clip_length=len(clip_pcm),
            label=label,
            p_infested=p_infested,
            checkpoint_id=self._checkpoint_id,
        )
        self._queue.put(record)

    def _write_loop(self) -> None:
        while True:
            item = self._queue.get()
            if item is _STOP:
                return
            append_records(self.store_path, [item])
            self.stats.bump("records_written")


def serve(port: int, checkpoint_path: str | Path, store_path: str | Path,
          archive_dir: str | Path | None = None, clip_seconds: float = 5.0,
          host: str = "127.0.0.1") -> None:
    """Blocking convenience wrapper: run until interrupted."""
    server = IngestServer(port, checkpoint_path, store_path, archive_dir=archive_dir,
                          clip_seconds=clip_seconds, host=host)
    server.start()
    log.info("ingest server listening on %s:%d", host, server.port)
    try:
        threading.Event().wait()
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
