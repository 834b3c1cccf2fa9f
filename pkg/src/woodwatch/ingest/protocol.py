"""Framed-PCM wire protocol for sensor audio.

Frame layout, all little-endian:

    offset  size  field
    0       4     magic "WBF1"
    4       8     device_id (u64)
    12      4     seq (u32, monotonically increasing per device)
    16      4     sample_rate (u32, Hz)
    20      4     payload length in bytes (u32, even)
    24      n     payload: 16-bit signed PCM samples
    24+n    4     CRC-32 over everything before it

The checksum is the ubiquitous reflected CRC-32 (polynomial 0x04C11DB7,
init and final XOR 0xFFFFFFFF), i.e. exactly what zlib computes.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

from ..errors import IntegrityError, ProtocolError, TruncationError

FRAME_MAGIC = b"WBF1"
_HEADER = struct.Struct("<4sQIII")
HEADER_SIZE = _HEADER.size  # 24
CRC_SIZE = 4

_U32_MAX = 2**32 - 1
_U64_MAX = 2**64 - 1


def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


@dataclass(frozen=True)
class DeviceFrame:
    device_id: int
    seq: int
    sample_rate: int
    payload: bytes

    def __post_init__(self):
        if not 0 <= self.device_id <= _U64_MAX:
            raise ValueError(f"device_id out of u64 range: {self.device_id}")
        if not 0 <= self.seq <= _U32_MAX:
            raise ValueError(f"seq out of u32 range: {self.seq}")
        if not 0 < self.sample_rate <= _U32_MAX:
            raise ValueError(f"sample_rate out of range: {self.sample_rate}")
        if len(self.payload) % 2 != 0:
            raise ValueError("payload must hold whole 16-bit samples (even byte length)")

    @property
    def n_samples(self) -> int:
        return len(self.payload) // 2


def encode_frame(frame: DeviceFrame) -> bytes:
    head = _HEADER.pack(FRAME_MAGIC, frame.device_id, frame.seq, frame.sample_rate, len(frame.payload))
    body = head + frame.payload
    return body + struct.pack("<I", crc32(body))


def decode_frame(buf: bytes) -> DeviceFrame:
    """Decode one complete frame; the buffer must contain exactly the frame."""
    if len(buf) < HEADER_SIZE:
        raise TruncationError(f"frame header needs {HEADER_SIZE} bytes, got {len(buf)}")
    magic, device_id, seq, sample_rate, payload_len = _HEADER.unpack_from(buf)
    if magic != FRAME_MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    expected = HEADER_SIZE + payload_len + CRC_SIZE
    if len(buf) < expected:
        raise TruncationError(f"frame declares {expected} bytes, got {len(buf)}")
    if len(buf) > expected:
        raise ProtocolError(f"frame overrun: {len(buf)} bytes, expected {expected}")
    if payload_len % 2 != 0:
        raise ProtocolError(f"odd payload length {payload_len}")
    body = buf[: HEADER_SIZE + payload_len]
    (stated_crc,) = struct.unpack_from("<I", buf, HEADER_SIZE + payload_len)
    if crc32(body) != stated_crc:
        raise IntegrityError(
            f"crc mismatch on frame seq={seq} device={device_id}"
        )
    if sample_rate == 0:
        raise ProtocolError("zero sample_rate")
    return DeviceFrame(device_id=device_id, seq=seq, sample_rate=sample_rate,
                       payload=bytes(buf[HEADER_SIZE : HEADER_SIZE + payload_len]))


def read_frame(stream) -> DeviceFrame | None:
    """Read one frame from a blocking file-like stream.

    Returns None on a clean end-of-stream (no bytes at a frame boundary).
    Raises TruncationError if the stream ends mid-frame; other decode
    errors propagate as in decode_frame.
    """
    head = _read_exact(stream, HEADER_SIZE, allow_empty=True)
    if head is None:
        return None
    magic = head[:4]
    if magic != FRAME_MAGIC:
        raise ProtocolError(f"bad frame magic {magic!r}")
    (payload_len,) = struct.unpack_from("<I", head, 20)
    if payload_len % 2 != 0:
        raise ProtocolError(f"odd payload length {payload_len}")
    rest = _read_exact(stream, payload_len + CRC_SIZE)
    return decode_frame(head + rest)


def _read_exact(stream, n: int, allow_empty: bool = False) -> bytes | None:
    chunks = b""
    while len(chunks) < n:
        piece = stream.read(n - len(chunks))
        if not piece:
            if not chunks and allow_empty:
                return None
            raise TruncationError(f"stream ended after {len(chunks)} of {n} bytes")
        chunks += piece
    return chunks
