"""Mono PCM audio: WAV file I/O, linear resampling, fixed-length segmentation.

Every downstream stage consumes :class:`AudioClip` values. Clips are
immutable, hold float64 amplitudes in [-1, 1], and carry their sample rate.
WAV support is deliberately narrow: 16-bit integer PCM, mono or stereo in,
mono out.
"""

from __future__ import annotations

import enum
import struct
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import UnsupportedWavError, WavFormatError

#: Canonical processing rate; all pipelines resample on entry.
CANONICAL_RATE = 16_000
#: Canonical clip duration in seconds (80000 samples at the canonical rate).
CANONICAL_SECONDS = 5.0

_PCM_FULL_SCALE = 32768.0


class ClipLabel(enum.IntEnum):
    """The two classification targets. Codes are part of the wire/report format."""

    CLEAN = 0
    INFESTED = 1

    @classmethod
    def from_name(cls, name: str) -> "ClipLabel":
        try:
            return cls[name.upper()]
        except KeyError:
            raise ValueError(f"unknown label {name!r}") from None


@dataclass(frozen=True)
class AudioClip:
    """Immutable mono audio. Amplitudes are clamped to [-1, 1] on creation."""

    samples: np.ndarray
    sample_rate: int
    source_id: str | None = None

    def __post_init__(self):
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        samples = np.clip(np.asarray(self.samples, dtype=np.float64), -1.0, 1.0)
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate


def pcm16_to_float(pcm: np.ndarray) -> np.ndarray:
    """Map int16 samples to [-1, 1) by division by 32768."""
    return np.asarray(pcm, dtype=np.float64) / _PCM_FULL_SCALE


def float_to_pcm16(samples: np.ndarray) -> np.ndarray:
    """Quantize [-1, 1] amplitudes to int16. +1.0 saturates to 32767."""
    scaled = np.rint(np.asarray(samples, dtype=np.float64) * _PCM_FULL_SCALE)
    return np.clip(scaled, -32768, 32767).astype("<i2")


def read_wav_pcm16(path: str | Path) -> tuple[np.ndarray, int]:
    """Read a 16-bit PCM WAV as raw int16 mono samples plus its rate.

    Stereo input is averaged per frame (mean rounded to nearest integer).
    Raises WavFormatError for malformed containers and UnsupportedWavError
    for encodings other than 16-bit integer PCM.
    """
    try:
        with wave.open(str(path), "rb") as wav:
            n_channels = wav.getnchannels()
            sample_width = wav.getsampwidth()
            comp_type = wav.getcomptype()
            rate = wav.getframerate()
            raw = wav.readframes(wav.getnframes())
    except wave.Error as exc:
        # The stdlib reports non-PCM format tags (float=3, a-law=6, ...) as
        # "unknown format: N"; anything else is a broken container.
        if str(exc).startswith("unknown format"):
            raise UnsupportedWavError(f"{path}: {exc}") from exc
        raise WavFormatError(f"{path}: {exc}") from exc
    except (EOFError, struct.error) as exc:
        raise WavFormatError(f"{path}: truncated or corrupt WAV ({exc})") from exc

    if comp_type != "NONE":
        raise UnsupportedWavError(f"{path}: compressed WAV ({comp_type}) not supported")
    if sample_width != 2:
        raise UnsupportedWavError(
            f"{path}: only 16-bit PCM supported, got {8 * sample_width}-bit"
        )
    if rate <= 0:
        raise WavFormatError(f"{path}: non-positive sample rate {rate}")

    data = np.frombuffer(raw, dtype="<i2")
    if n_channels > 1:
        frames = len(data) // n_channels
        data = data[: frames * n_channels].reshape(frames, n_channels)
        data = np.rint(data.mean(axis=1)).astype("<i2")
    return data, rate


def load_wav(path: str | Path) -> AudioClip:
    """Load a 16-bit PCM WAV file as a mono AudioClip."""
    pcm, rate = read_wav_pcm16(path)
    return AudioClip(pcm16_to_float(pcm), rate, source_id=str(path))


def save_wav(clip: AudioClip, path: str | Path) -> None:
    """Write a clip as mono 16-bit PCM WAV (little-endian RIFF/WAVE)."""
    pcm = float_to_pcm16(clip.samples)
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(clip.sample_rate)
        wav.writeframes(pcm.tobytes())


def resample_linear(clip: AudioClip, target_rate: int) -> AudioClip:
    """Resample by linear interpolation; output length = round(n * target/source).

    Sample i of the output is taken at source position i * source/target,
    with edge-hold beyond the final input sample. Equal rates return the
    clip unchanged.
    """
    if target_rate <= 0:
        raise ValueError(f"target_rate must be positive, got {target_rate}")
    if target_rate == clip.sample_rate:
        return clip
    n_in = len(clip)
    n_out = int(round(n_in * target_rate / clip.sample_rate))
    if n_in == 0 or n_out == 0:
        return AudioClip(np.zeros(n_out), target_rate, source_id=clip.source_id)
    positions = np.arange(n_out) * (clip.sample_rate / target_rate)
    out = np.interp(positions, np.arange(n_in), clip.samples)
    return AudioClip(out, target_rate, source_id=clip.source_id)


def segment_clip(clip: AudioClip, length_s: float) -> list[AudioClip]:
    """Cut into consecutive non-overlapping windows of length_s seconds.

    The final short remainder is zero-padded to full length. An empty clip
    yields a single all-zero segment. Every segment has exactly
    round(length_s * sample_rate) samples.
    """
    if length_s <= 0:
        raise ValueError(f"length_s must be positive, got {length_s}")
    seg_len = int(round(length_s * clip.sample_rate))
    n = len(clip)
    n_segments = max(1, -(-n // seg_len))  # ceil division, at least one
    segments = []
    for i in range(n_segments):
        chunk = clip.samples[i * seg_len : (i + 1) * seg_len]
        if len(chunk) < seg_len:
            chunk = np.concatenate([chunk, np.zeros(seg_len - len(chunk))])
        suffix = f"#{i}" if n_segments > 1 else ""
        source = f"{clip.source_id}{suffix}" if clip.source_id else None
        segments.append(AudioClip(chunk, clip.sample_rate, source_id=source))
    return segments
