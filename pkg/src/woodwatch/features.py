"""MFCC feature extraction.

Turns an AudioClip into a T x 40 coefficient matrix (inputs for the
sequence models) and its 40-dim time mean (input for the dense baseline).

The chain per frame: reflect-padded centered framing with a periodic Hann
window, one-sided power spectrum, Slaney-scale triangular mel filterbank
with area normalization, floor-clamped dB conversion, orthonormal DCT-II
keeping the first 40 coefficients. All arithmetic is float64 and every
stage is pinned exactly so independent implementations agree bit-for-bit
in structure and to tight tolerances in value.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft

from .audio import AudioClip, ClipLabel

_MEL_BREAK_HZ = 1000.0
_MEL_BREAK = 15.0  # mel value at 1 kHz: 3 * 1000 / 200
_MEL_LOG_STEP = math.log(6.4) / 27.0


@dataclass(frozen=True)
class FeatureConfig:
    """Extraction parameters. Defaults are the canonical pipeline settings."""

    fft_size: int = 2048
    hop: int = 512
    n_mels: int = 128
    fmin: float = 0.0
    fmax: float = 8000.0
    n_mfcc: int = 40
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise ValueError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.hop < 1:
            raise ValueError(f"hop must be positive, got {self.hop}")
        if not 0.0 <= self.fmin < self.fmax:
            raise ValueError(f"need 0 <= fmin < fmax, got {self.fmin}, {self.fmax}")
        if not 1 <= self.n_mfcc <= self.n_mels:
            raise ValueError(f"need 1 <= n_mfcc <= n_mels, got {self.n_mfcc}, {self.n_mels}")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")

    def to_dict(self) -> dict:
        return {
            "fft_size": self.fft_size,
            "hop": self.hop,
            "n_mels": self.n_mels,
            "fmin": self.fmin,
            "fmax": self.fmax,
            "n_mfcc": self.n_mfcc,
            "log_floor": self.log_floor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureConfig":
        return cls(**d)


@dataclass(frozen=True)
class MfccMatrix:
    """Frame-wise coefficients, shape [T, n_mfcc], plus frame center times."""

    values: np.ndarray
    frame_times: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        times = np.asarray(self.frame_times, dtype=np.float64)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        if len(times) != values.shape[0]:
            raise ValueError("frame_times length must match frame count")
        if not np.all(np.isfinite(values)):
            raise ValueError("MFCC values must be finite")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "frame_times", times)

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class StandardizeStats:
    """Per-coefficient mean/std, fit on training data only."""

    mean: np.ndarray
    std: np.ndarray

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizeStats":
        return cls(np.asarray(d["mean"], dtype=np.float64),
                   np.asarray(d["std"], dtype=np.float64))


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window w[k] = 0.5 - 0.5*cos(2*pi*k/n)."""
    if n < 1:
        raise ValueError(f"window length must be >= 1, got {n}")
    k = np.arange(n)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * k / n)


@functools.lru_cache(maxsize=8)
def _cached_window(n: int) -> np.ndarray:
    w = hann_window(n)
    w.setflags(write=False)
    return w


def frame_signal(clip: AudioClip, cfg: FeatureConfig) -> np.ndarray:
    """Centered, windowed frames, shape [T, fft_size], T = 1 + len // hop.

    The signal is reflect-padded by fft_size/2 on both ends so frame i is
    centered on sample i * hop. Frames of an empty clip degrade to one
    all-zero frame.
    """
    x = clip.samples
    n_fft, hop = cfg.fft_size, cfg.hop
    if len(x) == 0:
        return np.zeros((1, n_fft))
    pad = n_fft // 2
    padded = np.pad(x, pad, mode="reflect")
    n_frames = 1 + len(x) // hop
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop][:n_frames]
    return frames * _cached_window(n_fft)


def power_spectrum(frames: np.ndarray) -> np.ndarray:
    """One-sided squared-magnitude DFT, bins 0 .. fft_size/2 along the last axis."""
    spectrum = np.fft.rfft(np.asarray(frames, dtype=np.float64), axis=-1)
    return np.abs(spectrum) ** 2


def hz_to_mel(hz):
    """Slaney mel scale: linear below 1 kHz, logarithmic above."""
    hz = np.asarray(hz, dtype=np.float64)
    if np.any(hz < 0):
        raise ValueError("frequency must be non-negative")
    mel = 3.0 * hz / 200.0
    log_region = hz >= _MEL_BREAK_HZ
    mel = np.where(log_region, _MEL_BREAK + np.log(np.maximum(hz, _MEL_BREAK_HZ) / _MEL_BREAK_HZ) / _MEL_LOG_STEP, mel)
    return mel if mel.ndim else float(mel)


def mel_to_hz(mel):
    """Exact inverse of hz_to_mel."""
    mel = np.asarray(mel, dtype=np.float64)
    if np.any(mel < 0):
        raise ValueError("mel value must be non-negative")
    hz = 200.0 * mel / 3.0
    log_region = mel >= _MEL_BREAK
    hz = np.where(log_region, _MEL_BREAK_HZ * np.exp(_MEL_LOG_STEP * (mel - _MEL_BREAK)), hz)
    return hz if hz.ndim else float(hz)


@functools.lru_cache(maxsize=8)
def mel_filterbank(cfg: FeatureConfig, sample_rate: int) -> np.ndarray:
    """Triangular mel filters, shape [n_mels, fft_size/2 + 1].

    n_mels + 2 edges are equally spaced in mel between fmin and fmax;
    filter i rises from edge i to edge i+1 and falls to edge i+2, evaluated
    at the FFT bin center frequencies and scaled by 2 / (hz span) so each
    filter integrates to roughly unit area.
    """
    if cfg.fmax > sample_rate / 2:
        raise ValueError(f"fmax {cfg.fmax} exceeds Nyquist {sample_rate / 2}")
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2))
    bin_hz = np.arange(cfg.fft_size // 2 + 1) * (sample_rate / cfg.fft_size)

    lower = edges_hz[:-2, None]
    center = edges_hz[1:-1, None]
    upper = edges_hz[2:, None]
    rising = (bin_hz[None, :] - lower) / (center - lower)
    falling = (upper - bin_hz[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    weights *= 2.0 / (upper - lower)
    weights.setflags(write=False)
    return weights


def power_to_db(power, log_floor: float = 1e-10):
    """10*log10(max(power, floor)). No top-end dynamic-range clamp."""
    return 10.0 * np.log10(np.maximum(power, log_floor))


def dct2_ortho(x: np.ndarray, keep: int) -> np.ndarray:
    """Orthonormal DCT-II along the last axis, truncated to `keep` coefficients."""
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[-1]
    if not 1 <= keep <= n:
        raise ValueError(f"keep must be in [1, {n}], got {keep}")
    return scipy.fft.dct(x, type=2, norm="ortho", axis=-1)[..., :keep]


def mfcc_frames(clip: AudioClip, cfg: FeatureConfig = FeatureConfig()) -> MfccMatrix:
    """Full pipeline: clip at the canonical rate -> [T, n_mfcc] coefficient matrix."""
    frames = frame_signal(clip, cfg)
    spectra = power_spectrum(frames)
    filterbank = mel_filterbank(cfg, clip.sample_rate)
    mel_power = spectra @ filterbank.T
    mel_db = power_to_db(mel_power, cfg.log_floor)
    coeffs = dct2_ortho(mel_db, cfg.n_mfcc)
    times = np.arange(len(frames)) * (cfg.hop / clip.sample_rate)
    return MfccMatrix(coeffs, times)


def mfcc_mean(matrix: MfccMatrix) -> np.ndarray:
    """Arithmetic mean across frames; the fixed-length per-clip feature vector."""
    if matrix.n_frames < 1:
        raise ValueError("cannot average an empty coefficient matrix")
    return matrix.values.mean(axis=0)


def fit_standardize(matrices) -> StandardizeStats:
    """Per-coefficient mean/std over all frames of the training matrices.

    Population std; entries below 1e-8 are replaced by 1 so constant
    coefficients pass through unscaled.
    """
    arrays = [m.values if isinstance(m, MfccMatrix) else np.asarray(m) for m in matrices]
    if not arrays:
        raise ValueError("training set must be non-empty")
    stacked = np.concatenate([a.reshape(-1, a.shape[-1]) for a in arrays], axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    std = np.where(std < 1e-8, 1.0, std)
    return StandardizeStats(mean, std)


def apply_standardize(matrix, stats: StandardizeStats) -> np.ndarray:
    """(x - mean) / std per coefficient; accepts [T, C] or [N, T, C] arrays."""
    values = matrix.values if isinstance(matrix, MfccMatrix) else np.asarray(matrix, dtype=np.float64)
    return (values - stats.mean) / stats.std


# ---------------------------------------------------------------------------
# Feature dump container: one record per clip, JSON for inspectability.

@dataclass
class FeatureSet:
    """A uniform-T batch of per-clip coefficient matrices with labels."""

    ids: list[str]
    labels: np.ndarray           # int codes per ClipLabel; -1 where unknown
    matrices: np.ndarray         # [N, T, n_mfcc]
    config: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.matrices = np.asarray(self.matrices, dtype=np.float64)
        if self.matrices.ndim != 3:
            raise ValueError("matrices must be [N, T, n_mfcc]")
        if not (len(self.ids) == len(self.labels) == len(self.matrices)):
            raise ValueError("ids, labels and matrices must have equal length")

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def mean_vectors(self) -> np.ndarray:
        """[N, n_mfcc] time-mean features for the dense baseline."""
        return self.matrices.mean(axis=1)


_LABEL_NAMES = {ClipLabel.CLEAN: "clean", ClipLabel.INFESTED: "infested"}


def save_features(path: str | Path, features: FeatureSet) -> None:
    records = []
    for i, clip_id in enumerate(features.ids):
        label = int(features.labels[i])
        records.append({
            "id": clip_id,
            "label": _LABEL_NAMES[ClipLabel(label)] if label >= 0 else None,
            "t": int(features.matrices.shape[1]),
            "n_mfcc": int(features.matrices.shape[2]),
            "values": features.matrices[i].reshape(-1).tolist(),
        })
    payload = {"config": features.config.to_dict(), "records": records}
    Path(path).write_text(json.dumps(payload))


def load_features(path: str | Path) -> FeatureSet:
    payload = json.loads(Path(path).read_text())
    cfg = FeatureConfig.from_dict(payload["config"])
    ids, labels, matrices = [], [], []
    for rec in payload["records"]:
        ids.append(rec["id"])
        labels.append(int(ClipLabel.from_name(rec["label"])) if rec["label"] else -1)
        matrices.append(np.asarray(rec["values"], dtype=np.float64).reshape(rec["t"], rec["n_mfcc"]))
    return FeatureSet(ids, np.asarray(labels), np.stack(matrices), cfg)
