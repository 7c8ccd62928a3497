"""Feature planes and their assembly into a normalized hyper-image.

Six time-frequency planes share one frame grid (the STFT grid) and are
stacked top to bottom in a fixed order::

    mel (128) | mfcc (20) | chroma (12) | cyclic tempogram (32)
    | spectral contrast (7) | tonnetz (6)                       -> 205 rows
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hyperwave import dsp
from hyperwave.audio_io import AudioBuffer, resample
from hyperwave.dsp import FeatureMatrix
from hyperwave.tensorio import load_tensor, save_tensor

PITCH_CLASSES = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"]
MFCC_FLOOR = 1e-10
LOG_FLOOR = 1e-10
ONSET_RANGE = 1e-8  # 80 dB


@dataclass(frozen=True)
class FeatureConfig:
    sample_rate: int = 22050
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 128
    n_mfcc: int = 20
    n_tempo_bins: int = 32
    tempo_window: int = 128
    tempo_min: float = 30.0
    tempo_max: float = 480.0
    contrast_bands: int = 6
    contrast_alpha: float = 0.02
    contrast_fmin: float = 200.0

    def plane_heights(self):
        return [
            ("mel", self.n_mels),
            ("mfcc", self.n_mfcc),
            ("chroma", 12),
            ("cyclic_tempogram", self.n_tempo_bins),
            ("spectral_contrast", self.contrast_bands + 1),
            ("tonnetz", 6),
        ]

    @property
    def height(self):
        return sum(h for _, h in self.plane_heights())

    def hash(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _power(buf, n_fft, hop):
    return dsp.power(dsp.stft(buf, n_fft, hop)).values


def _mel_power(power, sample_rate, n_fft, n_mels):
    return dsp.mel_filterbank(n_fft, n_mels, sample_rate) @ power


def mel_spectrogram(buf, n_mels=128, n_fft=dsp.N_FFT, hop=dsp.HOP):
    if n_mels < 2:
        raise ValueError("n_mels must be at least 2")
    mel = _mel_power(_power(buf, n_fft, hop), buf.sample_rate, n_fft, n_mels)
    return FeatureMatrix("mel", np.log1p(mel), hop / buf.sample_rate)


def mfcc_from_mel_power(mel_power, n_mfcc):
    return dsp.dct_ii(np.log(mel_power + MFCC_FLOOR), n_mfcc)


def mfcc(buf, n_mfcc=20, n_mels=128, n_fft=dsp.N_FFT, hop=dsp.HOP):
    if n_mfcc > n_mels:
        raise ValueError(f"n_mfcc ({n_mfcc}) exceeds n_mels ({n_mels})")
    mel = _mel_power(_power(buf, n_fft, hop), buf.sample_rate, n_fft, n_mels)
    return FeatureMatrix("mfcc", mfcc_from_mel_power(mel, n_mfcc), hop / buf.sample_rate)


def chroma_map(sample_rate, n_fft):
    """12 x n_bins 0/1 matrix sending each STFT bin to its nearest pitch class.

    The DC bin has no pitch and maps nowhere.
    """
    freqs = dsp.fft_frequencies(sample_rate, n_fft)[1:]
    midi = np.round(69.0 + 12.0 * np.log2(freqs / 440.0)).astype(int)
    mapping = np.zeros((12, n_fft // 2 + 1))
    mapping[midi % 12, np.arange(1, n_fft // 2 + 1)] = 1.0
    return mapping


def chroma_from_power(power, sample_rate, n_fft):
    chroma = chroma_map(sample_rate, n_fft) @ power
    peak = chroma.max(axis=0)
    nonzero = peak > 0
    chroma[:, nonzero] /= peak[nonzero]
    return chroma


def chromagram(buf, n_fft=dsp.N_FFT, hop=dsp.HOP):
    values = chroma_from_power(_power(buf, n_fft, hop), buf.sample_rate, n_fft)
    return FeatureMatrix("chroma", values, hop / buf.sample_rate, bin_labels=list(PITCH_CLASSES))


def onset_envelope(mel_power):
    """Half-wave rectified spectral flux of log mel power, one value per frame (first frame 0).

    The log is floored ONSET_RANGE below the loudest cell, so the envelope
    does not change when the signal is rescaled.
    """
    peak = mel_power.max()
    if peak <= 0:
        return np.zeros(mel_power.shape[1])
    log_mel = np.log(np.maximum(mel_power, peak * ONSET_RANGE))
    flux = np.maximum(0.0, np.diff(log_mel, axis=1)).sum(axis=0)
    return np.concatenate([[0.0], flux])


def cyclic_tempo_classes(n_tempo_bins, reference=60.0):
    """Reference tempo of each cyclic bin; bins tile the octave [60, 120) BPM."""
    return reference * 2.0 ** (np.arange(n_tempo_bins) / n_tempo_bins)


def cyclic_tempogram_from_envelope(envelope, frame_rate, n_tempo_bins, window=128,
                                   tempo_min=30.0, tempo_max=480.0):
    """Fourier tempogram of `envelope` folded onto one tempo octave.

    Each frame analyses a Hann-weighted window of `window` envelope samples
    centred on it (zero beyond the ends, local weighted mean removed). The
    magnitude is evaluated at every tempo ``c * 2**k`` inside
    ``[tempo_min, tempo_max)`` for each cyclic class ``c`` and summed per class.
    """
    if n_tempo_bins < 2:
        raise ValueError("n_tempo_bins must be at least 2")
    n_frames = len(envelope)
    if n_frames < window:
        raise ValueError(
            f"{n_frames} onset frames is shorter than one tempogram window of {window}")
    classes = cyclic_tempo_classes(n_tempo_bins)
    octaves = 2.0 ** np.arange(-8, 9)
    tempi, owner = [], []
    for b, c in enumerate(classes):
        for t in c * octaves:
            if tempo_min <= t < tempo_max:
                tempi.append(t)
                owner.append(b)
    tempi = np.asarray(tempi)
    half = window // 2
    padded = np.pad(envelope, (half, window - half))
    segments = np.lib.stride_tricks.sliding_window_view(padded, window)[:n_frames]
    weights = dsp.hann(window)
    local_mean = segments @ weights / weights.sum()
    weighted = (segments - local_mean[:, None]) * weights
    omega = 2.0 * np.pi * tempi / 60.0 / frame_rate
    basis = np.exp(-1j * np.outer(np.arange(window), omega))
    magnitude = np.abs(weighted @ basis)
    folding = np.zeros((len(tempi), n_tempo_bins))
    folding[np.arange(len(tempi)), owner] = 1.0
    cyclic = (magnitude @ folding).T
    norms = np.linalg.norm(cyclic, axis=0)
    nonzero = norms > 0
    cyclic[:, nonzero] /= norms[nonzero]
    return cyclic


def cyclic_tempogram(buf, n_tempo_bins=32, n_fft=dsp.N_FFT, hop=dsp.HOP, n_mels=128, window=128):
    mel_power = _mel_power(_power(buf, n_fft, hop), buf.sample_rate, n_fft, n_mels)
    values = cyclic_tempogram_from_envelope(
        onset_envelope(mel_power), buf.sample_rate / hop, n_tempo_bins, window)
    labels = [f"{c:.1f}" for c in cyclic_tempo_classes(n_tempo_bins)]
    return FeatureMatrix("cyclic_tempogram", values, hop / buf.sample_rate, bin_labels=labels)


def contrast_band_edges(sample_rate, n_bands, fmin=200.0):
    """``n_bands + 2`` edges: [0, fmin, 2 fmin, ...], last edge at Nyquist."""
    edges = np.concatenate([[0.0], fmin * 2.0 ** np.arange(n_bands + 1)])
    edges[-1] = sample_rate / 2
    return edges


def contrast_from_magnitude(magnitude, sample_rate, n_fft, n_bands=6, alpha=0.02, fmin=200.0):
    if n_bands < 1:
        raise ValueError("n_bands must be at least 1")
    if not 0 < alpha <= 0.5:
        raise ValueError(f"alpha must lie in (0, 0.5], got {alpha}")
    freqs = dsp.fft_frequencies(sample_rate, n_fft)
    edges = contrast_band_edges(sample_rate, n_bands, fmin)
    out = np.empty((n_bands + 1, magnitude.shape[1]))
    for band in range(n_bands + 1):
        lo, hi = edges[band], edges[band + 1]
        last = band == n_bands
        members = (freqs >= lo) & ((freqs <= hi) if last else (freqs < hi))
        if not members.any():
            raise ValueError(f"spectral contrast band {band} [{lo:.1f}, {hi:.1f}) Hz has no FFT bins")
        sub = np.sort(magnitude[members], axis=0)
        k = int(np.ceil(alpha * sub.shape[0]))
        valley = np.log(np.maximum(sub[:k].mean(axis=0), LOG_FLOOR))
        peak = np.log(np.maximum(sub[-k:].mean(axis=0), LOG_FLOOR))
        out[band] = peak - valley
    return out


def spectral_contrast(buf, n_bands=6, alpha=0.02, n_fft=dsp.N_FFT, hop=dsp.HOP, fmin=200.0):
    magnitude = np.abs(dsp.stft(buf, n_fft, hop).bins)
    values = contrast_from_magnitude(magnitude, buf.sample_rate, n_fft, n_bands, alpha, fmin)
    return FeatureMatrix("spectral_contrast", values, hop / buf.sample_rate)


def tonnetz_matrix():
    """6 x 12 tonal-centroid projection: fifths, minor thirds, major thirds."""
    pitch = np.arange(12)
    rows = []
    for radius, step in ((1.0, 7 * np.pi / 6), (1.0, 3 * np.pi / 2), (0.5, 2 * np.pi / 3)):
        rows.append(radius * np.sin(pitch * step))
        rows.append(radius * np.cos(pitch * step))
    return np.array(rows)


def tonnetz(chroma):
    values = chroma.values if isinstance(chroma, FeatureMatrix) else np.asarray(chroma, dtype=float)
    if values.shape[0] != 12:
        raise ValueError(f"tonnetz needs 12 chroma rows, got {values.shape[0]}")
    mass = np.abs(values).sum(axis=0)
    normed = np.zeros_like(values)
    nonzero = mass > 0
    normed[:, nonzero] = values[:, nonzero] / mass[nonzero]
    hop_s = chroma.frame_hop_s if isinstance(chroma, FeatureMatrix) else 0.0
    return FeatureMatrix("tonnetz", tonnetz_matrix() @ normed, hop_s)


@dataclass
class HyperImage:
    pixels: np.ndarray
    planes: list
    norm_stats: list
    source_id: str = ""
    label: str = None
    config_hash: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.pixels.shape

    def plane(self, name):
        row = 0
        for plane_name, height in self.planes:
            if plane_name == name:
                return self.pixels[row:row + height]
            row += height
        raise KeyError(name)

    def sidecar(self):
        return {
            "source_id": self.source_id,
            "label": self.label,
            "planes": [{"name": n, "height": h} for n, h in self.planes],
            "norm_stats": [{"mean": m, "std": s} for m, s in self.norm_stats],
            "config_hash": self.config_hash,
            **self.extra,
        }

    def save(self, stem):
        stem = Path(stem)
        save_tensor(stem.with_suffix(".tnsr"), self.pixels)
        stem.with_suffix(".json").write_text(json.dumps(self.sidecar(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, stem):
        stem = Path(stem)
        meta = json.loads(stem.with_suffix(".json").read_text())
        pixels = load_tensor(stem.with_suffix(".tnsr")).astype(np.float64)
        known = {"source_id", "label", "planes", "norm_stats", "config_hash"}
        return cls(
            pixels=pixels,
            planes=[(p["name"], p["height"]) for p in meta["planes"]],
            norm_stats=[(s["mean"], s["std"]) for s in meta["norm_stats"]],
            source_id=meta["source_id"],
            label=meta["label"],
            config_hash=meta["config_hash"],
            extra={k: v for k, v in meta.items() if k not in known},
        )


def standardize(plane):
    """Zero mean, unit population std over the whole plane; constant planes become zeros."""
    mean = float(plane.mean())
    std = float(plane.std())
    if std <= 1e-12 * max(1.0, abs(mean)):
        return np.zeros_like(plane), (mean, 0.0)
    return (plane - mean) / std, (mean, std)


class PlaneError(ValueError):
    """An extractor failed; `plane` names the hyper-image plane being built."""

    def __init__(self, plane, cause):
        self.plane = plane
        super().__init__(f"{plane}: {cause}")


def extract_planes(buf, config):
    """The six raw (unnormalized) planes on the shared STFT frame grid."""
    c = config
    hop_s = c.hop / buf.sample_rate
    planes = {}

    def run(name, fn):
        try:
            planes[name] = FeatureMatrix(name, fn(), hop_s)
        except ValueError as exc:
            raise PlaneError(name, exc) from exc
        return planes[name].values

    # the STFT feeds every plane; its failures are reported against the first one
    power = run("mel", lambda: dsp.power(dsp.stft(buf, c.n_fft, c.hop)).values)
    mel_power = run("mel", lambda: _mel_power(power, buf.sample_rate, c.n_fft, c.n_mels))
    run("mel", lambda: np.log1p(mel_power))
    run("mfcc", lambda: mfcc_from_mel_power(mel_power, c.n_mfcc))
    chroma = run("chroma", lambda: chroma_from_power(power, buf.sample_rate, c.n_fft))
    run("cyclic_tempogram", lambda: cyclic_tempogram_from_envelope(
        onset_envelope(mel_power), buf.sample_rate / c.hop, c.n_tempo_bins,
        c.tempo_window, c.tempo_min, c.tempo_max))
    run("spectral_contrast", lambda: contrast_from_magnitude(
        np.sqrt(power), buf.sample_rate, c.n_fft, c.contrast_bands,
        c.contrast_alpha, c.contrast_fmin))
    run("tonnetz", lambda: tonnetz(FeatureMatrix("chroma", chroma, hop_s)).values)
    return planes


def build_hyperimage(buf, config=None, label=None):
    config = config or FeatureConfig()
    if buf.sample_rate != config.sample_rate:
        buf = resample(buf, config.sample_rate)
    planes = extract_planes(buf, config)
    rows, stats, layout = [], [], []
    n_frames = None
    for name, height in config.plane_heights():
        plane = planes[name]
        if plane.n_bins != height:
            raise RuntimeError(f"plane {name}: expected {height} rows, got {plane.n_bins}")
        if n_frames is None:
            n_frames = plane.n_frames
        elif plane.n_frames != n_frames:
            raise RuntimeError(f"plane {name}: {plane.n_frames} frames, expected {n_frames}")
        normed, stat = standardize(plane.values)
        rows.append(normed)
        stats.append(stat)
        layout.append((name, height))
    return HyperImage(np.vstack(rows), layout, stats, buf.source_id, label, config.hash())


__all__ = [
    "AudioBuffer",
    "FeatureConfig",
    "HyperImage",
    "PlaneError",
    "build_hyperimage",
    "chromagram",
    "cyclic_tempogram",
    "mel_spectrogram",
    "mfcc",
    "spectral_contrast",
    "tonnetz",
]
