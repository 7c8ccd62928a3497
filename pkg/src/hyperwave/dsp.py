"""Transforms shared by the feature extractors.

Spectrogram layout follows the usual MIR convention: rows are frequency
bins, columns are frames, frame ``t`` is centred on sample ``t * hop``.
"""

from dataclasses import dataclass, field

import numpy as np

N_FFT = 2048
HOP = 512


class NyquistError(ValueError):
    pass


class FilterbankError(ValueError):
    pass


@dataclass
class ComplexSpectrogram:
    bins: np.ndarray
    n_fft: int
    hop: int
    sample_rate: int
    window: str = "hann"

    @property
    def n_frames(self):
        return self.bins.shape[1]


@dataclass
class FeatureMatrix:
    name: str
    values: np.ndarray
    frame_hop_s: float
    bin_labels: list = field(default=None)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError(f"{self.name}: expected a 2-d matrix, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"{self.name}: non-finite entries")

    @property
    def n_bins(self):
        return self.values.shape[0]

    @property
    def n_frames(self):
        return self.values.shape[1]


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def _bit_reverse_permutation(n):
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(x, inverse=False):
    """Radix-2 decimation-in-time FFT over the last axis.

    Leading axes are treated as a batch. The inverse is scaled by 1/N.
    """
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if not _is_power_of_two(n):
        raise ValueError(f"fft length must be a power of two, got {n}")
    if inverse:
        return np.conj(fft(np.conj(x))) / n
    out = x[..., _bit_reverse_permutation(n)]
    batch = out.shape[:-1]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(*batch, n // size, size)
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        out = np.concatenate([even + odd, even - odd], axis=-1).reshape(*batch, n)
        size *= 2
    return out


def hann(n):
    """Periodic Hann window (the DFT-even variant used for analysis)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


WINDOWS = {"hann": hann, "boxcar": np.ones}


def frame_count(n_samples, n_fft, hop):
    """Frames produced by `stft` for a centred, reflection-padded signal."""
    return 1 + (n_samples + 2 * (n_fft // 2) - n_fft) // hop


def stft(buf, n_fft=N_FFT, hop=HOP, window="hann"):
    if not _is_power_of_two(n_fft):
        raise ValueError(f"n_fft must be a power of two, got {n_fft}")
    if not 0 < hop <= n_fft:
        raise ValueError(f"hop must lie in (0, n_fft], got {hop}")
    if window not in WINDOWS:
        raise ValueError(f"unknown window {window!r}")
    pad = n_fft // 2
    if len(buf.samples) <= pad:
        raise ValueError(
            f"buffer of {len(buf.samples)} samples too short for reflection padding of {pad}")
    padded = np.pad(buf.samples, pad, mode="reflect")
    n_frames = frame_count(len(buf.samples), n_fft, hop)
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop][:n_frames]
    spectrum = fft(frames * WINDOWS[window](n_fft))[:, :n_fft // 2 + 1]
    return ComplexSpectrogram(spectrum.T.copy(), n_fft, hop, buf.sample_rate, window)


def fft_frequencies(sample_rate, n_fft):
    return np.arange(n_fft // 2 + 1) * sample_rate / n_fft


def power(spec):
    values = spec.bins.real ** 2 + spec.bins.imag ** 2
    return FeatureMatrix("power", values, spec.hop / spec.sample_rate)


def cqt_frequencies(fmin, bins_per_octave, n_bins):
    return fmin * 2.0 ** (np.arange(n_bins) / bins_per_octave)


def cqt_power(buf, fmin=32.70319566257483, bins_per_octave=12, n_bins=84, hop=HOP):
    """Constant-Q power by direct correlation with per-bin windowed kernels.

    Bin ``k`` uses a Hann-windowed complex exponential of length
    ``ceil(Q * sr / f_k)`` centred on each frame position, normalised by the
    window sum so a unit sinusoid at ``f_k`` gives magnitude 1/2.
    """
    if fmin <= 0:
        raise ValueError("fmin must be positive")
    freqs = cqt_frequencies(fmin, bins_per_octave, n_bins)
    if freqs[-1] >= buf.sample_rate / 2:
        raise NyquistError(
            f"highest CQT bin {freqs[-1]:.1f} Hz not below Nyquist {buf.sample_rate / 2} Hz")
    q = 1.0 / (2.0 ** (1.0 / bins_per_octave) - 1.0)
    lengths = np.ceil(q * buf.sample_rate / freqs).astype(int)
    pad = int(lengths.max()) // 2 + 1
    padded = np.pad(buf.samples, pad)
    n_frames = 1 + len(buf.samples) // hop
    centres = pad + np.arange(n_frames) * hop
    values = np.empty((n_bins, n_frames))
    for k, (f_k, n_k) in enumerate(zip(freqs, lengths)):
        n = np.arange(n_k)
        window = hann(n_k)
        kernel = window * np.exp(-2j * np.pi * f_k * n / buf.sample_rate) / window.sum()
        segments = np.lib.stride_tricks.sliding_window_view(padded, n_k)[centres - n_k // 2]
        response = segments @ kernel
        values[k] = response.real ** 2 + response.imag ** 2
    return FeatureMatrix("cqt", values, hop / buf.sample_rate,
                         bin_labels=[f"{f:.2f}" for f in freqs])


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_frequencies(n_mels, fmin, fmax):
    """The ``n_mels + 2`` band edges, equally spaced in mel."""
    return mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))


def mel_filterbank(n_fft, n_mels, sample_rate, fmin=0.0, fmax=None):
    """Unit-peak triangular filters, one row per mel band."""
    fmax = sample_rate / 2 if fmax is None else fmax
    if not 0 <= fmin < fmax <= sample_rate / 2:
        raise ValueError(f"need 0 <= fmin < fmax <= {sample_rate / 2}, got {fmin}, {fmax}")
    if n_mels < 2:
        raise ValueError("n_mels must be at least 2")
    edges = mel_frequencies(n_mels, fmin, fmax)
    edge_bins = np.round(edges * n_fft / sample_rate).astype(int)
    collided = np.flatnonzero(np.diff(edge_bins) == 0)
    if collided.size:
        i = int(collided[0])
        filt = min(i, n_mels - 1)
        raise FilterbankError(
            f"mel filter {filt}: band edges {edges[i]:.2f} Hz and {edges[i + 1]:.2f} Hz "
            f"fall in the same FFT bin {edge_bins[i]}")
    freqs = fft_frequencies(sample_rate, n_fft)
    lower, centre, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lower) / (centre - lower)
    falling = (upper - freqs) / (upper - centre)
    return np.maximum(0.0, np.minimum(rising, falling))


def dct_ii(m, n_out=None):
    """Orthonormal DCT-II down each column, keeping the first `n_out` rows."""
    m = np.asarray(m, dtype=np.float64)
    n = m.shape[0]
    n_out = n if n_out is None else n_out
    if not 1 <= n_out <= n:
        raise ValueError(f"n_out must lie in [1, {n}], got {n_out}")
    k = np.arange(n_out)[:, None]
    basis = np.cos(np.pi * k * (2 * np.arange(n)[None, :] + 1) / (2 * n))
    basis *= np.sqrt(2.0 / n)
    basis[0] /= np.sqrt(2.0)
    return basis @ m
