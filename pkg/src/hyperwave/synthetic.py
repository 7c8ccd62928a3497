"""Synthetic three-class corpus used for end-to-end checks.

    low    sine mixtures in MIDI 40-55 with clicks at 80 BPM
    high   sine mixtures in MIDI 72-88 with clicks at 160 BPM
    noise  band-limited noise, no clicks

Songs are named ``song000``, ``song001``, ... and the class cycles with the
index, so sorting by title interleaves the classes.
"""

from pathlib import Path

import numpy as np

from hyperwave.audio_io import AudioBuffer, DatasetManifest, write_wav

CLASSES = ["low", "high", "noise"]
PITCH_RANGES = {"low": (40, 55), "high": (72, 88)}
TEMPI = {"low": 80.0, "high": 160.0}


def midi_to_hz(note):
    return 440.0 * 2.0 ** ((note - 69) / 12.0)


def sine(freq, duration_s, sample_rate=22050, amplitude=1.0, phase=0.0):
    t = np.arange(int(round(duration_s * sample_rate))) / sample_rate
    return amplitude * np.sin(2 * np.pi * freq * t + phase)


def click_track(bpm, duration_s, sample_rate=22050, click_s=0.02, offset_s=0.0, rng=None):
    """Decaying noise bursts of `click_s` seconds, one per beat."""
    rng = rng or np.random.default_rng(0)
    n = int(round(duration_s * sample_rate))
    out = np.zeros(n)
    length = int(click_s * sample_rate)
    burst = rng.uniform(-1, 1, length) * np.exp(-np.arange(length) / (0.2 * length))
    period = 60.0 / bpm
    t = offset_s
    while t < duration_s:
        start = int(round(t * sample_rate))
        stop = min(n, start + length)
        out[start:stop] += burst[:stop - start]
        t += period
    return out


def _band_noise(rng, n, sample_rate, lo, hi):
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, 1.0 / sample_rate)
    spectrum[(freqs < lo) | (freqs > hi)] = 0.0
    noise = np.fft.irfft(spectrum, n)
    return noise / np.abs(noise).max()


def synth_song(label, duration_s=20.0, sample_rate=22050, rng=None):
    rng = rng or np.random.default_rng(0)
    n = int(round(duration_s * sample_rate))
    if label == "noise":
        lo = rng.uniform(100, 1000)
        hi = lo * rng.uniform(2, 8)
        samples = 0.5 * _band_noise(rng, n, sample_rate, lo, hi)
    else:
        low, high = PITCH_RANGES[label]
        samples = np.zeros(n)
        for note in rng.integers(low, high + 1, size=3):
            samples += sine(midi_to_hz(note), duration_s, sample_rate,
                            rng.uniform(0.2, 0.5), rng.uniform(0, 2 * np.pi))
        bpm = TEMPI[label] * rng.uniform(0.98, 1.02)
        samples += 0.6 * click_track(bpm, duration_s, sample_rate,
                                     offset_s=rng.uniform(0, 60.0 / bpm), rng=rng)
    samples *= rng.uniform(0.5, 0.9) / max(np.abs(samples).max(), 1e-12)
    return samples


def make_corpus(n_songs=120, duration_s=20.0, sample_rate=22050, seed=0):
    """List of ``(AudioBuffer, label, song_id)``; deterministic in `seed`."""
    corpus = []
    for j in range(n_songs):
        label = CLASSES[j % len(CLASSES)]
        song_id = f"song{j:03d}"
        rng = np.random.default_rng([seed, j])
        samples = synth_song(label, duration_s, sample_rate, rng)
        corpus.append((AudioBuffer(samples, sample_rate, song_id), label, song_id))
    return corpus


def write_corpus(out_dir, corpus):
    """Write each song as float WAV plus a ``manifest.csv``; returns the manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for buf, label, song_id in corpus:
        path = out_dir / f"{song_id}.wav"
        write_wav(path, buf)
        entries.append((str(path), label, song_id))
    manifest = DatasetManifest(entries)
    manifest.to_csv(out_dir / "manifest.csv")
    return manifest
