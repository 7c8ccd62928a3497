from pathlib import Path

import numpy as np
import pytest

from hyperwave import dsp, features
from hyperwave.audio_io import AudioBuffer
from hyperwave.features import FeatureConfig, HyperImage, PlaneError, build_hyperimage
from hyperwave.synthetic import click_track

from conftest import SR, tone

GOLDEN = Path(__file__).parent / "data" / "golden_mfcc.npz"


def test_mel_silence_is_zero():
    mel = features.mel_spectrogram(AudioBuffer(np.zeros(SR), SR))
    assert mel.values.shape[0] == 128 and not mel.values.any()


def test_mel_sine_peaks_at_nearest_filter():
    centres = dsp.mel_frequencies(128, 0.0, SR / 2)[1:-1]
    expected = int(np.argmin(np.abs(centres - 1000.0)))
    mel = features.mel_spectrogram(tone(1000.0, 1.0))
    # edge frames see the reflected (phase-flipped) signal
    assert np.all(np.argmax(mel.values, axis=0)[2:-2] == expected)


def test_mel_monotone_in_amplitude(rng):
    x = rng.uniform(-0.25, 0.25, SR)
    quiet = features.mel_spectrogram(AudioBuffer(x, SR)).values
    loud = features.mel_spectrogram(AudioBuffer(2 * x, SR)).values
    nonzero = quiet > 0
    assert np.all(loud[nonzero] > quiet[nonzero])


def test_mfcc_of_constant_mel_is_dc_only():
    c = features.mfcc_from_mel_power(np.full((128, 10), 3.7), 20)
    assert np.max(np.abs(c[1:])) < 1e-6
    assert c[0, 0] == pytest.approx(np.log(3.7 + 1e-10) * np.sqrt(128))


def test_mfcc_matches_golden_reference():
    golden = np.load(GOLDEN)
    window = dsp.hann(2048)
    fb = dsp.mel_filterbank(2048, 128, SR)
    for name in ("noise", "tone"):
        spectrum = dsp.fft(golden[name] * window)[:1025]
        mel_power = fb @ (np.abs(spectrum) ** 2)
        ours = features.mfcc_from_mel_power(mel_power[:, None], 20)[:, 0]
        np.testing.assert_allclose(ours, golden[f"{name}_mfcc"], rtol=1e-9, atol=1e-9)
    tone_mass = np.abs(golden["tone_mfcc"][1:]).sum()
    noise_mass = np.abs(golden["noise_mfcc"][1:]).sum()
    assert tone_mass > noise_mass


def test_mfcc_of_silence_is_finite():
    c = features.mfcc(AudioBuffer(np.zeros(SR), SR))
    assert np.all(np.isfinite(c.values))
    with pytest.raises(ValueError):
        features.mfcc(AudioBuffer(np.zeros(SR), SR), n_mfcc=40, n_mels=32)


@pytest.mark.parametrize("freq", [440.0, 880.0, 220.0])
def test_chroma_a_row(freq):
    chroma = features.chromagram(tone(freq, 2.0))
    assert chroma.bin_labels[9] == "A"
    assert np.mean(np.argmax(chroma.values, axis=0) == 9) >= 0.95
    assert np.all(chroma.values.max(axis=0) == pytest.approx(1.0))


def test_chroma_silence_stays_zero():
    assert not features.chromagram(AudioBuffer(np.zeros(SR), SR)).values.any()


def _tempo_argmax(bpm, seconds=10.0):
    t = features.cyclic_tempogram(AudioBuffer(click_track(bpm, seconds, SR), SR))
    return np.argmax(t.values, axis=0)


def _cyclic_distance(a, b, n=32):
    d = np.abs(np.asarray(a) - b) % n
    return np.minimum(d, n - d)


def test_tempogram_octave_equivalence():
    a = _tempo_argmax(120.0)
    b = _tempo_argmax(240.0)
    assert np.mean(a == b) >= 0.9
    # a 128-frame window resolves tempo far more coarsely than 1/32 octave, so the
    # peak may sit one class off the 60 BPM bin
    assert np.mean(_cyclic_distance(a, 0) <= 1) >= 0.9


@pytest.mark.parametrize("bpm", [80.0, 100.0, 133.0])
def test_tempogram_peak_tracks_tempo(bpm):
    expected = 32 * np.log2(bpm / 60.0) % 32
    a = _tempo_argmax(bpm)
    assert np.median(_cyclic_distance(a, expected)) <= 1


def test_tempogram_classes_span_one_octave():
    classes = features.cyclic_tempo_classes(32)
    assert classes[0] == 60.0 and classes[-1] < 120.0
    np.testing.assert_allclose(np.diff(np.log2(classes)), 1 / 32)


def test_tempogram_of_dc_signal_is_zero():
    t = features.cyclic_tempogram(AudioBuffer(np.full(5 * SR, 0.3), SR))
    assert not t.values.any()


def test_tempogram_needs_one_window():
    with pytest.raises(ValueError, match="tempogram window"):
        features.cyclic_tempogram_from_envelope(np.zeros(50), 43.07, 32, window=128)


def _rayleigh_contrast(n_bins, alpha, rng, trials=4000):
    """Monte-Carlo expectation of the contrast of n_bins iid Rayleigh magnitudes."""
    k = int(np.ceil(alpha * n_bins))
    mags = np.sort(rng.rayleigh(size=(trials, n_bins)), axis=1)
    return float(np.mean(np.log(mags[:, -k:].mean(axis=1)) - np.log(mags[:, :k].mean(axis=1))))


def test_noise_contrast_matches_rayleigh_oracle(rng):
    # white noise has Rayleigh-distributed STFT magnitudes, so the "flat" contrast is
    # the spread between the top and bottom order statistics, not zero
    noise = AudioBuffer(rng.standard_normal(10 * SR), SR)
    measured = features.spectral_contrast(noise).values.mean(axis=1)
    freqs = dsp.fft_frequencies(SR, 2048)
    edges = [0, 200, 400, 800, 1600, 3200, 6400, SR / 2]
    oracle_rng = np.random.default_rng(7)
    for band in range(7):
        lo, hi = edges[band], edges[band + 1]
        n_bins = int(np.sum((freqs >= lo) & ((freqs <= hi) if band == 6 else (freqs < hi))))
        expected = _rayleigh_contrast(n_bins, 0.02, oracle_rng)
        assert measured[band] == pytest.approx(expected, rel=0.15), band


def test_tone_contrast_exceeds_noise_baseline(rng):
    noise = features.spectral_contrast(AudioBuffer(0.1 * rng.standard_normal(5 * SR), SR))
    # 1131 Hz sits at the geometric centre of the 800-1600 Hz band (row 3)
    mixed = AudioBuffer(0.1 * rng.standard_normal(5 * SR) + tone(1131.0).samples, SR)
    tonal = features.spectral_contrast(mixed)
    assert tonal.values[3].mean() > noise.values[3].mean() + 1.0


def test_contrast_gain_invariance(rng):
    x = rng.standard_normal(2 * SR)
    a = features.spectral_contrast(AudioBuffer(0.1 * x, SR)).values
    b = features.spectral_contrast(AudioBuffer(0.3 * x, SR)).values
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_contrast_rejects_empty_band():
    with pytest.raises(ValueError, match="no FFT bins"):
        features.contrast_from_magnitude(np.ones((33, 4)), SR, 64, n_bands=6, fmin=50.0)


def test_tonnetz_basis_and_zero():
    chroma = np.eye(12)
    chroma = np.hstack([chroma, np.zeros((12, 1))])
    out = features.tonnetz(chroma).values
    np.testing.assert_array_equal(out[:, :12], features.tonnetz_matrix())
    assert not out[:, 12].any()


def test_tonnetz_fifths_are_close():
    m = features.tonnetz_matrix()
    c, g, f_sharp = m[:, 0], m[:, 7], m[:, 6]
    assert np.linalg.norm(c - g) < np.linalg.norm(c - f_sharp)
    # radii of the three circles
    np.testing.assert_allclose(np.hypot(m[0], m[1]), 1.0)
    np.testing.assert_allclose(np.hypot(m[4], m[5]), 0.5)


@pytest.fixture(scope="module")
def mixture():
    rng = np.random.default_rng(99)
    t = np.arange(5 * SR) / SR
    x = 0.3 * np.sin(2 * np.pi * 330 * t) + 0.05 * rng.standard_normal(t.size)
    return AudioBuffer(x + click_track(100.0, 5.0, SR), SR, "mix")


def test_hyperimage_shape_and_stats(mixture):
    img = build_hyperimage(mixture, label="x")
    assert img.shape == (205, 216)
    assert [h for _, h in img.planes] == [128, 20, 12, 32, 7, 6]
    for name, _ in img.planes:
        p = img.plane(name)
        assert abs(p.mean()) < 1e-6
        assert abs(p.std() - 1) < 1e-6


def test_hyperimage_deterministic_and_gain_invariant(mixture):
    a = build_hyperimage(mixture)
    b = build_hyperimage(AudioBuffer(mixture.samples.copy(), SR, "mix"))
    assert a.pixels.tobytes() == b.pixels.tobytes()
    louder = features.extract_planes(AudioBuffer(2 * mixture.samples, SR), FeatureConfig())
    base = features.extract_planes(mixture, FeatureConfig())
    assert np.array_equal(np.argmax(base["chroma"].values, 0),
                          np.argmax(louder["chroma"].values, 0))
    assert np.array_equal(np.argmax(base["cyclic_tempogram"].values, 0),
                          np.argmax(louder["cyclic_tempogram"].values, 0))
    np.testing.assert_allclose(base["spectral_contrast"].values,
                               louder["spectral_contrast"].values, atol=1e-9)


def test_hyperimage_resamples_other_rates(mixture):
    from hyperwave.audio_io import resample
    img = build_hyperimage(resample(mixture, 44100))
    assert img.shape == (205, 216)


def test_standardize_idempotent_and_constant(rng):
    once, _ = features.standardize(rng.standard_normal((7, 30)) * 4 + 2)
    twice, (mean, std) = features.standardize(once)
    assert abs(mean) < 1e-6 and abs(std - 1) < 1e-6
    np.testing.assert_allclose(once, twice, atol=1e-6)
    flat, stat = features.standardize(np.full((3, 3), 5.0))
    assert not flat.any() and stat == (5.0, 0.0)


def test_extractor_errors_name_the_plane():
    short = AudioBuffer(np.random.default_rng(0).standard_normal(SR), SR)
    with pytest.raises(PlaneError, match="cyclic_tempogram") as info:
        build_hyperimage(short)
    assert info.value.plane == "cyclic_tempogram"
    with pytest.raises(PlaneError, match="^mel:"):
        build_hyperimage(AudioBuffer(np.zeros(100), SR))


def test_hyperimage_save_load(tmp_path, mixture):
    img = build_hyperimage(mixture, label="rock")
    img.extra["song_id"] = "s1"
    img.save(tmp_path / "x")
    back = HyperImage.load(tmp_path / "x")
    np.testing.assert_array_equal(back.pixels, img.pixels.astype(np.float32))
    assert back.planes == img.planes and back.label == "rock"
    assert back.extra == {"song_id": "s1"} and back.config_hash == FeatureConfig().hash()
