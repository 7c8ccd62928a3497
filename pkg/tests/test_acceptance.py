"""Acceptance criteria 1-15; each test adds one PASS/FAIL line to the run summary."""

import math
import time
from contextlib import contextmanager

import numpy as np
import pytest

from hyperwave import dsp, features, neuralnet as nn
from hyperwave.audio_io import AudioBuffer
from hyperwave.benchmark import BENCHMARK_ARCHITECTURE, run_benchmark
from hyperwave.embedding import (centroid_separation, embed_store, pca_fit, pca_project,
                                 pca_reconstruct, synthesize_hyperimage)
from hyperwave.synthetic import CLASSES, click_track
from hyperwave.training import SONG_ORDERED, TrainConfig, evaluate, train_fold

from conftest import (ACCEPTANCE_LINES, SR, jacobi_eigenvalues, naive_dft, numerical_gradient,
                      relative_error, tone)

PAPER_ARCH = "IC(5,15,64)LPC(1,5,64)LPF(384)F(192)O"


@contextmanager
def criterion(number, title):
    detail = {}
    start = time.perf_counter()
    try:
        yield detail
    except BaseException:
        ACCEPTANCE_LINES.append(f"criterion {number}: FAIL  {title}  {_fmt(detail)}")
        raise
    detail["s"] = f"{time.perf_counter() - start:.1f}"
    line = f"criterion {number}: PASS  {title}  {_fmt(detail)}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def _fmt(detail):
    return " ".join(f"{k}={v}" for k, v in detail.items())


# -- numerical oracles ----------------------------------------------------------


def test_criterion_01_fft_vs_naive_dft():
    with criterion(1, "FFT vs naive DFT, 100 inputs") as d:
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(100):
            n = 2 ** int(rng.integers(2, 13))
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            ref = naive_dft(x)
            worst = max(worst, np.max(np.abs(dsp.fft(x) - ref)) / np.max(np.abs(ref)))
        d["max_rel_err"] = f"{worst:.2e}"
        assert worst < 1e-9


def test_criterion_02_whole_network_gradient():
    with criterion(2, "finite-difference check of IC(2,3,4)PF(8)O") as d:
        rng = np.random.default_rng(2)
        net = nn.Network(nn.parse_architecture("IC(2,3,4)PF(8)O", (8, 8, 1), 9),
                         seed=2, conv_std=0.5)
        x = rng.standard_normal((8, 8, 1))
        label = 4
        _, grads = net.loss_and_grads(x, label, need_input_grad=True)
        loss = lambda: net.loss_and_grads(x, label)[0]
        errors = {name: relative_error(grads[name], numerical_gradient(loss, p, 1e-3))
                  for name, p in net.params.items()}
        errors["input"] = relative_error(grads["input"], numerical_gradient(loss, x, 1e-3))
        d["max_rel_err"] = f"{max(errors.values()):.2e}"
        assert max(errors.values()) < 1e-3, errors


def test_criterion_03_softmax_cross_entropy():
    with criterion(3, "softmax cross-entropy analytics") as d:
        loss, grad = nn.softmax_cross_entropy(np.zeros(9), 0)
        rng = np.random.default_rng(3)
        sums = [abs(nn.softmax_cross_entropy(rng.standard_normal(9) * 4, i % 9)[1].sum())
                for i in range(100)]
        d["loss-ln9"] = f"{loss - math.log(9):.1e}"
        d["max_grad_sum"] = f"{max(sums):.1e}"
        assert abs(loss - math.log(9)) <= 1e-9
        assert max(sums) <= 1e-9


def test_criterion_04_shape_chain():
    with criterion(4, "shape chain of the reference architecture") as d:
        spec = nn.parse_architecture(PAPER_ARCH, (205, 216, 1), 9)
        chain = [spec.shape_of(n) for n in ("conv1", "pool1", "pool2", "fc1", "fc2", "output")]
        d["chain"] = "->".join("x".join(map(str, s)) for s in chain)
        assert chain == [(41, 43, 64), (20, 21, 64), (9, 10, 64), (384,), (192,), (9,)]
        assert spec.shape_of("conv2") == (20, 21, 64)
        assert spec.shape_of("lrn1") == (41, 43, 64) and spec.shape_of("lrn2") == (20, 21, 64)


# -- DSP feature properties --------------------------------------------------------


def test_criterion_05_chroma_octave():
    with criterion(5, "440/880 Hz chroma argmax is A") as d:
        a_row = features.PITCH_CLASSES.index("A")
        fractions = []
        for freq in (440.0, 880.0):
            chroma = features.chromagram(tone(freq, 5.0)).values
            fractions.append(float(np.mean(np.argmax(chroma, axis=0) == a_row)))
        d["frac"] = "/".join(f"{f:.3f}" for f in fractions)
        assert min(fractions) >= 0.95


def test_criterion_06_tempogram_octave_identification():
    with criterion(6, "120 and 240 BPM share the cyclic tempo bin") as d:
        argmax = [np.argmax(features.cyclic_tempogram(
            AudioBuffer(click_track(bpm, 10.0, SR), SR)).values, axis=0) for bpm in (120, 240)]
        agree = float(np.mean(argmax[0] == argmax[1]))
        d["agree"] = f"{agree:.3f}"
        assert agree >= 0.9


def test_criterion_07_mfcc_constant_frame():
    with criterion(7, "MFCC of a constant mel frame is DC only") as d:
        coeffs = features.mfcc_from_mel_power(np.full((128, 1), 0.37), 20)[:, 0]
        d["max_|c1..c19|"] = f"{np.max(np.abs(coeffs[1:])):.1e}"
        assert np.max(np.abs(coeffs[1:])) < 1e-6


def test_criterion_08_hyperimage_normalization():
    with criterion(8, "hyper-image shape and per-plane standardization") as d:
        rng = np.random.default_rng(8)
        t = np.arange(5 * SR) / SR
        x = (0.4 * np.sin(2 * np.pi * 261.6 * t) + 0.05 * rng.standard_normal(t.size)
             + 0.5 * click_track(96.0, 5.0, SR))
        img = features.build_hyperimage(AudioBuffer(x, SR))
        worst_mean = max(abs(img.plane(n).mean()) for n, _ in img.planes)
        worst_std = max(abs(img.plane(n).std() - 1) for n, _ in img.planes)
        d["shape"] = "x".join(map(str, img.shape))
        d["max|mu|"] = f"{worst_mean:.1e}"
        d["max|sd-1|"] = f"{worst_std:.1e}"
        assert img.shape == (205, 216)
        assert worst_mean < 1e-6 and worst_std < 1e-6


# -- end-to-end synthetic benchmark ------------------------------------------------------


@pytest.fixture(scope="module")
def benchmark():
    first = run_benchmark(seed=0)
    second = run_benchmark(seed=0)
    return first, second


def test_criterion_09_synthetic_benchmark(benchmark):
    with criterion(9, "5-fold song-ordered CV on the synthetic corpus") as d:
        run, _ = benchmark
        agg = run.result.aggregate
        d["p@1"] = f"{agg['precision@1']['mean']:.2f}"
        d["p@3"] = f"{agg['precision@3']['mean']:.2f}"
        d["run_s"] = f"{sum(run.seconds.values()):.0f}"
        assert run.plan.mode == SONG_ORDERED and run.plan.k == 5
        assert len(run.manifest) == 120 and len(run.store) == 480
        assert run.spec.architecture == BENCHMARK_ARCHITECTURE
        assert not run.result.failures
        assert agg["precision@1"]["mean"] >= 95.0
        assert agg["precision@3"]["mean"] == 100.0
        assert sum(run.seconds.values()) < 15 * 60


def test_criterion_10_overfit_probe(benchmark):
    with criterion(10, "overfit 32 snippets in 200 epochs") as d:
        run, _ = benchmark
        plan = run.plan
        ids = plan.folds[0][0][:32]
        probe = type(plan)(plan.mode, plan.k, [(ids, ids)], plan.seed, plan.songs)
        hp = TrainConfig(epochs=200, patience=0, seed=0)
        _, _, history = train_fold(probe, 0, run.spec, hp, run.store, run.manifest.classes)
        d["final_train_loss"] = f"{history[-1]:.4f}"
        assert len(history) == 200 and history[-1] < 0.05


def test_criterion_11_untrained_loss(benchmark):
    with criterion(11, "untrained test loss is ln(n_classes)") as d:
        run, _ = benchmark
        net = nn.Network(run.spec, seed=11, dtype="float32")
        loss, *_ = evaluate(net, run.plan.folds[0][1], run.store, run.manifest.classes)
        d["loss-ln3"] = f"{loss - math.log(len(CLASSES)):+.4f}"
        assert abs(loss - math.log(len(CLASSES))) <= 0.1


def test_criterion_12_determinism(benchmark):
    with criterion(12, "two benchmark runs give byte-identical reports") as d:
        first, second = benchmark
        d["csv_bytes"] = len(first.report_csv)
        assert first.report_csv == second.report_csv


# -- embedding and synthesis --------------------------------------------------------------


def test_criterion_13_embedding_separation(benchmark):
    with criterion(13, "embedding width and class-centroid separation") as d:
        run, _ = benchmark
        paper = nn.parse_architecture(PAPER_ARCH)
        assert paper.shape_of(paper.embedding_layer) == (192,)
        network = run.result.checkpoints[0].network
        ids = run.store.ids()
        vectors = embed_store(network, run.store, ids)
        labels = [run.store[i].label for i in ids]
        intra, inter = centroid_separation(vectors, labels)
        d["width"] = vectors.shape[1]
        d["intra"] = f"{intra:.3f}"
        d["inter"] = f"{inter:.3f}"
        assert vectors.shape == (480, 32)
        assert intra - inter >= 0.2


def test_criterion_14_pca():
    with criterion(14, "PCA orthonormality, reconstruction and eigenvalues") as d:
        rng = np.random.default_rng(14)
        x = rng.standard_normal((50, 8)) @ rng.standard_normal((8, 8))
        model = pca_fit(x, 8)
        ortho = np.max(np.abs(model.components @ model.components.T - np.eye(8)))
        recon = np.max(np.abs(pca_reconstruct(model, pca_project(model, x)) - x))
        centred = x - x.mean(axis=0)
        oracle = jacobi_eigenvalues(centred.T @ centred / (len(x) - 1))
        eig = np.max(np.abs(model.eigenvalues - oracle) / oracle)
        d["ortho"] = f"{ortho:.1e}"
        d["recon"] = f"{recon:.1e}"
        d["eig_rel"] = f"{eig:.1e}"
        assert ortho < 1e-9 and recon < 1e-7 and eig < 1e-6


def test_criterion_15_synthesis(benchmark):
    with criterion(15, "input synthesis reaches p>0.9 for every class") as d:
        run, _ = benchmark
        network = run.result.checkpoints[0].network.copy(dtype=np.float64)
        steps_needed = {}
        for target, name in enumerate(run.manifest.classes):
            _, trajectory = synthesize_hyperimage(network, target, steps=500, seed=15,
                                                  stop_probability=0.95)
            hits = np.flatnonzero(trajectory > 0.9)
            steps_needed[name] = int(hits[0]) if hits.size else None
        d["steps"] = ",".join(f"{k}:{v}" for k, v in steps_needed.items())
        assert all(v is not None and v <= 500 for v in steps_needed.values())
