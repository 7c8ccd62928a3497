"""End-to-end run on the synthetic three-class corpus."""

import time
from dataclasses import dataclass

from hyperwave import synthetic
from hyperwave.audio_io import DatasetManifest
from hyperwave.features import FeatureConfig
from hyperwave.neuralnet import parse_architecture
from hyperwave.store import extract_corpus
from hyperwave.training import (SONG_ORDERED, TrainConfig, cross_validate, make_splits,
                                report_csv_text)

BENCHMARK_ARCHITECTURE = "IC(5,15,16)LPC(1,5,16)LPF(64)F(32)O"


@dataclass
class BenchmarkRun:
    manifest: DatasetManifest
    store: object
    plan: object
    spec: object
    result: object
    report_csv: bytes
    seconds: dict


def run_benchmark(seed=0, n_songs=120, snippets_per_song=4, k=5, mode=SONG_ORDERED,
                  architecture=BENCHMARK_ARCHITECTURE, train_config=None, store=None):
    """Synthesize, extract, and cross-validate. Pass `store` to reuse extracted features."""
    seconds = {}
    t0 = time.perf_counter()
    corpus = synthetic.make_corpus(n_songs=n_songs, seed=seed)
    manifest = DatasetManifest([(song, label, song) for _, label, song in corpus])
    if store is None:
        store, failures = extract_corpus(corpus, FeatureConfig(), snippets_per_song)
        if failures:
            raise RuntimeError(f"feature extraction failed: {failures}")
    seconds["features"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    plan = make_splits(manifest, snippets_per_song, mode, k, seed)
    first = store[plan.folds[0][1][0]]
    spec = parse_architecture(architecture, (*first.shape, 1), len(manifest.classes))
    result = cross_validate(plan, spec, train_config or TrainConfig(seed=seed), store,
                            manifest.classes)
    seconds["training"] = time.perf_counter() - t1
    return BenchmarkRun(manifest, store, plan, spec, result,
                        report_csv_text(result.reports, architecture).encode(), seconds)
