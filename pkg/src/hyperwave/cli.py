"""Command-line entry point.

    hyperwave inspect|extract|train|evaluate|embed|pca|synth --config PATH [--seed N] [--out DIR]

Every RunConfig field also has its own flag (``--n-mels 64``, ``--split-mode
random_snippet`` ...) overriding the config file. Exit codes: 0 success,
1 usage or configuration error, 2 data error, 3 numerical divergence.
"""

import argparse
import csv
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from hyperwave import dsp, features, pnm
from hyperwave.audio_io import AudioDecodeError, DatasetManifest, read_wav, resample, snippet
from hyperwave.config import ConfigError, RunConfig
from hyperwave.embedding import (EmbeddingSet, embed_store, pca_fit, pca_project,
                                 synthesize_hyperimage, write_projection_csv)
from hyperwave.neuralnet import Checkpoint, parse_architecture
from hyperwave.store import FeatureStore, extract_corpus
from hyperwave.tensorio import save_tensor
from hyperwave.training import (DivergenceError, aggregate_reports, cross_validate, evaluate,
                                FoldReport, make_splits, write_history_csv, write_report_csv,
                                write_report_json)

log = logging.getLogger("hyperwave")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
COMMANDS = ("inspect", "extract", "train", "evaluate", "embed", "pca", "synth")


class DataError(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="hyperwave", description="acoustic hyper-images and CNN embeddings")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--out", dest="out_dir", help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    for f in fields(RunConfig):
        if f.name == "out_dir":
            continue
        parser.add_argument(f"--{f.name.replace('_', '-')}", dest=f.name, type=f.type,
                            default=None, help=argparse.SUPPRESS if f.name != "seed" else None)
    return parser


def _dirs(config):
    root = Path(config.out_dir)
    return {name: root / name for name in ("inspect", "store", "train", "embed", "pca", "synth")}


def _load_manifest(config):
    if not config.manifest:
        raise ConfigError("no manifest configured (set 'manifest' or --manifest)")
    try:
        manifest = DatasetManifest.from_csv(config.manifest)
    except (OSError, ValueError) as exc:
        raise DataError(f"manifest {config.manifest}: {exc}") from None
    if not manifest.entries:
        raise DataError(f"manifest {config.manifest} is empty")
    return manifest


def _open_store(config):
    path = _dirs(config)["store"]
    if not (path / "index.json").exists():
        raise DataError(f"no extracted store at {path}; run 'hyperwave extract' first")
    store = FeatureStore(root=path)
    if store.config_hash != config.feature_hash():
        raise ConfigError(f"store {path} was extracted under config {store.config_hash}, "
                          f"current feature config is {config.feature_hash()}")
    return store


def _spec(config, n_classes):
    return parse_architecture(config.architecture, config.input_shape, n_classes)


def _load_checkpoint(config, fold=None):
    fold = config.checkpoint_fold if fold is None else fold
    stem = _dirs(config)["train"] / f"fold{fold}"
    if not stem.with_suffix(".json").exists():
        raise DataError(f"no checkpoint {stem}; run 'hyperwave train' first")
    checkpoint = Checkpoint.load(stem)
    if checkpoint.config_hash != config.training_hash():
        raise ConfigError(f"checkpoint {stem} was trained under config {checkpoint.config_hash}, "
                          f"current training config is {config.training_hash()}")
    return checkpoint


def cmd_inspect(config):
    """Waveform and time-frequency panels for one audio file."""
    if not config.audio:
        raise ConfigError("inspect needs --audio PATH")
    try:
        buf = read_wav(config.audio)
    except (OSError, AudioDecodeError) as exc:
        raise DataError(f"{config.audio}: {exc}") from None
    if buf.sample_rate != config.sample_rate:
        buf = resample(buf, config.sample_rate)
    if buf.duration > config.snippet_s:
        buf = snippet(buf, 0.0, config.snippet_s)
    out = _dirs(config)["inspect"]
    out.mkdir(parents=True, exist_ok=True)
    power = dsp.power(dsp.stft(buf, config.n_fft, config.hop)).values
    panels = {
        "waveform": pnm.waveform_image(buf.samples),
        "stft_linear": pnm.to_gray(power),
        "stft_log": pnm.to_gray(np.log10(power + 1e-10)),
        "cqt": pnm.to_gray(np.log10(dsp.cqt_power(buf, hop=config.hop).values + 1e-10)),
        "chroma": pnm.to_gray(features.chromagram(buf, config.n_fft, config.hop).values),
        "tempogram": pnm.to_gray(features.cyclic_tempogram(
            buf, config.n_tempo_bins, config.n_fft, config.hop, config.n_mels,
            config.tempo_window).values),
        "mel": pnm.to_gray(features.mel_spectrogram(buf, config.n_mels, config.n_fft,
                                                    config.hop).values),
        "mfcc": pnm.to_gray(features.mfcc(buf, config.n_mfcc, config.n_mels, config.n_fft,
                                          config.hop).values),
        "hyperimage": pnm.to_gray(features.build_hyperimage(buf, config.features).pixels),
    }
    written = []
    for name, image in panels.items():
        path = out / f"{name}.pgm"
        pnm.write_pgm(path, image)
        written.append(str(path))
    (out / "inspect.json").write_text(json.dumps(
        {"audio": config.audio, "files": written, "config_hash": config.hash()}, indent=2) + "\n")
    log.info("wrote %d panels to %s", len(written), out)
    return EXIT_OK


def cmd_extract(config):
    manifest = _load_manifest(config)
    out = _dirs(config)["store"]
    out.mkdir(parents=True, exist_ok=True)
    store = FeatureStore(root=out)
    store.config_hash = config.feature_hash()
    items = [(path, label, song) for path, label, song in manifest.entries]
    store, failures = extract_corpus(items, config.features, config.snippets_per_song,
                                     config.snippet_s, store)
    store.config_hash = config.feature_hash()
    store.write_index()
    summary = {
        "songs": len(manifest.entries),
        "snippets": len(store),
        "failures": [{"song_id": s, "error": e} for s, e in failures],
        "classes": manifest.classes,
        "config_hash": config.feature_hash(),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    log.info("extracted %d snippets, %d failures", len(store), len(failures))
    return EXIT_DATA if failures else EXIT_OK


def _plan(config, manifest):
    try:
        return make_splits(manifest, config.snippets_per_song, config.split_mode, config.k,
                           config.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _write_reports(out, reports, config, stem="report"):
    write_report_csv(out / f"{stem}.csv", reports, config.architecture)
    write_report_json(out / f"{stem}.json", reports, aggregate_reports(reports),
                      architecture=config.architecture, split_mode=config.split_mode,
                      k=config.k, seed=config.seed, config_hash=config.training_hash(),
                      loss_column="mean test cross-entropy")


def cmd_train(config):
    manifest = _load_manifest(config)
    store = _open_store(config)
    plan = _plan(config, manifest)
    out = _dirs(config)["train"]
    out.mkdir(parents=True, exist_ok=True)
    spec = _spec(config, len(manifest.classes))

    def save_fold(fold, checkpoint, report, history):
        checkpoint.save(out / f"fold{fold}")
        write_history_csv(out / f"fold{fold}_history.csv", history)

    result = cross_validate(plan, spec, config.training, store, manifest.classes,
                            config.training_hash(), on_fold=save_fold)
    _write_reports(out, result.reports, config)
    for fold, exc in result.failures:
        log.error("fold %d: %s", fold, exc)
    if any(isinstance(exc, DivergenceError) for _, exc in result.failures):
        return EXIT_DIVERGED
    return EXIT_DATA if result.failures else EXIT_OK


def cmd_evaluate(config):
    manifest = _load_manifest(config)
    store = _open_store(config)
    plan = _plan(config, manifest)
    out = _dirs(config)["train"]
    reports = []
    for fold in range(plan.k):
        checkpoint = _load_checkpoint(config, fold)
        loss, precision, confusion, song_precision = evaluate(
            checkpoint.network, plan.folds[fold][1], store, manifest.classes, plan.songs)
        reports.append(FoldReport(fold, loss, precision, confusion.tolist(), checkpoint.epoch,
                                  len(plan.folds[fold][1]), song_precision))
    _write_reports(out, reports, config, stem="evaluation")
    return EXIT_OK


def cmd_embed(config):
    store = _open_store(config)
    checkpoint = _load_checkpoint(config)
    ids = store.ids()
    vectors = embed_store(checkpoint.network, store, ids)
    out = _dirs(config)["embed"]
    out.mkdir(parents=True, exist_ok=True)
    labels = [store[i].label for i in ids]
    EmbeddingSet(vectors, ids, labels, meta={"checkpoint_fold": config.checkpoint_fold,
                                             "layer": checkpoint.spec.embedding_layer,
                                             "config_hash": config.training_hash()}
                 ).save(out / "embeddings")
    log.info("embedded %d snippets into %d dimensions", len(ids), vectors.shape[1])
    return EXIT_OK


def cmd_pca(config):
    stem = _dirs(config)["embed"] / "embeddings"
    if not stem.with_suffix(".json").exists():
        raise DataError(f"no embeddings at {stem}; run 'hyperwave embed' first")
    emb = EmbeddingSet.load(stem)
    if emb.meta.get("config_hash") != config.training_hash():
        raise ConfigError("embeddings were produced under a different configuration")
    n = min(config.pca_components, *emb.vectors.shape)
    model = pca_fit(emb.vectors, n)
    projected = pca_project(model, emb.vectors)
    out = _dirs(config)["pca"]
    out.mkdir(parents=True, exist_ok=True)
    EmbeddingSet(emb.vectors, emb.ids, emb.labels, model, emb.meta).save(out / "embeddings_pca")
    write_projection_csv(out / "projection.csv", emb.ids, emb.labels, projected)
    classes = sorted(set(emb.labels))
    pnm.write_ppm(out / "scatter.ppm", pnm.scatter_image(projected, emb.labels, classes))
    return EXIT_OK


def cmd_synth(config):
    checkpoint = _load_checkpoint(config)
    classes = checkpoint.classes or [str(i) for i in range(checkpoint.spec.n_classes)]
    target = config.synth_target or classes[0]
    if target not in classes:
        raise ConfigError(f"synth_target {target!r} not among classes {classes}")
    network = checkpoint.network.copy(dtype=np.float64)
    try:
        pixels, trajectory = synthesize_hyperimage(
            network, classes.index(target), config.synth_steps, config.synth_step_size,
            config.synth_l2, seed=config.seed)
    except FloatingPointError as exc:
        raise DivergenceError(config.checkpoint_fold, -1, float("nan")) from exc
    out = _dirs(config)["synth"]
    out.mkdir(parents=True, exist_ok=True)
    image = pixels[..., 0]
    save_tensor(out / "synth.tnsr", image)
    pnm.write_pgm(out / "synth.pgm", pnm.to_gray(image))
    with open(out / "trajectory.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["step", "probability"])
        for step, p in enumerate(trajectory):
            writer.writerow([step, f"{p:.6f}"])
    log.info("synthesized %s: probability %.3f -> %.3f", target, trajectory[0], trajectory[-1])
    return EXIT_OK


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    overrides = {f.name: getattr(args, f.name) for f in fields(RunConfig)}
    try:
        config = RunConfig.load(args.config, **overrides)
        return HANDLERS[args.command](config)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_USAGE
    except (DataError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_DATA
    except DivergenceError as exc:
        log.error("%s", exc)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
