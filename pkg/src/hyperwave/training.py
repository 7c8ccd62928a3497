"""Cross-validation splits, the training loop, and precision@k evaluation."""

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from hyperwave.neuralnet import SGD, Checkpoint, Network, softmax, softmax_cross_entropy
from hyperwave.store import song_snippets

log = logging.getLogger(__name__)

RANDOM_SNIPPET = "random_snippet"
SONG_ORDERED = "song_ordered"
MODES = (RANDOM_SNIPPET, SONG_ORDERED)


class DivergenceError(RuntimeError):
    def __init__(self, fold, epoch, loss):
        self.fold, self.epoch, self.loss = fold, epoch, loss
        super().__init__(f"training diverged in fold {fold} at epoch {epoch} (loss {loss})")


@dataclass
class SplitPlan:
    mode: str
    k: int
    folds: list
    seed: int
    songs: dict = field(default_factory=dict)

    def all_ids(self):
        return sorted(i for _, test in self.folds for i in test)


def make_splits(manifest, snippets_per_song=4, mode=SONG_ORDERED, k=10, seed=0):
    """Partition every snippet into k test folds.

    random_snippet: a seeded shuffle of snippets dealt round-robin.
    song_ordered: songs sorted by title and dealt in contiguous runs, so no
    song has snippets on both sides of any fold.
    """
    if mode not in MODES:
        raise ValueError(f"unknown split mode {mode!r}")
    if k < 2:
        raise ValueError("k must be at least 2")
    rows = song_snippets(manifest, snippets_per_song)
    if not rows:
        raise ValueError("empty manifest")
    songs = {}
    for item_id, song_id, *_ in rows:
        songs.setdefault(song_id, []).append(item_id)
    if len(songs) < k:
        raise ValueError(f"{len(songs)} songs cannot fill {k} folds")
    ids = [r[0] for r in rows]
    if mode == RANDOM_SNIPPET:
        order = np.random.default_rng(seed).permutation(len(ids))
        tests = [[ids[i] for i in order[f::k]] for f in range(k)]
    else:
        titles = sorted(songs)
        tests = [[i for song in chunk for i in songs[song]]
                 for chunk in np.array_split(np.array(titles, dtype=object), k)]
    folds = []
    for test in tests:
        held = set(test)
        folds.append(([i for i in ids if i not in held], list(test)))
    song_of = {item_id: song_id for item_id, song_id, *_ in rows}
    return SplitPlan(mode, k, folds, seed, song_of)


def rank_classes(logits):
    """Per example, class indices from highest to lowest score (ties: lower index first)."""
    return np.argsort(-np.asarray(logits), axis=1, kind="stable")


def precision_at_k(ranked, true_labels, ks=(1, 3)):
    """Percentage of examples whose true label is among the first k ranked classes."""
    ranked = np.asarray(ranked)
    true_labels = np.asarray(true_labels)
    n_classes = ranked.shape[1]
    if true_labels.size and (true_labels.min() < 0 or true_labels.max() >= n_classes):
        raise ValueError(f"label outside the {n_classes} known classes")
    hit_rank = np.argmax(ranked == true_labels[:, None], axis=1)
    return {k: float(100.0 * np.mean(hit_rank < k)) for k in ks}


@dataclass
class FoldReport:
    fold: int
    loss: float
    precision_at: dict
    confusion: list
    epochs_run: int
    n_test: int = 0
    song_precision_at: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["precision_at"] = {str(k): v for k, v in self.precision_at.items()}
        d["song_precision_at"] = {str(k): v for k, v in self.song_precision_at.items()}
        return d


@dataclass
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 5e-4
    conv_std: float = 0.01
    patience: int = 5
    plateau_tol: float = 1e-4
    dtype: str = "float32"
    seed: int = 0


def _predict(network, pixels, batch_size=64):
    return np.concatenate([network.forward(pixels[i:i + batch_size])[0]
                           for i in range(0, len(pixels), batch_size)]).astype(np.float64)


def evaluate(network, ids, store, classes, song_of=None, ks=None):
    pixels, labels = store.batch(ids, classes)
    logits = _predict(network, pixels)
    loss, _ = softmax_cross_entropy(logits, labels)
    n_classes = len(classes)
    ks = ks or sorted({1, min(3, n_classes), n_classes})
    ranked = rank_classes(logits)
    confusion = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(confusion, (labels, ranked[:, 0]), 1)
    song_precision = {}
    if song_of:
        song_precision = _song_vote_precision(ids, logits, labels, song_of, ks)
    return loss, precision_at_k(ranked, labels, ks), confusion, song_precision


def _song_vote_precision(ids, logits, labels, song_of, ks):
    """Majority vote of top-1 snippet predictions per song, ties broken by summed probability."""
    probs = softmax(logits)
    songs = {}
    for i, item_id in enumerate(ids):
        songs.setdefault(song_of[item_id], []).append(i)
    n_classes = logits.shape[1]
    scores, truth = [], []
    for rows in songs.values():
        votes = np.bincount(np.argmax(logits[rows], axis=1), minlength=n_classes)
        scores.append(votes + probs[rows].sum(axis=0) / (len(rows) + 1))
        truth.append(labels[rows[0]])
    return precision_at_k(rank_classes(np.array(scores)), np.array(truth), ks)


def train_fold(plan, fold, net_spec, hyperparams, store, classes, config_hash=""):
    """Train on the fold's training ids, evaluate on its test ids.

    Returns (checkpoint, report, history) where history is the per-epoch mean
    training loss.
    """
    hp = hyperparams
    train_ids, test_ids = plan.folds[fold]
    missing = [i for i in train_ids + test_ids if i not in store]
    if missing:
        raise KeyError(f"missing hyper-image for {missing[0]!r} ({len(missing)} missing)")
    network = Network(net_spec, seed=[hp.seed, fold], conv_std=hp.conv_std, dtype=hp.dtype)
    optimizer = SGD(hp.lr, hp.momentum, hp.weight_decay)
    pixels, labels = store.batch(train_ids, classes)
    history = []
    best = np.inf
    stale = 0
    for epoch in range(hp.epochs):
        order = np.random.default_rng([hp.seed, fold, epoch]).permutation(len(train_ids))
        total = 0.0
        for start in range(0, len(order), hp.batch_size):
            idx = order[start:start + hp.batch_size]
            loss, grads = network.loss_and_grads(pixels[idx], labels[idx])
            if not np.isfinite(loss):
                raise DivergenceError(fold, epoch, loss)
            optimizer.step(network.params, grads)
            total += loss * len(idx)
        epoch_loss = total / len(order)
        if not all(np.isfinite(p).all() for p in network.params.values()):
            raise DivergenceError(fold, epoch, epoch_loss)
        history.append(epoch_loss)
        log.info("fold %d epoch %d train loss %.5f", fold, epoch, epoch_loss)
        if epoch_loss < best - hp.plateau_tol:
            best, stale = epoch_loss, 0
        else:
            stale += 1
            if hp.patience and stale >= hp.patience:
                break
    test_loss, precision, confusion, song_precision = evaluate(
        network, test_ids, store, classes, plan.songs)
    if not np.isfinite(test_loss):
        raise DivergenceError(fold, len(history), test_loss)
    report = FoldReport(fold, test_loss, precision, confusion.tolist(), len(history),
                        len(test_ids), song_precision)
    checkpoint = Checkpoint(network, hp.seed, len(history), config_hash,
                            dict(optimizer.velocity), list(classes))
    return checkpoint, report, history


@dataclass
class CrossValidation:
    reports: list
    checkpoints: list
    histories: list
    failures: list

    @property
    def aggregate(self):
        return aggregate_reports(self.reports)


def aggregate_reports(reports):
    if not reports:
        return {}
    out = {"loss": _mean_std([r.loss for r in reports])}
    for k in reports[0].precision_at:
        out[f"precision@{k}"] = _mean_std([r.precision_at[k] for r in reports])
    return out


def _mean_std(values):
    values = np.asarray(values, dtype=np.float64)
    return {"mean": float(values.mean()), "std": float(values.std())}


def cross_validate(plan, net_spec, hyperparams, store, classes, config_hash="", folds=None,
                   on_fold=None):
    """Run `train_fold` for every fold; failed folds are recorded, not fatal."""
    reports, checkpoints, histories, failures = [], [], [], []
    for fold in (range(plan.k) if folds is None else folds):
        try:
            checkpoint, report, history = train_fold(plan, fold, net_spec, hyperparams, store,
                                                     classes, config_hash)
        except (DivergenceError, KeyError) as exc:
            log.error("fold %d failed: %s", fold, exc)
            failures.append((fold, exc))
            continue
        reports.append(report)
        checkpoints.append(checkpoint)
        histories.append(history)
        if on_fold is not None:
            on_fold(fold, checkpoint, report, history)
    return CrossValidation(reports, checkpoints, histories, failures)


def report_csv_text(reports, architecture):
    """One row per fold in the layout of the cross-validation table."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["fold", "architecture", "test_loss", "precision@1", "precision@3"])
    for r in reports:
        writer.writerow([r.fold, architecture, f"{r.loss:.4f}",
                         f"{r.precision_at[1]:.2f}", f"{r.precision_at.get(3, 100.0):.2f}"])
    return buf.getvalue()


def write_report_csv(path, reports, architecture):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(report_csv_text(reports, architecture))


def write_report_json(path, reports, aggregate, **meta):
    payload = {**meta, "folds": [r.to_dict() for r in reports], "aggregate": aggregate}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_history_csv(path, history):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "train_loss"])
        for epoch, loss in enumerate(history):
            writer.writerow([epoch, f"{loss:.6f}"])
