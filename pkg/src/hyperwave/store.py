"""Snippet naming and the hyper-image store used by training."""

import json
import logging
import re
from pathlib import Path

import numpy as np

from hyperwave.audio_io import read_wav, resample, snippet, snippet_starts
from hyperwave.features import FeatureConfig, HyperImage, build_hyperimage

log = logging.getLogger(__name__)


def snippet_id(song_id, index):
    return f"{song_id}_s{index}"


def _filename(item_id):
    return re.sub(r"[^A-Za-z0-9_.-]", "_", item_id)


def song_snippets(manifest, snippets_per_song):
    """Ordered ``(snippet_id, song_id, label, audio_path, index_in_file)`` tuples."""
    counts = {}
    rows = []
    for path, label, song_id in manifest.entries:
        for i in range(snippets_per_song):
            n = counts.get(song_id, 0)
            counts[song_id] = n + 1
            rows.append((snippet_id(song_id, n), song_id, label, path, i))
    return rows


class FeatureStore:
    """Maps snippet id -> HyperImage, in memory and optionally mirrored on disk."""

    def __init__(self, items=None, root=None, config_hash=None):
        self._items = dict(items or {})
        self.root = Path(root) if root is not None else None
        self.config_hash = config_hash
        self._index = {}
        if self.root is not None and (self.root / "index.json").exists():
            index = json.loads((self.root / "index.json").read_text())
            self._index = index["items"]
            self.config_hash = index["config_hash"]

    def __contains__(self, item_id):
        return item_id in self._items or item_id in self._index

    def __len__(self):
        return len(set(self._items) | set(self._index))

    def ids(self):
        return sorted(set(self._items) | set(self._index))

    def __getitem__(self, item_id):
        if item_id not in self._items:
            if item_id not in self._index:
                raise KeyError(f"no hyper-image for {item_id!r}")
            self._items[item_id] = HyperImage.load(self.root / self._index[item_id])
        return self._items[item_id]

    def add(self, item_id, image):
        self._items[item_id] = image
        if self.root is not None:
            name = _filename(item_id)
            image.save(self.root / name)
            self._index[item_id] = name

    def write_index(self):
        payload = {"config_hash": self.config_hash, "items": dict(sorted(self._index.items()))}
        (self.root / "index.json").write_text(json.dumps(payload, indent=2) + "\n")

    def song_of(self, item_id):
        return self[item_id].extra.get("song_id", item_id)

    def batch(self, ids, classes):
        """Stack pixels to (N, H, W, 1) and map labels to class indices."""
        index = {c: i for i, c in enumerate(classes)}
        pixels = np.stack([self[i].pixels for i in ids])[..., None]
        labels = np.array([index[self[i].label] for i in ids], dtype=np.int64)
        return pixels, labels


def extract_corpus(items, config=None, snippets_per_song=4, snippet_s=5.0, store=None):
    """Build hyper-images for every snippet of every song.

    `items` yields ``(AudioBuffer or path, label, song_id)``. Returns the store
    and a list of ``(song_id, error message)`` for songs that failed.
    """
    config = config or FeatureConfig()
    store = store if store is not None else FeatureStore(config_hash=config.hash())
    store.config_hash = config.hash()
    failures = []
    counts = {}
    for source, label, song_id in items:
        try:
            buf = read_wav(source) if isinstance(source, (str, Path)) else source
            if buf.sample_rate != config.sample_rate:
                buf = resample(buf, config.sample_rate)
            starts = snippet_starts(buf.duration, snippet_s, snippets_per_song)
            images = []
            for start in starts:
                image = build_hyperimage(snippet(buf, start, snippet_s), config, label=label)
                image.extra = {"song_id": song_id, "start_s": round(start, 6)}
                images.append(image)
        except (ValueError, OSError) as exc:
            log.warning("skipping %s: %s", song_id, exc)
            failures.append((song_id, str(exc)))
            continue
        for image in images:
            n = counts.get(song_id, 0)
            counts[song_id] = n + 1
            image.source_id = snippet_id(song_id, n)
            store.add(image.source_id, image)
    if store.root is not None:
        store.write_index()
    return store, failures
