"""Latent song vectors from a trained network, PCA, and input-space synthesis."""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hyperwave.neuralnet import softmax
from hyperwave.tensorio import load_container, save_container


class DegenerateInputError(ValueError):
    pass


def extract_embedding(network, pixels):
    """Post-ReLU activations of the last fully connected layer before the output.

    `pixels` may be one (H, W) image or a (N, H, W, 1) batch.
    """
    layer = network.spec.embedding_layer
    if layer is None:
        raise ValueError("network has no fully connected layer before its output")
    _, acts = network.forward(pixels)
    return np.asarray(acts[layer], dtype=np.float64)


def embed_store(network, store, ids, batch_size=64):
    vectors = []
    for start in range(0, len(ids), batch_size):
        chunk = ids[start:start + batch_size]
        pixels = np.stack([store[i].pixels for i in chunk])[..., None]
        vectors.append(extract_embedding(network, pixels))
    return np.concatenate(vectors)


@dataclass
class PCAModel:
    components: np.ndarray
    eigenvalues: np.ndarray
    explained_variance_ratio: np.ndarray
    mean: np.ndarray

    @property
    def n_components(self):
        return self.components.shape[0]


def pca_fit(vectors, n_components):
    """Eigendecomposition of the sample covariance (ddof=1).

    Each component is flipped so its largest-magnitude entry is positive.
    """
    x = np.asarray(vectors, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ValueError("PCA needs at least two points")
    if not 1 <= n_components <= min(n, d):
        raise ValueError(f"n_components must lie in [1, {min(n, d)}], got {n_components}")
    mean = x.mean(axis=0)
    centred = x - mean
    cov = centred.T @ centred / (n - 1)
    total = np.trace(cov)
    if total <= 0:
        raise DegenerateInputError("all points are identical")
    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1][:n_components]
    eigenvalues = np.maximum(eigenvalues[order], 0.0)
    components = eigenvectors[:, order].T
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(n_components), pivots])
    components *= signs[:, None]
    return PCAModel(components, eigenvalues, eigenvalues / total, mean)


def pca_project(model, vectors):
    x = np.asarray(vectors, dtype=np.float64)
    if x.shape[-1] != model.mean.shape[0]:
        raise ValueError(f"vector width {x.shape[-1]} does not match PCA width {model.mean.shape[0]}")
    return (x - model.mean) @ model.components.T


def pca_reconstruct(model, projected):
    return np.asarray(projected) @ model.components + model.mean


def similarity(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"width mismatch {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity of a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def synthesize_hyperimage(network, target, steps=500, step_size=10.0, l2_penalty=1e-3,
                          seed=0, init_std=0.01, stop_probability=None):
    """Gradient descent on the input towards class `target`.

    Starts from Gaussian noise and iterates
    ``x <- x - step_size * (d loss(target)/dx + l2_penalty * x)``.
    Returns (x, trajectory) where trajectory[i] is the target probability
    before step i, and the final entry is the probability of the returned x.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, init_std, network.spec.input_shape)
    trajectory = []
    for _ in range(steps):
        p = float(softmax(network.forward(x)[0])[target])
        trajectory.append(p)
        if not np.isfinite(p):
            raise FloatingPointError("target probability became NaN during synthesis")
        if stop_probability is not None and p >= stop_probability:
            break
        x = x - step_size * (network.input_gradient(x, target) + l2_penalty * x)
    p = float(softmax(network.forward(x)[0])[target])
    if not np.isfinite(p):
        raise FloatingPointError("target probability became NaN during synthesis")
    trajectory.append(p)
    return x, np.array(trajectory)


@dataclass
class EmbeddingSet:
    vectors: np.ndarray
    ids: list
    labels: list
    pca: PCAModel = None
    meta: dict = field(default_factory=dict)

    @property
    def width(self):
        return self.vectors.shape[1]

    def save(self, stem):
        stem = Path(stem)
        tensors = {"vectors": self.vectors}
        if self.pca is not None:
            tensors.update({
                "pca/components": self.pca.components,
                "pca/eigenvalues": self.pca.eigenvalues,
                "pca/explained_variance_ratio": self.pca.explained_variance_ratio,
                "pca/mean": self.pca.mean,
            })
        save_container(stem.with_suffix(".tnsc"), tensors)
        header = {"ids": list(self.ids), "labels": list(self.labels), **self.meta}
        stem.with_suffix(".json").write_text(json.dumps(header, indent=2) + "\n")

    @classmethod
    def load(cls, stem):
        stem = Path(stem)
        tensors = {k: v.astype(np.float64) for k, v in load_container(stem.with_suffix(".tnsc")).items()}
        header = json.loads(stem.with_suffix(".json").read_text())
        pca = None
        if "pca/components" in tensors:
            pca = PCAModel(tensors["pca/components"], tensors["pca/eigenvalues"],
                           tensors["pca/explained_variance_ratio"], tensors["pca/mean"])
        meta = {k: v for k, v in header.items() if k not in ("ids", "labels")}
        return cls(tensors["vectors"], header["ids"], header["labels"], pca, meta)


def write_projection_csv(path, ids, labels, projected):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label", "pc1", "pc2", "pc3"])
        for item_id, label, row in zip(ids, labels, projected):
            padded = list(row[:3]) + [0.0] * (3 - min(3, len(row)))
            writer.writerow([item_id, label, *(f"{v:.6f}" for v in padded)])


def centroid_separation(vectors, labels):
    """(mean cosine to own-class centroid, mean cosine to other-class centroids)."""
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = np.asarray(labels)
    classes = sorted(set(labels.tolist()))
    centroids = {c: vectors[labels == c].mean(axis=0) for c in classes}
    intra, inter = [], []
    for v, c in zip(vectors, labels):
        if not np.any(v):
            continue
        for other, centroid in centroids.items():
            if not np.any(centroid):
                continue
            (intra if other == c else inter).append(similarity(v, centroid))
    return float(np.mean(intra)), float(np.mean(inter))
