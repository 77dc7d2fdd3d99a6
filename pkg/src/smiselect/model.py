"""Linear softmax probe over fixed embeddings.

The probe stands in for the final layer of a deep classifier: it is trained
with full-batch gradient descent on L2-regularised cross-entropy, and its
last-layer gradients give the point representation used by the SMI and
BADGE acquisition functions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import EmbeddingSet


@dataclass(frozen=True)
class ProbeConfig:
    lr: float = 0.05
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0
    target_accuracy: float = 0.99


@dataclass
class LinearProbe:
    weights: np.ndarray  # c x d
    bias: np.ndarray  # c
    trained_on: int = 0

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]

    def logits(self, x) -> np.ndarray:
        x = _vectors(x)
        if x.shape[1] != self.d:
            raise ValueError(f"dimension mismatch: probe expects d={self.d}, got {x.shape[1]}")
        return x @ self.weights.T + self.bias

    def predict_proba(self, x) -> np.ndarray:
        return softmax(self.logits(x))

    def predict(self, x) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)


def _vectors(x) -> np.ndarray:
    if isinstance(x, EmbeddingSet):
        return x.vectors
    x = np.asarray(x, dtype=np.float64)
    return x.reshape(1, -1) if x.ndim == 1 else x


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(probe: LinearProbe, x, y) -> np.ndarray:
    """Per-example loss ``-log p_y``, computed stably from the logits."""
    z = probe.logits(x)
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    return lse - z[np.arange(z.shape[0]), np.asarray(y)]


def train_probe(labeled: EmbeddingSet, num_classes: int | None = None,
                config: ProbeConfig = ProbeConfig()) -> LinearProbe:
    """Fit a fresh probe on ``labeled``.

    Weights are re-drawn from ``config.seed`` on every call.  Training stops
    after ``config.epochs`` updates or as soon as training accuracy reaches
    ``config.target_accuracy``.
    """
    if labeled.n == 0:
        raise ValueError("cannot train on an empty labeled set")
    if labeled.labels is None:
        raise ValueError("training set carries no labels")
    c = num_classes or labeled.num_classes
    x, y = labeled.vectors, labeled.labels
    n, d = x.shape
    present = np.unique(y)
    if present.size == 1:
        # nothing to separate: a constant classifier on Laplace-smoothed class priors
        counts = np.bincount(y, minlength=c).astype(np.float64)
        return LinearProbe(np.zeros((c, d)), np.log((counts + 1.0) / (n + c)), trained_on=n)
    rng = np.random.default_rng(config.seed)
    scale = np.sqrt(2.0 / (c + d))  # Glorot normal
    probe = LinearProbe(rng.normal(0.0, scale, size=(c, d)), np.zeros(c), trained_on=n)
    onehot = np.zeros((n, c))
    onehot[np.arange(n), y] = 1.0
    for _ in range(config.epochs):
        p = probe.predict_proba(x)
        resid = (p - onehot) / n
        probe.weights -= config.lr * (resid.T @ x + config.l2 * probe.weights)
        probe.bias -= config.lr * resid.sum(axis=0)
        if np.mean(probe.predict(x) == y) >= config.target_accuracy:
            break
    return probe


def residuals_from_proba(p: np.ndarray, labels=None) -> np.ndarray:
    """``p - onehot(y)`` per row, with ``y`` the argmax when ``labels`` is None.

    The entry for the labelled class is written as ``-(sum of the other
    probabilities)`` so it stays nonzero when ``p_y`` rounds to 1.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.argmax(p, axis=1) if labels is None else np.asarray(labels, dtype=np.int64)
    rows = np.arange(p.shape[0])
    r = p.copy()
    r[rows, y] = 0.0
    r[rows, y] = -r.sum(axis=1)
    return r


def gradient_residuals(probe: LinearProbe, x, labels=None) -> np.ndarray:
    return residuals_from_proba(probe.predict_proba(x), labels)


def gradient_embeddings(probe: LinearProbe, x, labels=None) -> EmbeddingSet:
    """Last-layer cross-entropy gradients ``(p - onehot(y)) (x) x``.

    Row ``i`` is the gradient of ``-log p_y(x_i)`` with respect to the
    weight matrix, flattened class-major, under the hypothesized label
    ``argmax p`` unless explicit ``labels`` are given.
    """
    vec = _vectors(x)
    r = gradient_residuals(probe, vec, labels)
    g = (r[:, :, None] * vec[:, None, :]).reshape(vec.shape[0], -1)
    ids = x.ids if isinstance(x, EmbeddingSet) else None
    return EmbeddingSet(g, ids=ids)


def gradient_kernel(probe: LinearProbe, a, b, a_labels=None, b_labels=None,
                    metric: str = "cosine") -> np.ndarray:
    """Gradient-embedding similarities without materialising the embeddings.

    Uses ``<r_i (x) x_i, r_j (x) x_j> = <r_i, r_j> <x_i, x_j>``, so the cost
    is O(c + d) per pair instead of O(c d).
    """
    xa, xb = _vectors(a), _vectors(b)
    ra = gradient_residuals(probe, xa, a_labels)
    rb = gradient_residuals(probe, xb, b_labels)
    vals = (ra @ rb.T) * (xa @ xb.T)
    if metric == "cosine":
        na = np.linalg.norm(ra, axis=1) * np.linalg.norm(xa, axis=1)
        nb = np.linalg.norm(rb, axis=1) * np.linalg.norm(xb, axis=1)
        na = np.where(na == 0, 1.0, na)
        nb = np.where(nb == 0, 1.0, nb)
        vals = np.clip(vals / np.outer(na, nb), -1.0, 1.0)
    return vals


def misclassified_subset(probe: LinearProbe, target: EmbeddingSet) -> np.ndarray:
    """Positions in ``target`` the probe gets wrong; all of them if none."""
    if target.labels is None:
        raise ValueError("target set must be labeled")
    wrong = np.flatnonzero(probe.predict(target.vectors) != target.labels)
    if wrong.size == 0:
        return np.arange(target.n)
    return wrong
