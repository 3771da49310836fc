"""Toy benchmark: a K-class Gaussian mixture in the plane plus far-away OOD points.

Dataset files are comma-separated text with header ``x0,...,x{d-1},y``.
Unlabeled point sets (the OOD split) drop the ``y`` column.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .mathkit import NotSPDError, cholesky, split_rng


def ring_means(num_classes=3, radius=4.0):
    angles = 2.0 * np.pi * np.arange(num_classes) / num_classes
    return np.column_stack([radius * np.cos(angles), radius * np.sin(angles)])


@dataclass
class DatasetSpec:
    num_classes: int = 3
    dim: int = 2
    radius: float = 4.0
    means: np.ndarray = None  # defaults to ring_means(num_classes, radius)
    cov: np.ndarray = None  # shared covariance, defaults to cov_scale * I
    cov_scale: float = 0.5
    n_per_class: int = 500
    n_test_per_class: int = 500
    ood_kind: str = "annulus"
    r_min: float = 8.0
    r_max: float = 12.0
    box: float = 12.0
    box_exclusion_sigmas: float = 6.0
    n_ood: int = 1500
    seed: int = 0

    def __post_init__(self):
        if self.means is None:
            if self.dim != 2:
                raise ValueError("default ring means are only defined for dim=2")
            self.means = ring_means(self.num_classes, self.radius)
        self.means = np.asarray(self.means, dtype=np.float64)
        if self.cov is None:
            self.cov = self.cov_scale * np.eye(self.dim)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        self.validate()

    def validate(self):
        if self.means.shape != (self.num_classes, self.dim):
            raise ValueError(f"means must have shape ({self.num_classes}, {self.dim})")
        if self.cov.shape != (self.dim, self.dim):
            raise ValueError(f"cov must have shape ({self.dim}, {self.dim})")
        if min(self.n_per_class, self.n_test_per_class, self.n_ood) < 1:
            raise ValueError("sample counts must be >= 1")
        if self.ood_kind not in ("annulus", "box"):
            raise ValueError(f"unknown OOD kind {self.ood_kind!r}")
        if self.ood_kind == "annulus":
            if self.r_min > self.r_max:
                raise ValueError("annulus needs r_min <= r_max")
            sigma = math.sqrt(max(np.linalg.eigvalsh(self.cov).max(), 0.0))
            reach = np.linalg.norm(self.means, axis=1).max() + 3.0 * sigma
            if not self.r_min > reach:
                raise ValueError(f"r_min={self.r_min} does not clear the ID support "
                                 f"(max |mean| + 3 sigma = {reach:.4g})")

    @property
    def sigma(self):
        return math.sqrt(np.linalg.eigvalsh(self.cov).max())


def _cov_factor(cov):
    if not np.any(cov):
        return np.zeros_like(cov)
    try:
        return cholesky(cov)
    except NotSPDError as exc:
        raise ValueError(f"invalid covariance: {exc}") from None


def make_gmm(spec, rng, n_per_class=None):
    """Class-major draws ``mean_k + L z``; returns ``(X, y)``."""
    n = spec.n_per_class if n_per_class is None else n_per_class
    L = _cov_factor(spec.cov)
    X, y = [], []
    for k in range(spec.num_classes):
        Z = rng.standard_normal((n, spec.dim))
        X.append(spec.means[k] + Z @ L.T)
        y.append(np.full(n, k, dtype=np.int64))
    return np.concatenate(X), np.concatenate(y)


def make_ood_annulus(spec, rng, n=None):
    """Uniform angles with radii uniform in ``[r_min, r_max]``."""
    if spec.r_min > spec.r_max:
        raise ValueError("annulus needs r_min <= r_max")
    n = spec.n_ood if n is None else n
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    r = rng.uniform(spec.r_min, spec.r_max, n)
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def mahalanobis_to_means(spec, X):
    """``(n, K)`` Mahalanobis distances of each point to each class mean."""
    P = np.linalg.inv(spec.cov)
    D = np.asarray(X)[:, None, :] - spec.means[None]
    return np.sqrt(np.einsum("nki,ij,nkj->nk", D, P, D))


def make_ood_box(spec, rng, n=None):
    """Uniform points in ``[-box, box]^2`` outside every class's exclusion ellipsoid."""
    n = spec.n_ood if n is None else n
    out = []
    total = 0
    while total < n:
        cand = rng.uniform(-spec.box, spec.box, size=(2 * n, spec.dim))
        keep = cand[mahalanobis_to_means(spec, cand).min(axis=1) > spec.box_exclusion_sigmas]
        out.append(keep)
        total += len(keep)
    return np.concatenate(out)[:n]


def make_ood(spec, rng, n=None):
    if spec.ood_kind == "box":
        return make_ood_box(spec, rng, n)
    return make_ood_annulus(spec, rng, n)


def make_splits(spec):
    """ID train, ID test and OOD sets, each from its own stream of ``spec.seed``."""
    r_train, r_test, r_ood = split_rng(spec.seed, 3)
    train = make_gmm(spec, r_train)
    test = make_gmm(spec, r_test, n_per_class=spec.n_test_per_class)
    return train, test, make_ood(spec, r_ood)


def write_dataset(path, X, y=None):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    header = [f"x{i}" for i in range(X.shape[1])] + ([] if y is None else ["y"])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i, row in enumerate(X):
            cells = [f"{v:.17g}" for v in row]
            if y is not None:
                cells.append(str(int(y[i])))
            fh.write(",".join(cells) + "\n")


def read_dataset(path):
    """Parse a dataset file; returns ``(X, y)`` with ``y`` None for unlabeled sets."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    labeled = header[-1:] == ["y"]
    d = len(header) - int(labeled)
    if d < 1 or header[:d] != [f"x{i}" for i in range(d)]:
        raise ValueError(f"{path}:1: bad header {rows[0]!r}")
    X, y = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            X.append([float(c) for c in row[:d]])
            if labeled:
                label = float(row[d])
                if label != int(label) or label < 0:
                    raise ValueError
                y.append(int(label))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from None
        if not all(math.isfinite(v) for v in X[-1]):
            raise ValueError(f"{path}:{lineno}: non-finite value")
    if not X:
        raise ValueError(f"{path}: no data rows")
    return np.array(X, dtype=np.float64), (np.array(y, dtype=np.int64) if labeled else None)
