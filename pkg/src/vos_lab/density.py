"""Class-conditional feature queues and the tied-covariance Gaussian fit.

Each class keeps a bounded FIFO of recent penultimate-layer features. The
Gaussian model is refit from whatever the queues hold: per-class means plus
one pooled covariance, with a small ridge so the Cholesky always exists.
"""

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .mathkit import cholesky, standard_normal

DEFAULT_RIDGE = 1e-4
LOG_2PI = math.log(2.0 * math.pi)


class InsufficientSamplesError(ValueError):
    pass


class ClassQueue:
    """Fixed-capacity FIFO of feature vectors for one class."""

    def __init__(self, class_id, capacity, dim):
        if capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        self.class_id = int(class_id)
        self.capacity = int(capacity)
        self.dim = int(dim)
        self._buf = deque(maxlen=self.capacity)

    def __len__(self):
        return len(self._buf)

    def enqueue(self, feature):
        feature = np.array(feature, dtype=np.float64).reshape(-1)
        if feature.shape[0] != self.dim:
            raise ValueError(
                f"feature has dimension {feature.shape[0]}, queue expects {self.dim}"
            )
        self._buf.append(feature)
        return self

    def extend(self, features):
        for f in np.atleast_2d(features):
            self.enqueue(f)
        return self

    def contents(self):
        """Queue contents as an ``(n, dim)`` array, oldest first."""
        if not self._buf:
            return np.empty((0, self.dim))
        return np.stack(self._buf)


def make_queues(num_classes, capacity, dim):
    return [ClassQueue(k, capacity, dim) for k in range(num_classes)]


@dataclass(frozen=True)
class GaussianModel:
    class_ids: tuple
    means: np.ndarray  # (len(class_ids), m)
    tied_cov: np.ndarray
    chol: np.ndarray
    chol_inv: np.ndarray
    log_det: float

    @property
    def dim(self):
        return self.means.shape[1]

    @property
    def num_classes(self):
        return len(self.class_ids)

    def index(self, class_id):
        try:
            return self.class_ids.index(class_id)
        except ValueError:
            raise ValueError(f"class {class_id} is not part of this model") from None


def estimate(queues, ridge=DEFAULT_RIDGE):
    """Fit class means and the pooled covariance over the queue contents.

    ``tied_cov = (1/N) * sum_k sum_i (h_i - mu_k)(h_i - mu_k)^T + ridge * I``
    with N the total number of queued vectors.
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    if not queues:
        raise ValueError("no queues given")
    dims = {q.dim for q in queues}
    if len(dims) != 1:
        raise ValueError(f"queues disagree on feature dimension: {sorted(dims)}")
    means, centered = [], []
    for q in queues:
        X = q.contents()
        if X.shape[0] < 2:
            raise InsufficientSamplesError(
                f"insufficient samples for class {q.class_id}: {X.shape[0]} < 2"
            )
        mu = X.mean(axis=0)
        means.append(mu)
        centered.append(X - mu)
    D = np.concatenate(centered)
    cov = D.T @ D / D.shape[0]
    cov = 0.5 * (cov + cov.T) + ridge * np.eye(D.shape[1])
    L = cholesky(cov)
    return GaussianModel(
        class_ids=tuple(q.class_id for q in queues),
        means=np.stack(means),
        tied_cov=cov,
        chol=L,
        chol_inv=solve_triangular(L, np.eye(L.shape[0]), lower=True),
        log_det=float(2.0 * np.sum(np.log(np.diag(L)))),
    )


def log_density(model, class_id, v):
    """Log of N(v; mu_k, tied_cov). ``v`` may be one vector or a stack of rows.

    The Mahalanobis term uses the inverse Cholesky factor cached at fit time
    (itself obtained by a triangular solve). The product goes through einsum
    rather than BLAS so each row's value does not depend on how many rows are
    evaluated together: re-scoring a selected outlier reproduces its pool
    likelihood bit for bit.
    """
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    V = np.atleast_2d(v)
    if V.shape[1] != model.dim:
        raise ValueError(f"vector dimension {V.shape[1]} != model dimension {model.dim}")
    mu = model.means[model.index(class_id)]
    Z = np.einsum("nj,ij->ni", V - mu, model.chol_inv)
    maha = np.sum(Z * Z, axis=1)
    out = -0.5 * model.dim * LOG_2PI - 0.5 * model.log_det - 0.5 * maha
    return float(out[0]) if single else out


def sample(model, class_id, n, rng):
    """Draw ``n`` rows from N(mu_k, tied_cov) as ``mu_k + L z``."""
    mu = model.means[model.index(class_id)]
    Z = standard_normal(n, rng, dim=model.dim)
    return mu + Z @ model.chol.T
