"""Small numerical kernels shared by the rest of the package.

Everything works in float64. Random numbers come from numpy's counter-based
Philox bit generator so that a seed fully determines every stream, and
independent streams are split off a master seed with ``SeedSequence.spawn``.
"""

import math

import numpy as np


class NotSPDError(ValueError):
    """Raised when a Cholesky factorization meets a non-positive pivot."""

    def __init__(self, pivot, value):
        super().__init__(f"matrix is not SPD: pivot {pivot} has value {value!r}")
        self.pivot = pivot
        self.value = value


def make_rng(seed):
    """Return a deterministic generator for ``seed`` (or a SeedSequence)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def split_rng(seed, n):
    """Derive ``n`` independent generators from one master seed."""
    children = np.random.SeedSequence(int(seed)).spawn(n)
    return [make_rng(child) for child in children]


def standard_normal(n, rng, dim=None):
    """Draw ``n`` i.i.d. N(0, 1) values (shape ``(n,)`` or ``(n, dim)``)."""
    if n < 1:
        raise ValueError(f"need at least one draw, got n={n}")
    shape = (n,) if dim is None else (n, dim)
    return rng.standard_normal(shape)


def cholesky(S):
    """Lower Cholesky factor of a symmetric positive-definite matrix.

    Column-by-column, no pivoting. A non-positive pivot raises
    :class:`NotSPDError` carrying the failing index.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    scale = max(np.max(np.abs(S)), 1.0) if S.size else 1.0
    if np.max(np.abs(S - S.T), initial=0.0) > 1e-10 * scale:
        raise ValueError("matrix is not symmetric")
    n = S.shape[0]
    L = np.zeros_like(S)
    for j in range(n):
        pivot = S[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > 0.0:
            raise NotSPDError(j, float(pivot))
        L[j, j] = math.sqrt(pivot)
        if j + 1 < n:
            L[j + 1:, j] = (S[j + 1:, j] - L[j + 1:, :j] @ L[j, :j]) / L[j, j]
    return L


def logsumexp_weighted(values, weights=None, axis=-1):
    """``log(sum_k weights_k * exp(values_k))`` along ``axis``, max-shifted.

    Weights must be strictly positive; they enter as ``log(weights)`` added
    to the values, so the result is also correct when the weights are tiny.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0 or values.shape[axis] == 0:
        raise ValueError("logsumexp of an empty input")
    if weights is None:
        shifted = values
    else:
        weights = np.asarray(weights, dtype=np.float64)
        if np.any(weights <= 0.0):
            raise ValueError("weights must be strictly positive")
        shifted = values + np.log(weights)
    top = np.max(shifted, axis=axis, keepdims=True)
    out = top + np.log(np.sum(np.exp(shifted - top), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis) if out.ndim > 0 else out


def softplus(x):
    """``log(1 + exp(x))`` without overflow."""
    x = np.asarray(x, dtype=np.float64)
    return np.logaddexp(0.0, x)


def inverse_softplus(y):
    """Inverse of :func:`softplus` for ``y > 0``."""
    y = np.asarray(y, dtype=np.float64)
    return y + np.log(-np.expm1(-y))


def sigmoid(x):
    """Logistic function, stable for large ``|x|``."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ez = np.exp(x[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out
