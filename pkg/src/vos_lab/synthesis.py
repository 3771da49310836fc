"""Virtual outlier synthesis in feature space.

For each class a pool of candidates is drawn from the fitted class Gaussian
and the ``t`` least likely candidates are kept. The realized likelihood
threshold (the t-th smallest pool likelihood) is reported alongside them.
"""

from dataclasses import dataclass

import numpy as np

from . import density
from .mathkit import standard_normal

DEFAULT_POOL_SIZE = 10_000
DEFAULT_T = 1


@dataclass(frozen=True)
class OutlierBatch:
    class_id: int
    outliers: np.ndarray  # (t, m)
    log_likelihoods: np.ndarray  # (t,), ascending
    log_epsilon: float
    pool_size: int

    @property
    def epsilon(self):
        return float(np.exp(self.log_epsilon))


def select_lowest(log_likelihoods, t):
    """Pool indices of the ``t`` smallest values; ties go to the earlier draw."""
    order = np.argsort(log_likelihoods, kind="stable")
    return order[:t]


def synthesize(model, class_id, pool_size=DEFAULT_POOL_SIZE, t=DEFAULT_T, rng=None,
               return_pool=False):
    """Pool-and-select sampling from the low-likelihood region of one class.

    Comparisons are done on log-densities, which keeps the selection
    identical to the raw-density version while avoiding underflow.
    """
    if not 1 <= t <= pool_size:
        raise ValueError(f"need 1 <= t <= pool_size, got t={t}, pool_size={pool_size}")
    pool = density.sample(model, class_id, pool_size, rng)
    ll = density.log_density(model, class_id, pool)
    idx = select_lowest(ll, t)
    batch = OutlierBatch(
        class_id=int(class_id),
        outliers=pool[idx],
        log_likelihoods=ll[idx],
        log_epsilon=float(ll[idx[-1]]),
        pool_size=int(pool_size),
    )
    if return_pool:
        return batch, pool, ll
    return batch


def gaussian_noise_outliers(dim, n, scale, rng):
    """Model-independent noise outliers drawn from N(0, scale^2 I)."""
    if scale <= 0:
        raise ValueError("noise scale must be positive")
    return scale * standard_normal(n, rng, dim=dim)
