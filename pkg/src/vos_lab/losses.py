"""Training objectives and their analytic input gradients.

Every loss is a batch mean. The ``*_grad`` variants return ``(value, grads)``
where the grads are derivatives of that mean with respect to the inputs, so
they can be fed straight into :meth:`Network.backward`.
"""

from dataclasses import dataclass

import numpy as np

from .mathkit import logsumexp_weighted, sigmoid, softplus

VOS = "vos"
HINGE = "hinge"
CONSTANT_W = "constant_w"
KPLUS1 = "kplus1"
MODES = (VOS, HINGE, CONSTANT_W, KPLUS1)

DEFAULT_M_IN = -25.0
DEFAULT_M_OUT = -7.0


@dataclass(frozen=True)
class LossMode:
    kind: str = VOS
    m_in: float = DEFAULT_M_IN
    m_out: float = DEFAULT_M_OUT

    def __post_init__(self):
        if self.kind not in MODES:
            raise ValueError(f"unknown loss mode {self.kind!r}; expected one of {MODES}")
        if self.kind == HINGE and not self.m_in < self.m_out:
            raise ValueError(f"hinge margins need m_in < m_out, got {self.m_in}, {self.m_out}")


@dataclass(frozen=True)
class LossReport:
    total: float
    cls: float
    uncertainty: float
    beta: float


def _check_labels(y, n_classes):
    y = np.asarray(y)
    if np.any(y < 0) or np.any(y >= n_classes):
        raise ValueError(f"label out of range [0, {n_classes})")
    return y.astype(np.int64)


def cross_entropy_grad(F, y):
    """Mean ``-log softmax(F)[y]`` and its gradient w.r.t. ``F``."""
    F = np.atleast_2d(np.asarray(F, dtype=np.float64))
    y = np.atleast_1d(_check_labels(y, F.shape[1]))
    n = F.shape[0]
    lse = logsumexp_weighted(F, axis=1)
    loss = float(np.mean(lse - F[np.arange(n), y]))
    dF = np.exp(F - lse[:, None])
    dF[np.arange(n), y] -= 1.0
    return loss, dF / n


def cross_entropy(F, y):
    return cross_entropy_grad(F, y)[0]


def kplus1_cross_entropy(F_ext, y_ext):
    """Cross-entropy on the widened head; outliers carry label K."""
    return cross_entropy_grad(F_ext, y_ext)[0]


def uncertainty_loss_grad(phi_id, phi_out):
    """Logistic separation loss on phi(energy) values.

    Outliers are pushed towards large phi, ID samples towards small phi:
    ``mean softplus(-phi_out) + mean softplus(phi_id)``.
    """
    phi_id = np.atleast_1d(np.asarray(phi_id, dtype=np.float64))
    phi_out = np.atleast_1d(np.asarray(phi_out, dtype=np.float64))
    if phi_id.size == 0 or phi_out.size == 0:
        raise ValueError("uncertainty loss needs non-empty ID and outlier batches")
    loss = float(np.mean(softplus(-phi_out)) + np.mean(softplus(phi_id)))
    d_id = sigmoid(phi_id) / phi_id.size
    d_out = -sigmoid(-phi_out) / phi_out.size
    return loss, d_id, d_out


def uncertainty_loss(E_id, E_out, phi=None):
    """Value of the logistic uncertainty loss; ``phi`` maps energies first if given."""
    if phi is not None:
        E_id, E_out = phi(np.asarray(E_id)), phi(np.asarray(E_out))
    return uncertainty_loss_grad(E_id, E_out)[0]


def hinge_uncertainty_loss_grad(E_id, E_out, m_in=DEFAULT_M_IN, m_out=DEFAULT_M_OUT):
    if not m_in < m_out:
        raise ValueError(f"hinge margins need m_in < m_out, got {m_in}, {m_out}")
    E_id = np.atleast_1d(np.asarray(E_id, dtype=np.float64))
    E_out = np.atleast_1d(np.asarray(E_out, dtype=np.float64))
    if E_id.size == 0 or E_out.size == 0:
        raise ValueError("hinge loss needs non-empty ID and outlier batches")
    r_id = np.maximum(0.0, E_id - m_in)
    r_out = np.maximum(0.0, m_out - E_out)
    loss = float(np.mean(r_id ** 2) + np.mean(r_out ** 2))
    return loss, 2.0 * r_id / E_id.size, -2.0 * r_out / E_out.size


def hinge_uncertainty_loss(E_id, E_out, m_in=DEFAULT_M_IN, m_out=DEFAULT_M_OUT):
    return hinge_uncertainty_loss_grad(E_id, E_out, m_in, m_out)[0]


def total_loss(net, X, y, outliers=None, mode=LossMode(), beta=0.1, grad=True):
    """Joint objective ``cls + beta * uncertainty`` on one batch.

    The regularizer is applied only when ``outliers`` is given and ``beta``
    is positive. In the extra-class mode the outliers are classified as
    class K instead and that term, weighted by ``beta``, is folded into
    ``cls``; ``uncertainty`` is then reported as 0.

    Returns ``(LossReport, grads)``; grads is None when ``grad`` is False.
    """
    active = outliers is not None and len(outliers) > 0 and beta > 0
    tape = net.forward(X, outliers if active else None)
    cls, dF = cross_entropy_grad(tape.F, y)
    unc = 0.0
    kw = {}
    if active and mode.kind == KPLUS1:
        if not net.extra_class:
            raise ValueError("extra-class mode needs a network with K + 1 outputs")
        y_out = np.full(tape.F_out.shape[0], net.num_classes)
        cls_out, dF_out = cross_entropy_grad(tape.F_out, y_out)
        cls = cls + beta * cls_out
        kw["dF_out"] = beta * dF_out
    elif active and mode.kind == HINGE:
        unc, d_id, d_out = hinge_uncertainty_loss_grad(tape.E, tape.E_out, mode.m_in, mode.m_out)
        kw.update(dE=beta * d_id, dE_out=beta * d_out)
    elif active:
        unc, d_id, d_out = uncertainty_loss_grad(tape.P, tape.P_out)
        kw.update(dP=beta * d_id, dP_out=beta * d_out)
    report = LossReport(total=cls + beta * unc, cls=cls, uncertainty=unc, beta=beta)
    if not grad:
        return report, None
    grads = net.backward(dF=dF, **kw)
    if mode.kind == CONSTANT_W:
        grads["head.w_raw"][...] = 0.0
    return report, grads
