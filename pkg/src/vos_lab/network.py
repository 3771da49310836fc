"""The learnable model: MLP backbone, linear classifier, energy weights, phi.

Data flow for a batch ``X`` of shape ``(n, d)``::

    H = backbone(X)                       (n, m)   ReLU on hidden layers, linear output
    F = H @ W_cls [+ b_cls]               (n, C)   C = K, or K + 1 for the extra-class head
    E = -log sum_k softplus(w_raw_k) e^F_k (n,)    over the first K logits
    P = relu(E * W1 + b1) @ W2 + b2       (n,)     the scalar phi head

Outliers live in feature space, so they enter at ``F`` and gradients from
them stop at the classifier (they never reach the backbone).

Checkpoint layout (all little-endian)::

    8 bytes  magic b"VOSCKPT1"
    u32      number of backbone sizes L, then L x u32 sizes [d, ..., m]
    u32 K, u32 m, u32 phi hidden width, u32 classifier columns C,
    u32 flags (bit 0: classifier bias), u32 score kind, f64 energy center
    f64[]    every parameter tensor in ``param_names()`` order, C order
"""

import struct
from dataclasses import dataclass

import numpy as np

from .mathkit import inverse_softplus, logsumexp_weighted, sigmoid, softplus

MAGIC = b"VOSCKPT1"

# how the ID-probability score is formed; see evalkit.ood_score
SCORE_PHI = 0
SCORE_ENERGY = 1
SCORE_EXTRA_CLASS = 2


def glorot_uniform(fan_in, fan_out, rng):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def softmax_posterior(F):
    F = np.asarray(F, dtype=np.float64)
    Z = F - np.max(F, axis=-1, keepdims=True)
    e = np.exp(Z)
    return e / np.sum(e, axis=-1, keepdims=True)


def energy_from_logits(F, w=None):
    """``-log sum_k w_k exp(F_k)`` along the last axis (w defaults to ones)."""
    return -logsumexp_weighted(F, w, axis=-1)


def energy_grad_logits(F, w):
    """``dE/dF_k = -w_k e^F_k / sum_j w_j e^F_j`` (a weighted softmax, negated)."""
    return -softmax_posterior(np.asarray(F, dtype=np.float64) + np.log(w))


@dataclass
class Tape:
    """Intermediates of one forward pass, consumed by ``Network.backward``."""

    inputs: list
    pre: list
    H: np.ndarray
    F: np.ndarray
    E: np.ndarray
    A: np.ndarray
    P: np.ndarray
    V: np.ndarray = None
    F_out: np.ndarray = None
    E_out: np.ndarray = None
    A_out: np.ndarray = None
    P_out: np.ndarray = None


class Network:
    def __init__(self, layer_sizes, num_classes, phi_hidden=512, cls_bias=False,
                 extra_class=False, rng=None, score_kind=SCORE_PHI, energy_center=0.0):
        if len(layer_sizes) < 2:
            raise ValueError("backbone needs at least input and feature sizes")
        self.layer_sizes = [int(s) for s in layer_sizes]
        self.num_classes = int(num_classes)
        self.phi_hidden = int(phi_hidden)
        self.cls_bias = bool(cls_bias)
        self.num_outputs = self.num_classes + (1 if extra_class else 0)
        self.score_kind = int(score_kind)
        self.energy_center = float(energy_center)
        self.params = {}
        for i, (a, b) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            self.params[f"backbone.W{i}"] = np.zeros((a, b))
            self.params[f"backbone.b{i}"] = np.zeros(b)
        m, C, Hd = self.feature_dim, self.num_outputs, self.phi_hidden
        self.params["head.W_cls"] = np.zeros((m, C))
        if self.cls_bias:
            self.params["head.b_cls"] = np.zeros(C)
        self.params["head.w_raw"] = np.full(self.num_classes, float(inverse_softplus(1.0)))
        self.params["phi.W1"] = np.zeros((1, Hd))
        self.params["phi.b1"] = np.zeros(Hd)
        self.params["phi.W2"] = np.zeros((Hd, 1))
        self.params["phi.b2"] = np.zeros(1)
        if rng is not None:
            self.initialize(rng)
        self._tape = None

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def feature_dim(self):
        return self.layer_sizes[-1]

    @property
    def num_layers(self):
        return len(self.layer_sizes) - 1

    @property
    def extra_class(self):
        return self.num_outputs == self.num_classes + 1

    def param_names(self):
        return list(self.params)

    def initialize(self, rng):
        """Glorot-uniform weights, biases uniform in +-1/sqrt(fan_in), energy
        weights at exactly 1. Tensors are filled in ``param_names()`` order."""
        fan_in = None
        for name, p in self.params.items():
            if name == "head.w_raw":
                p[...] = inverse_softplus(1.0)
            elif p.ndim == 2:
                fan_in = p.shape[0]
                p[...] = glorot_uniform(p.shape[0], p.shape[1], rng)
            else:
                bound = 1.0 / np.sqrt(fan_in)
                p[...] = rng.uniform(-bound, bound, size=p.shape)

    def copy(self):
        other = Network.__new__(Network)
        other.__dict__.update(self.__dict__)
        other.layer_sizes = list(self.layer_sizes)
        other.params = {k: v.copy() for k, v in self.params.items()}
        other._tape = None
        return other

    @property
    def energy_weights(self):
        return softplus(self.params["head.w_raw"])

    # forward pieces -------------------------------------------------------

    def features(self, X, _record=None):
        X = np.asarray(X, dtype=np.float64)
        single = X.ndim == 1
        X = np.atleast_2d(X)
        if X.shape[1] != self.input_dim:
            raise ValueError(f"input dimension {X.shape[1]} != {self.input_dim}")
        a = X
        for i in range(self.num_layers):
            z = a @ self.params[f"backbone.W{i}"] + self.params[f"backbone.b{i}"]
            if _record is not None:
                _record[0].append(a)
                _record[1].append(z)
            a = np.maximum(z, 0.0) if i < self.num_layers - 1 else z
        return a[0] if single else a

    def logits(self, H):
        H = np.asarray(H, dtype=np.float64)
        if H.shape[-1] != self.feature_dim:
            raise ValueError(f"feature dimension {H.shape[-1]} != {self.feature_dim}")
        F = H @ self.params["head.W_cls"]
        if self.cls_bias:
            F = F + self.params["head.b_cls"]
        return F

    def energy(self, F, w=None):
        """Generalized energy over the K class logits (extra column ignored)."""
        F = np.asarray(F, dtype=np.float64)
        if w is None:
            w = self.energy_weights
        return energy_from_logits(F[..., : self.num_classes], w)

    def _phi_hidden(self, E):
        E = np.asarray(E, dtype=np.float64)
        return E[..., None] * self.params["phi.W1"][0] + self.params["phi.b1"]

    def phi(self, E):
        A = self._phi_hidden(E)
        return np.maximum(A, 0.0) @ self.params["phi.W2"][:, 0] + self.params["phi.b2"][0]

    def forward(self, X, outliers=None):
        """Full forward pass over an ID batch (and optional feature-space outliers).

        The intermediates are kept for a following :meth:`backward` call.
        """
        inputs, pre = [], []
        H = self.features(np.atleast_2d(X), _record=(inputs, pre))
        F = self.logits(H)
        E = self.energy(F)
        A = self._phi_hidden(E)
        P = np.maximum(A, 0.0) @ self.params["phi.W2"][:, 0] + self.params["phi.b2"][0]
        tape = Tape(inputs=inputs, pre=pre, H=H, F=F, E=E, A=A, P=P)
        if outliers is not None and len(outliers):
            V = np.atleast_2d(np.asarray(outliers, dtype=np.float64))
            tape.V = V
            tape.F_out = self.logits(V)
            tape.E_out = self.energy(tape.F_out)
            tape.A_out = self._phi_hidden(tape.E_out)
            tape.P_out = (np.maximum(tape.A_out, 0.0) @ self.params["phi.W2"][:, 0]
                          + self.params["phi.b2"][0])
        self._tape = tape
        return tape

    # backward ---------------------------------------------------------------

    def zero_grads(self):
        return {k: np.zeros_like(v) for k, v in self.params.items()}

    def _head_backward(self, grads, Hin, F, E, A, dF, dE, dP):
        """Accumulate head gradients for one branch; returns dL/dHin."""
        n = F.shape[0]
        dF = np.zeros_like(F) if dF is None else np.array(dF, dtype=np.float64)
        dE = np.zeros(n) if dE is None else np.array(dE, dtype=np.float64)
        if dP is not None:
            dP = np.asarray(dP, dtype=np.float64)
            R = np.maximum(A, 0.0)
            W2 = self.params["phi.W2"][:, 0]
            grads["phi.W2"][:, 0] += R.T @ dP
            grads["phi.b2"][0] += np.sum(dP)
            dA = dP[:, None] * W2 * (A > 0.0)
            grads["phi.W1"][0] += E @ dA
            grads["phi.b1"] += np.sum(dA, axis=0)
            dE = dE + dA @ self.params["phi.W1"][0]
        if np.any(dE != 0.0):
            K = self.num_classes
            w_raw = self.params["head.w_raw"]
            w = softplus(w_raw)
            g = energy_grad_logits(F[:, :K], w)
            dF[:, :K] += dE[:, None] * g
            # dE/dw_k = -e^F_k / sum_j w_j e^F_j, formed without dividing by
            # w_k (which underflows once a weight is driven far negative).
            FK = F[:, :K]
            dEdw = -np.exp(FK - logsumexp_weighted(FK, w, axis=1)[:, None])
            grads["head.w_raw"] += (dE @ dEdw) * sigmoid(w_raw)
        grads["head.W_cls"] += Hin.T @ dF
        if self.cls_bias:
            grads["head.b_cls"] += np.sum(dF, axis=0)
        return dF @ self.params["head.W_cls"].T

    def backward(self, dF=None, dE=None, dP=None, dF_out=None, dE_out=None, dP_out=None):
        """Gradients of a scalar loss given its derivatives w.r.t. logits,
        energies and phi outputs of the ID batch and of the outliers."""
        tape = self._tape
        if tape is None:
            raise RuntimeError("backward called before forward")
        grads = self.zero_grads()
        dH = self._head_backward(grads, tape.H, tape.F, tape.E, tape.A, dF, dE, dP)
        if tape.V is not None and any(g is not None for g in (dF_out, dE_out, dP_out)):
            self._head_backward(grads, tape.V, tape.F_out, tape.E_out, tape.A_out,
                                dF_out, dE_out, dP_out)
        g = dH
        for i in reversed(range(self.num_layers)):
            if i < self.num_layers - 1:
                g = g * (tape.pre[i] > 0.0)
            grads[f"backbone.W{i}"] += tape.inputs[i].T @ g
            grads[f"backbone.b{i}"] += np.sum(g, axis=0)
            if i > 0:
                g = g @ self.params[f"backbone.W{i}"].T
        return grads


def save_checkpoint(net, path):
    with open(path, "wb") as fh:
        fh.write(checkpoint_bytes(net))


def checkpoint_bytes(net):
    parts = [MAGIC, struct.pack("<I", len(net.layer_sizes))]
    parts.append(struct.pack(f"<{len(net.layer_sizes)}I", *net.layer_sizes))
    parts.append(struct.pack("<6I", net.num_classes, net.feature_dim, net.phi_hidden,
                             net.num_outputs, 1 if net.cls_bias else 0, net.score_kind))
    parts.append(struct.pack("<d", net.energy_center))
    for name in net.param_names():
        parts.append(np.ascontiguousarray(net.params[name], dtype="<f8").tobytes())
    return b"".join(parts)


def load_checkpoint(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    return checkpoint_from_bytes(blob)


def checkpoint_from_bytes(blob):
    if blob[:8] != MAGIC:
        raise ValueError("not a VOSCKPT1 checkpoint (bad magic)")
    off = 8
    (n_sizes,) = struct.unpack_from("<I", blob, off)
    off += 4
    sizes = list(struct.unpack_from(f"<{n_sizes}I", blob, off))
    off += 4 * n_sizes
    K, m, hidden, C, flags, score_kind = struct.unpack_from("<6I", blob, off)
    off += 24
    (center,) = struct.unpack_from("<d", blob, off)
    off += 8
    if sizes[-1] != m or C not in (K, K + 1):
        raise ValueError("inconsistent checkpoint header")
    net = Network(sizes, K, phi_hidden=hidden, cls_bias=bool(flags & 1),
                  extra_class=C == K + 1, score_kind=score_kind, energy_center=center)
    for name in net.param_names():
        p = net.params[name]
        nbytes = 8 * p.size
        if off + nbytes > len(blob):
            raise ValueError(f"checkpoint truncated while reading {name}")
        net.params[name] = np.frombuffer(blob, dtype="<f8", count=p.size,
                                         offset=off).reshape(p.shape).astype(np.float64)
        off += nbytes
    if off != len(blob):
        raise ValueError("trailing bytes after checkpoint parameters")
    return net
