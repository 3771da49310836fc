"""The unknown-aware training loop.

Each iteration takes a mini-batch, pushes its features into the per-class
queues, and (from the start iteration on) refits the class Gaussians,
synthesizes ``t`` virtual outliers per class and adds the weighted
uncertainty term to the classification loss. Parameters are updated with
SGD + momentum. Three generator streams are split off the seed (weight
init, batch order, outlier sampling) so switching the regularizer on or off
never perturbs the batch order.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import density, losses, network, synthesis
from .mathkit import split_rng

log = logging.getLogger(__name__)


class NumericalError(RuntimeError):
    pass


@dataclass
class RunConfig:
    total_iters: int = 3000
    start_iter: int = None  # absolute; overrides start_fraction when set
    start_fraction: float = 2.0 / 3.0
    beta: float = 0.1
    t: int = synthesis.DEFAULT_T
    pool_size: int = synthesis.DEFAULT_POOL_SIZE
    queue_capacity: int = 300
    ridge: float = density.DEFAULT_RIDGE
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 0.0
    grad_clip: float = 10.0  # global L2 norm cap; 0 disables
    batch_size: int = 64
    loss_mode: str = losses.VOS
    m_in: float = losses.DEFAULT_M_IN
    m_out: float = losses.DEFAULT_M_OUT
    outlier_source: str = "vos"  # or "noise": fixed Gaussian noise as outliers
    noise_scale: float = 1.0
    seed: int = 0
    layer_sizes: tuple = (2, 64, 64, 8)
    num_classes: int = 3
    phi_hidden: int = 512
    cls_bias: bool = False
    log_every: int = 50

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        self.validate()

    def validate(self):
        for name in ("total_iters", "t", "pool_size", "queue_capacity", "batch_size",
                     "num_classes", "phi_hidden", "log_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.start_iteration <= self.total_iters:
            raise ValueError("start iteration must lie in [0, total_iters]")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.t > self.pool_size:
            raise ValueError("t must not exceed pool_size")
        if self.ridge < 0 or self.learning_rate < 0 or self.noise_scale <= 0:
            raise ValueError("ridge and learning_rate must be >= 0, noise_scale > 0")
        if self.grad_clip < 0:
            raise ValueError("grad_clip must be >= 0")
        if self.outlier_source not in ("vos", "noise"):
            raise ValueError(f"unknown outlier source {self.outlier_source!r}")
        if len(self.layer_sizes) < 2:
            raise ValueError("layer_sizes needs at least input and feature sizes")
        self.mode  # validates loss mode and margins

    @property
    def start_iteration(self):
        if self.start_iter is not None:
            return int(self.start_iter)
        return math.ceil(self.start_fraction * self.total_iters)

    @property
    def mode(self):
        return losses.LossMode(self.loss_mode, self.m_in, self.m_out)


def build_network(config, rng):
    kind = config.loss_mode
    score_kind = {losses.HINGE: network.SCORE_ENERGY,
                  losses.KPLUS1: network.SCORE_EXTRA_CLASS}.get(kind, network.SCORE_PHI)
    return network.Network(
        config.layer_sizes, config.num_classes, phi_hidden=config.phi_hidden,
        cls_bias=config.cls_bias, extra_class=kind == losses.KPLUS1, rng=rng,
        score_kind=score_kind, energy_center=0.5 * (config.m_in + config.m_out),
    )


@dataclass
class TrainState:
    config: RunConfig
    net: network.Network
    velocity: dict
    queues: list
    batch_rng: np.random.Generator
    synth_rng: np.random.Generator
    X: np.ndarray
    y: np.ndarray
    iteration: int = 0
    order: np.ndarray = None
    cursor: int = 0
    history: list = field(default_factory=list)
    last_outliers: list = field(default_factory=list)


def init_state(config, X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[1] != config.layer_sizes[0]:
        raise ValueError(f"inputs must have shape (n, {config.layer_sizes[0]})")
    if X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError("inputs and labels must be non-empty and of equal length")
    counts = np.bincount(y, minlength=config.num_classes)
    if counts.size > config.num_classes:
        raise ValueError("label exceeds num_classes")
    if np.any(counts < 2):
        raise ValueError(f"every class needs >= 2 training samples, got counts {counts.tolist()}")
    init_rng, batch_rng, synth_rng = split_rng(config.seed, 3)
    net = build_network(config, init_rng)
    return TrainState(
        config=config, net=net,
        velocity={k: np.zeros_like(v) for k, v in net.params.items()},
        queues=density.make_queues(config.num_classes, config.queue_capacity,
                                   net.feature_dim),
        batch_rng=batch_rng, synth_rng=synth_rng, X=X, y=y,
    )


def next_batch(state):
    n = state.X.shape[0]
    if state.order is None or state.cursor >= n:
        state.order = state.batch_rng.permutation(n)
        state.cursor = 0
    idx = state.order[state.cursor: state.cursor + state.config.batch_size]
    state.cursor += len(idx)
    return state.X[idx], state.y[idx]


def regularizer_active(state):
    c = state.config
    return c.beta > 0 and state.iteration >= c.start_iteration


def make_outliers(state):
    """Virtual outliers for this step, one batch per class with a usable queue."""
    c = state.config
    if c.outlier_source == "noise":
        n = c.t * c.num_classes
        return synthesis.gaussian_noise_outliers(state.net.feature_dim, n, c.noise_scale,
                                                 state.synth_rng), []
    ready = [q for q in state.queues if len(q) >= 2]
    for q in state.queues:
        if len(q) < 2:
            log.warning("iteration %d: class %d has %d queued features; skipping its outliers",
                        state.iteration, q.class_id, len(q))
    if not ready:
        return None, []
    model = density.estimate(ready, c.ridge)
    batches = [synthesis.synthesize(model, q.class_id, c.pool_size, c.t, state.synth_rng)
               for q in ready]
    return np.concatenate([b.outliers for b in batches]), batches


def step(state, Xb, yb):
    """One optimizer step on a batch; returns the loss report."""
    if len(Xb) == 0:
        raise ValueError("empty batch")
    c, net = state.config, state.net
    outliers = None
    state.last_outliers = []
    if c.beta > 0:
        H = net.features(Xb)
        for k in range(c.num_classes):
            state.queues[k].extend(H[yb == k])
        if regularizer_active(state):
            outliers, state.last_outliers = make_outliers(state)
    report, grads = losses.total_loss(net, Xb, yb, outliers, c.mode, c.beta)
    for term in ("cls", "uncertainty", "total"):
        if not math.isfinite(getattr(report, term)):
            raise NumericalError(f"iteration {state.iteration}: non-finite {term} loss "
                                 f"({getattr(report, term)!r})")
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"iteration {state.iteration}: non-finite gradient for {name}")
    if c.grad_clip:
        norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if norm > c.grad_clip:
            for g in grads.values():
                g *= c.grad_clip / norm
    for name, g in grads.items():
        if c.weight_decay:
            g += c.weight_decay * net.params[name]
        v = state.velocity[name]
        v *= c.momentum
        v += g
        net.params[name] -= c.learning_rate * v
    state.iteration += 1
    state.history.append(report)
    return report


def format_log_line(iteration, cls, unc, total):
    return f"{iteration},{cls!r},{unc!r},{total!r}"


LOG_HEADER = "iter,cls_loss,unc_loss,total_loss"


@dataclass
class TrainResult:
    net: network.Network
    history: list
    log_lines: list
    state: TrainState


def train(config, X, y, callback=None):
    """Run ``config.total_iters`` steps and return the trained network.

    The metrics log has one line per ``log_every`` iterations holding the
    mean losses over that interval.
    """
    state = init_state(config, X, y)
    lines = [LOG_HEADER]
    window = []
    for _ in range(config.total_iters):
        Xb, yb = next_batch(state)
        report = step(state, Xb, yb)
        window.append(report)
        if state.iteration % config.log_every == 0 or state.iteration == config.total_iters:
            lines.append(format_log_line(
                state.iteration,
                float(np.mean([r.cls for r in window])),
                float(np.mean([r.uncertainty for r in window])),
                float(np.mean([r.total for r in window])),
            ))
            window = []
        if callback is not None:
            callback(state, report)
    return TrainResult(net=state.net, history=state.history, log_lines=lines, state=state)
