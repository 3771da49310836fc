"""OOD scores, the operating threshold and binary detection metrics.

All scores follow one convention: higher means "more in-distribution".
"""

import csv
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from . import network
from .mathkit import logsumexp_weighted, sigmoid


def ood_score(net, X):
    """Probability that each input is in-distribution.

    For the logistic-trained models this is ``sigmoid(-phi(E(x)))``. Models
    trained with the hinge objective have no trained phi and use the energy
    relative to the midpoint of the margins; extra-class models use one
    minus the probability of the outlier class.
    """
    F = net.logits(net.features(np.atleast_2d(X)))
    if net.score_kind == network.SCORE_EXTRA_CLASS:
        return 1.0 - network.softmax_posterior(F)[:, -1]
    E = net.energy(F)
    if net.score_kind == network.SCORE_ENERGY:
        return sigmoid(-(E - net.energy_center))
    return sigmoid(-net.phi(E))


def msp_score(net, X):
    F = net.logits(net.features(np.atleast_2d(X)))[:, : net.num_classes]
    return np.max(network.softmax_posterior(F), axis=1)


def raw_energy_score(net, X):
    """Negative energy with unit weights, i.e. ``logsumexp`` of the class logits."""
    F = net.logits(net.features(np.atleast_2d(X)))[:, : net.num_classes]
    return logsumexp_weighted(F, axis=1)


SCORERS = {"vos": ood_score, "msp": msp_score, "energy": raw_energy_score}


def _nonempty(name, scores):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if scores.size == 0:
        raise ValueError(f"{name} is empty")
    return scores


def choose_gamma(id_scores, target_tpr=0.95):
    """Largest threshold that still accepts at least ``target_tpr`` of the ID scores.

    Only the distinct ID scores are candidates, and a score equal to the
    threshold counts as accepted.
    """
    s = np.sort(_nonempty("id_scores", id_scores))
    n = s.size
    cand = np.unique(s)
    accepted = n - np.searchsorted(s, cand, side="left")
    ok = accepted / n >= target_tpr
    if not np.any(ok):
        return float(cand[0])
    return float(cand[ok][-1])


def classify(score, gamma):
    """1 (in-distribution) where ``score >= gamma``, else 0."""
    out = (np.asarray(score) >= gamma).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def fpr_at_tpr(id_scores, ood_scores, tpr=0.95):
    gamma = choose_gamma(id_scores, tpr)
    ood = _nonempty("ood_scores", ood_scores)
    return float(np.mean(ood >= gamma))


def auroc(id_scores, ood_scores):
    """P(ID score > OOD score) + 0.5 P(tie), from midrank sums."""
    a = _nonempty("id_scores", id_scores)
    b = _nonempty("ood_scores", ood_scores)
    ranks = rankdata(np.concatenate([a, b]))
    u = np.sum(ranks[: a.size]) - a.size * (a.size + 1) / 2.0
    return float(u / (a.size * b.size))


def aupr(id_scores, ood_scores, positive="id"):
    """Average precision with step interpolation over the threshold sweep."""
    a = _nonempty("id_scores", id_scores)
    b = _nonempty("ood_scores", ood_scores)
    if positive == "id":
        pos, neg = a, b
    elif positive == "ood":
        pos, neg = -b, -a
    else:
        raise ValueError("positive must be 'id' or 'ood'")
    scores = np.concatenate([pos, neg])
    labels = np.concatenate([np.ones(pos.size), np.zeros(neg.size)])
    order = np.argsort(-scores, kind="stable")
    scores, labels = scores[order], labels[order]
    tp = np.cumsum(labels)
    fp = np.cumsum(1.0 - labels)
    # keep the last index of every run of tied scores
    last = np.r_[np.nonzero(np.diff(scores))[0], scores.size - 1]
    tp, fp = tp[last], fp[last]
    precision = tp / (tp + fp)
    recall = tp / pos.size
    return float(np.sum(np.diff(np.r_[0.0, recall]) * precision))


@dataclass
class MetricsReport:
    fpr95: float
    auroc: float
    aupr: float
    gamma: float
    n_id: int
    n_ood: int

    def to_text(self):
        return "".join(f"{k} = {v!r}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text):
        vals = {}
        for line in text.splitlines():
            if line.strip():
                k, v = (s.strip() for s in line.split("=", 1))
                vals[k] = v
        return cls(fpr95=float(vals["fpr95"]), auroc=float(vals["auroc"]),
                   aupr=float(vals["aupr"]), gamma=float(vals["gamma"]),
                   n_id=int(vals["n_id"]), n_ood=int(vals["n_ood"]))


def evaluate(id_scores, ood_scores, tpr=0.95):
    id_scores = _nonempty("id_scores", id_scores)
    ood_scores = _nonempty("ood_scores", ood_scores)
    return MetricsReport(
        fpr95=fpr_at_tpr(id_scores, ood_scores, tpr),
        auroc=auroc(id_scores, ood_scores),
        aupr=aupr(id_scores, ood_scores),
        gamma=choose_gamma(id_scores, tpr),
        n_id=int(id_scores.size),
        n_ood=int(ood_scores.size),
    )


SCORE_HEADER = ["score", "is_id"]


def write_scores(path, scores, is_id):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    flags = np.broadcast_to(np.asarray(is_id, dtype=bool), scores.shape)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(SCORE_HEADER) + "\n")
        for s, f in zip(scores, flags):
            fh.write(f"{float(s)!r},{int(f)}\n")


def read_scores(path):
    """Read a score dump; returns ``(scores, is_id)`` arrays."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != SCORE_HEADER:
        raise ValueError(f"{path}: expected header 'score,is_id'")
    scores, flags = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            s, f = row
            s = float(s)
            f = int(f)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed row {row!r}") from None
        if f not in (0, 1) or not np.isfinite(s):
            raise ValueError(f"{path}:{lineno}: malformed row {row!r}")
        scores.append(s)
        flags.append(bool(f))
    return np.array(scores), np.array(flags, dtype=bool)
