"""Helpers shared by the demo scripts (not part of the installed package)."""

import time

import numpy as np

from vos_lab import datagen, evalkit, trainer


def toy(seed):
    return datagen.make_splits(datagen.DatasetSpec(seed=seed))


def fit_and_score(seed, **overrides):
    """Train on the toy for one seed and return a dict of headline numbers."""
    (X, y), (Xte, yte), Xood = toy(seed)
    t0 = time.perf_counter()
    net = trainer.train(trainer.RunConfig(seed=seed, **overrides), X, y).net
    out = {"seconds": time.perf_counter() - t0, "net": net}
    for name, scorer in evalkit.SCORERS.items():
        s_id, s_ood = scorer(net, Xte), scorer(net, Xood)
        out[name] = (evalkit.fpr_at_tpr(s_id, s_ood), evalkit.auroc(s_id, s_ood))
    F = net.logits(net.features(Xte))[:, :3]
    out["acc"] = float(np.mean(np.argmax(F, axis=1) == yte))
    return out


def median_row(rows, key):
    fpr = np.median([r[key][0] for r in rows])
    auc = np.median([r[key][1] for r in rows])
    return fpr, auc
