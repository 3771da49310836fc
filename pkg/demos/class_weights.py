"""What the learnable energy weights pick up on an imbalanced toy.

The per-class weights w_k = softplus(w_raw_k) enter the energy as
-log sum_k w_k exp(f_k). Here class 0 keeps all 500 training points while
classes 1 and 2 are thinned, and we print the learned weights next to the
class frequencies. This is exploratory: nothing is asserted, and on a toy
this small the relationship can go either way from seed to seed.

    python demos/class_weights.py --keep 500 150 50
"""

import argparse

import numpy as np

from vos_lab import datagen, trainer


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--keep", type=int, nargs=3, default=[500, 150, 50])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    (X, y), _, _ = datagen.make_splits(datagen.DatasetSpec(seed=args.seed))
    idx = np.concatenate([np.flatnonzero(y == k)[:n] for k, n in enumerate(args.keep)])
    res = trainer.train(trainer.RunConfig(seed=args.seed), X[idx], y[idx])
    w = res.net.energy_weights
    for k, n in enumerate(args.keep):
        print(f"class {k}: {n:4d} training points   w = {w[k]:.4f}")
    print(f"(initial weights are all 1; final uncertainty loss "
          f"{res.history[-1].uncertainty:.4f})")


if __name__ == "__main__":
    main()
