"""One-at-a-time sensitivity sweeps for the synthesis hyperparameters.

Starting from the default configuration, vary one knob at a time:

    beta            weight of the uncertainty term
    t               which order statistic of the pool sets epsilon
    queue_capacity  features kept per class for the Gaussian fit
    start_fraction  fraction of training before the regularizer switches on

and report the median FPR95 / AUROC of the learned score.

    python demos/sensitivity.py --seeds 3 --only beta t
"""

import argparse

from _common import fit_and_score, median_row

SWEEPS = {
    "beta": [0.01, 0.05, 0.1, 0.5],
    "t": [1, 2, 5, 10, 50],
    "queue_capacity": [50, 100, 300, 1000],
    "start_fraction": [0.25, 0.5, 2.0 / 3.0, 0.9],
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=1)
    ap.add_argument("--only", nargs="*", choices=sorted(SWEEPS), default=sorted(SWEEPS))
    args = ap.parse_args()
    for knob in args.only:
        print(f"\n{knob}")
        for value in SWEEPS[knob]:
            rows = [fit_and_score(s, **{knob: value}) for s in range(args.seeds)]
            fpr, auc = median_row(rows, "vos")
            print(f"  {value:<8.4g} FPR95={fpr:6.3f}  AUROC={auc:6.4f}", flush=True)


if __name__ == "__main__":
    main()
