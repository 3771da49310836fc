"""Compare the regularizer against its ablations on the toy.

Variants (all with the same backbone, data and seeds):

    vos         learnable-weight energy fed through the phi head (default)
    hinge       squared hinge on raw energies, margins m_in / m_out
    constant_w  energy weights frozen at 1
    kplus1      virtual outliers as an extra (K+1)-th class
    noise       phi head, but the outliers are plain Gaussian noise

Each variant is scored with its own uncertainty score; for reference the
vanilla model's MSP is printed too.

    python demos/ablations.py --seeds 3
"""

import argparse

from _common import fit_and_score, median_row

VARIANTS = {
    "vanilla (msp)": dict(beta=0.0),
    "vos": {},
    "hinge": dict(loss_mode="hinge"),
    "constant_w": dict(loss_mode="constant_w"),
    "kplus1": dict(loss_mode="kplus1"),
    "noise": dict(outlier_source="noise"),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=1)
    args = ap.parse_args()
    print(f"{'variant':15s} FPR95   AUROC   acc     (median of {args.seeds} seed(s))")
    for name, kw in VARIANTS.items():
        rows = [fit_and_score(s, **kw) for s in range(args.seeds)]
        key = "msp" if name.startswith("vanilla") else "vos"
        fpr, auc = median_row(rows, key)
        acc = sorted(r["acc"] for r in rows)[len(rows) // 2]
        print(f"{name:15s} {fpr:6.3f}  {auc:6.4f}  {acc:6.4f}", flush=True)


if __name__ == "__main__":
    main()
