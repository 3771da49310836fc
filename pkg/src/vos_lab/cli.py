"""``vos-lab`` command line: generate-data, train, score, eval, plot-uncertainty.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
numerical error.
"""

import argparse
import logging
import os
import sys

from . import config as cfgmod
from . import datagen, evalkit, heatmap, network, trainer

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="vos-lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="key = value configuration file")
        sp.add_argument("--dump-config", help="write the effective configuration here")
        return sp

    g = common(sub.add_parser("generate-data", help="write train/test/ood CSV files"))
    g.add_argument("--out", required=True, help="existing output directory")

    t = common(sub.add_parser("train", help="train a model"))
    t.add_argument("--data", required=True,
                   help="directory holding train.csv, or a dataset file")
    t.add_argument("--out", required=True, help="checkpoint path")
    t.add_argument("--log", help="metrics log path (default: <out>.log)")

    s = common(sub.add_parser("score", help="score every row of a dataset"))
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--method", choices=sorted(evalkit.SCORERS), default="vos")
    s.add_argument("--out", required=True)
    s.add_argument("--is-id", choices=("0", "1"),
                   help="ground-truth flag for every row (default: 1 iff the file is labeled)")

    e = common(sub.add_parser("eval", help="FPR95 / AUROC / AUPR from two score dumps"))
    e.add_argument("--id-scores", required=True)
    e.add_argument("--ood-scores", required=True)
    e.add_argument("--out", help="also write the report here")

    h = common(sub.add_parser("plot-uncertainty", help="PGM heatmap of the ID probability"))
    h.add_argument("--checkpoint", required=True)
    h.add_argument("--out", required=True, help="PGM path; raw values go to <out>.txt")
    return p


def parse_overrides(extra):
    """``--key value`` / ``--key=value`` pairs left over after argparse."""
    pairs = []
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise UsageError(f"missing value for --{key}")
            value = extra[i + 1]
            i += 2
        pairs.append((key.replace("-", "_"), value))
    return pairs


def cmd_generate_data(cfg, args):
    if not os.path.isdir(args.out):
        raise FileNotFoundError(f"output directory {args.out!r} does not exist")
    spec = cfgmod.dataset_spec(cfg)
    (Xtr, ytr), (Xte, yte), Xood = datagen.make_splits(spec)
    datagen.write_dataset(os.path.join(args.out, "train.csv"), Xtr, ytr)
    datagen.write_dataset(os.path.join(args.out, "test.csv"), Xte, yte)
    datagen.write_dataset(os.path.join(args.out, "ood.csv"), Xood)
    print(f"wrote {len(ytr)} train, {len(yte)} test, {len(Xood)} ood rows to {args.out}")


def _train_file(path):
    return os.path.join(path, "train.csv") if os.path.isdir(path) else path


def cmd_train(cfg, args):
    X, y = datagen.read_dataset(_train_file(args.data))
    if y is None:
        raise ValueError("training data must be labeled")
    result = trainer.train(cfgmod.run_config(cfg), X, y)
    network.save_checkpoint(result.net, args.out)
    log_path = args.log or args.out + ".log"
    with open(log_path, "w") as fh:
        fh.write("\n".join(result.log_lines) + "\n")
    last = result.history[-1]
    print(f"trained {len(result.history)} iterations; final total loss {last.total:.6g}")


def cmd_score(cfg, args):
    net = network.load_checkpoint(args.checkpoint)
    X, y = datagen.read_dataset(args.data)
    scores = evalkit.SCORERS[args.method](net, X)
    is_id = (y is not None) if args.is_id is None else args.is_id == "1"
    evalkit.write_scores(args.out, scores, is_id)
    print(f"wrote {len(scores)} {args.method} scores to {args.out}")


def cmd_eval(cfg, args):
    id_scores, _ = evalkit.read_scores(args.id_scores)
    ood_scores, _ = evalkit.read_scores(args.ood_scores)
    report = evalkit.evaluate(id_scores, ood_scores, cfg["eval.tpr"])
    text = report.to_text()
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)


def cmd_plot_uncertainty(cfg, args):
    net = network.load_checkpoint(args.checkpoint)
    grid = heatmap.GridSpec(cfg["plot.x_min"], cfg["plot.x_max"], cfg["plot.y_min"],
                            cfg["plot.y_max"], cfg["plot.resolution"])
    heatmap.write_heatmap(net, grid, args.out, args.out + ".txt")
    print(f"wrote {grid.resolution}x{grid.resolution} heatmap to {args.out}")


COMMANDS = {
    "generate-data": cmd_generate_data,
    "train": cmd_train,
    "score": cmd_score,
    "eval": cmd_eval,
    "plot-uncertainty": cmd_plot_uncertainty,
}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args, extra = build_parser().parse_known_args(argv)
        cfg = cfgmod.load(args.config, parse_overrides(extra))
        cfgmod.validate(cfg)
        if args.dump_config:
            with open(args.dump_config, "w") as fh:
                fh.write(cfgmod.dump(cfg))
    except (UsageError, cfgmod.ConfigError, OSError) as exc:
        print(f"vos-lab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        COMMANDS[args.command](cfg, args)
    except (ValueError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"vos-lab: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
