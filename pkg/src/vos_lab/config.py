"""Flat ``key = value`` configuration files with dotted section keys.

Every key has a default; unknown keys are rejected. Overrides may name a key
by its full dotted form (``train.beta``) or by an unambiguous last component
(``beta``).
"""

from . import datagen, losses, trainer


class ConfigError(ValueError):
    pass


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ints(text):
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    return tuple(int(v) for v in str(text).replace(" ", "").split(",") if v)


def _opt_int(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return int(text)


def _choice(*options):
    def parse(text):
        t = str(text).strip()
        if t not in options:
            raise ValueError(f"expected one of {options}, got {t!r}")
        return t
    return parse


# key: (default, parser)
SCHEMA = {
    "data.num_classes": (3, int),
    "data.radius": (4.0, float),
    "data.cov_scale": (0.5, float),
    "data.n_per_class": (500, int),
    "data.n_test_per_class": (500, int),
    "data.ood_kind": ("annulus", _choice("annulus", "box")),
    "data.r_min": (8.0, float),
    "data.r_max": (12.0, float),
    "data.box": (12.0, float),
    "data.n_ood": (1500, int),
    "data.seed": (0, int),
    "model.layer_sizes": ((2, 64, 64, 8), _ints),
    "model.phi_hidden": (512, int),
    "model.cls_bias": (False, _bool),
    "train.total_iters": (3000, int),
    "train.start_iter": (None, _opt_int),
    "train.start_fraction": (2.0 / 3.0, float),
    "train.beta": (0.1, float),
    "train.learning_rate": (0.01, float),
    "train.momentum": (0.9, float),
    "train.weight_decay": (0.0, float),
    "train.grad_clip": (10.0, float),
    "train.batch_size": (64, int),
    "train.queue_capacity": (300, int),
    "train.ridge": (1e-4, float),
    "train.seed": (0, int),
    "train.log_every": (50, int),
    "synthesis.t": (1, int),
    "synthesis.pool_size": (10_000, int),
    "synthesis.source": ("vos", _choice("vos", "noise")),
    "synthesis.noise_scale": (1.0, float),
    "loss.mode": (losses.VOS, _choice(*losses.MODES)),
    "loss.m_in": (losses.DEFAULT_M_IN, float),
    "loss.m_out": (losses.DEFAULT_M_OUT, float),
    "eval.tpr": (0.95, float),
    "plot.x_min": (-12.0, float),
    "plot.x_max": (12.0, float),
    "plot.y_min": (-12.0, float),
    "plot.y_max": (12.0, float),
    "plot.resolution": (121, int),
}


def defaults():
    return {k: v for k, (v, _) in SCHEMA.items()}


def resolve_key(key):
    key = key.strip()
    if key in SCHEMA:
        return key
    matches = [k for k in SCHEMA if k.rsplit(".", 1)[-1] == key]
    if len(matches) == 1:
        return matches[0]
    if matches:
        raise ConfigError(f"ambiguous config key {key!r}: {matches}")
    raise ConfigError(f"unknown config key {key!r}")


def set_value(cfg, key, text):
    full = resolve_key(key)
    try:
        cfg[full] = SCHEMA[full][1](text)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {full}: {exc}") from None
    return cfg


def parse_text(text, base=None):
    cfg = defaults() if base is None else dict(base)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        try:
            set_value(cfg, key, value.strip())
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return cfg


def load(path=None, overrides=()):
    cfg = defaults()
    if path is not None:
        with open(path) as fh:
            cfg = parse_text(fh.read(), cfg)
    for key, value in overrides:
        set_value(cfg, key, value)
    return cfg


def _fmt(value):
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump(cfg):
    """Effective configuration as text that :func:`parse_text` reads back exactly."""
    return "".join(f"{k} = {_fmt(cfg[k])}\n" for k in SCHEMA)


def dataset_spec(cfg):
    return datagen.DatasetSpec(
        num_classes=cfg["data.num_classes"], radius=cfg["data.radius"],
        cov_scale=cfg["data.cov_scale"], n_per_class=cfg["data.n_per_class"],
        n_test_per_class=cfg["data.n_test_per_class"], ood_kind=cfg["data.ood_kind"],
        r_min=cfg["data.r_min"], r_max=cfg["data.r_max"], box=cfg["data.box"],
        n_ood=cfg["data.n_ood"], seed=cfg["data.seed"],
    )


def run_config(cfg):
    return trainer.RunConfig(
        total_iters=cfg["train.total_iters"], start_iter=cfg["train.start_iter"],
        start_fraction=cfg["train.start_fraction"], beta=cfg["train.beta"],
        t=cfg["synthesis.t"], pool_size=cfg["synthesis.pool_size"],
        queue_capacity=cfg["train.queue_capacity"], ridge=cfg["train.ridge"],
        learning_rate=cfg["train.learning_rate"], momentum=cfg["train.momentum"],
        weight_decay=cfg["train.weight_decay"], grad_clip=cfg["train.grad_clip"],
        batch_size=cfg["train.batch_size"],
        loss_mode=cfg["loss.mode"], m_in=cfg["loss.m_in"], m_out=cfg["loss.m_out"],
        outlier_source=cfg["synthesis.source"], noise_scale=cfg["synthesis.noise_scale"],
        seed=cfg["train.seed"], layer_sizes=cfg["model.layer_sizes"],
        num_classes=cfg["data.num_classes"], phi_hidden=cfg["model.phi_hidden"],
        cls_bias=cfg["model.cls_bias"], log_every=cfg["train.log_every"],
    )


def validate(cfg):
    """Build the typed configs once so bad combinations fail as config errors."""
    try:
        run_config(cfg)
        dataset_spec(cfg)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg["model.layer_sizes"][0] != 2:
        raise ConfigError("model.layer_sizes must start with the input dimension 2")
    if cfg["plot.resolution"] < 2:
        raise ConfigError("plot.resolution must be >= 2")
