"""Evaluate a score on a 2-D grid and write it as a plain-text PGM (P2).

Row 0 of the image is the top edge (``y_max``), column 0 the left edge
(``x_min``). Grey level ``round(255 * score)`` maps score 0 to black.
"""

from dataclasses import dataclass

import numpy as np

from . import evalkit


@dataclass(frozen=True)
class GridSpec:
    x_min: float = -12.0
    x_max: float = 12.0
    y_min: float = -12.0
    y_max: float = 12.0
    resolution: int = 121

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("grid resolution must be >= 2")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("grid ranges must be increasing")

    def points(self):
        xs = np.linspace(self.x_min, self.x_max, self.resolution)
        ys = np.linspace(self.y_max, self.y_min, self.resolution)
        gx, gy = np.meshgrid(xs, ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


def score_grid(net, grid, scorer=evalkit.ood_score):
    """``(resolution, resolution)`` array of scores, row-major from the top."""
    vals = scorer(net, grid.points())
    return vals.reshape(grid.resolution, grid.resolution)


def to_gray(values):
    return np.floor(np.clip(values, 0.0, 1.0) * 255.0 + 0.5).astype(np.int64)


def pgm_text(values):
    g = to_gray(values)
    rows = "\n".join(" ".join(str(v) for v in row) for row in g)
    return f"P2\n{g.shape[1]} {g.shape[0]}\n255\n{rows}\n"


def grid_text(values):
    return "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in values)


def write_heatmap(net, grid, out_path, values_path=None):
    values = score_grid(net, grid)
    with open(out_path, "w") as fh:
        fh.write(pgm_text(values))
    if values_path is not None:
        with open(values_path, "w") as fh:
            fh.write(grid_text(values))
    return values


def read_pgm(path):
    """Parse a P2 file back into an integer array."""
    with open(path) as fh:
        tokens = [t for line in fh for t in line.split("#", 1)[0].split()]
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain PGM file")
    w, h, _maxval = (int(t) for t in tokens[1:4])
    data = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    if data.size != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {data.size}")
    return data.reshape(h, w)
