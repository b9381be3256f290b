"""Exponential decay fits on trajectory columns."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ValidationError

MIN_SAMPLES = 10


@dataclass
class DecayFit:
    """Least-squares line through ``log y`` against ``t``; ``rate = -slope``.

    ``degenerate`` marks a column with no variation (the fit explains
    nothing, so ``r_squared`` is reported as 0).
    """

    rate: float
    intercept: float
    r_squared: float
    window: tuple
    samples: int
    degenerate: bool = False

    def as_dict(self):
        return {"rate": self.rate, "intercept": self.intercept, "r_squared": self.r_squared,
                "window": list(self.window), "samples": self.samples, "degenerate": self.degenerate}


def fit_decay(t, y, window=None) -> DecayFit:
    """Fit ``y ~ exp(intercept - rate t)`` on ``window = (t_a, t_b)``.

    Raises
    ------
    ValidationError
        Fewer than 10 samples in the window, a window outside the data, or
        non-positive values.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValidationError("t and y must be 1-d arrays of equal length", key="fit.column")
    if window is None:
        window = (float(t.min()), float(t.max()))
    ta, tb = map(float, window)
    if ta < t.min() - 1e-12 or tb > t.max() + 1e-12 or not ta < tb:
        raise ValidationError(f"window {window} lies outside the trajectory span [{t.min()}, {t.max()}]",
                              key="fit.window")
    sel = (t >= ta - 1e-12) & (t <= tb + 1e-12)
    if sel.sum() < MIN_SAMPLES:
        raise ValidationError(f"only {int(sel.sum())} samples in window, need {MIN_SAMPLES}", key="fit.window")
    if np.any(y[sel] <= 0) or not np.all(np.isfinite(y[sel])):
        raise ValidationError("norm values must be positive and finite", key="fit.column")
    ts, ly = t[sel], np.log(y[sel])
    slope, intercept = np.polyfit(ts, ly, 1)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    ss_res = float(np.sum((ly - (slope * ts + intercept)) ** 2))
    scale = max(1.0, float(np.abs(ly).max())) ** 2 * len(ly)
    degenerate = ss_tot <= 1e-28 * scale
    if degenerate:
        slope, r2 = 0.0, 0.0
    else:
        r2 = float(min(1.0, max(0.0, 1.0 - ss_res / ss_tot)))
    return DecayFit(float(-slope), float(intercept), r2, (ta, tb), int(sel.sum()), bool(degenerate))


def read_trajectory_csv(path):
    """Columns of a trajectory CSV as float arrays."""
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    return {k: np.array([float(r[i]) for r in body]) for i, k in enumerate(head)}


def fit_trajectory(traj_or_path, column="norm_Lp", window=None) -> DecayFit:
    """Fit a column of a :class:`~landaulab.dynamics.Trajectory` or of its CSV file."""
    if isinstance(traj_or_path, (str, Path)):
        cols = read_trajectory_csv(traj_or_path)
    else:
        cols = {k: np.asarray(v, dtype=float) for k, v in traj_or_path.columns().items()}
    if column not in cols:
        raise ValidationError(f"no column {column!r}; have {sorted(cols)}", key="fit.column")
    return fit_decay(cols["t"], cols[column], window)
