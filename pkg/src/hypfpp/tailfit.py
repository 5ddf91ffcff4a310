"""Empirical survival functions and exponential tail-rate fitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientPointsError

MIN_FIT_POINTS = 3


@dataclass
class TailEstimate:
    """Survival curve of a nonnegative statistic plus a fitted exponential rate.

    The rate is the least-squares slope of -log S(x) against x over points
    with positive survival; the confidence interval comes from a nonparametric
    bootstrap over replications.  `insufficient` flags curves with fewer than
    three positive-survival support points, for which no rate is fitted.
    """

    support: np.ndarray
    survival: np.ndarray
    rate: float | None
    ci_low: float | None
    ci_high: float | None
    r_squared: float | None
    n_values: int
    n_bootstrap: int
    insufficient: bool

    def to_dict(self) -> dict:
        return {
            "support": [float(x) for x in self.support],
            "survival": [float(s) for s in self.survival],
            "rate": self.rate,
            "ci95": [self.ci_low, self.ci_high],
            "r_squared": self.r_squared,
            "n_values": self.n_values,
            "n_bootstrap": self.n_bootstrap,
            "insufficient": self.insufficient,
        }


def survival_curve(values) -> tuple[np.ndarray, np.ndarray]:
    """Support points (sorted distinct values) and S(x) = P(X >= x)."""
    values = np.asarray(values, dtype=float)
    support = np.unique(values)
    survival = np.array([(values >= x).mean() for x in support])
    return support, survival


def _ls_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope and R^2 of y against x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = (xc**2).sum()
    if denom == 0:
        return 0.0, 1.0
    slope = float((xc * yc).sum() / denom)
    resid = yc - slope * xc
    total = (yc**2).sum()
    r2 = 1.0 if total == 0 else float(1.0 - (resid**2).sum() / total)
    return slope, r2


def fit_exponential_rate(points, n_bootstrap: int = 1000, seed: int = 0):
    """Rate, 95% CI, and R^2 from (x, survival) pairs.

    The rate is the slope of -log(survival) vs x; the CI bootstraps the point
    set.  Raises InsufficientPointsError below three positive-survival points.
    """
    pts = [(float(x), float(s)) for x, s in points if s > 0]
    if len(pts) < MIN_FIT_POINTS:
        raise InsufficientPointsError(
            f"need >= {MIN_FIT_POINTS} positive-survival points, got {len(pts)}"
        )
    x = np.array([p[0] for p in pts])
    y = -np.log(np.array([p[1] for p in pts]))
    rate, r2 = _ls_slope(x, y)
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_bootstrap):
        idx = rng.integers(0, len(pts), len(pts))
        if len(np.unique(x[idx])) < 2:
            continue
        boots.append(_ls_slope(x[idx], y[idx])[0])
    if boots:
        ci_low, ci_high = np.percentile(boots, [2.5, 97.5])
    else:
        ci_low = ci_high = rate
    return rate, (float(ci_low), float(ci_high)), r2


def tail_estimate(values, n_bootstrap: int = 1000, seed: int = 0) -> TailEstimate:
    """TailEstimate of per-replication statistic values, with the CI obtained
    by resampling replications and refitting the whole curve."""
    values = np.asarray(values, dtype=float)
    support, survival = survival_curve(values)
    positive = survival > 0
    if positive.sum() < MIN_FIT_POINTS:
        return TailEstimate(
            support=support,
            survival=survival,
            rate=None,
            ci_low=None,
            ci_high=None,
            r_squared=None,
            n_values=len(values),
            n_bootstrap=0,
            insufficient=True,
        )
    rate, r2 = _ls_slope(support[positive], -np.log(survival[positive]))
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_bootstrap):
        sample = values[rng.integers(0, len(values), len(values))]
        s_sup, s_surv = survival_curve(sample)
        pos = s_surv > 0
        if pos.sum() < 2:
            continue
        boots.append(_ls_slope(s_sup[pos], -np.log(s_surv[pos]))[0])
    if boots:
        ci_low, ci_high = (float(v) for v in np.percentile(boots, [2.5, 97.5]))
    else:
        ci_low = ci_high = rate
    return TailEstimate(
        support=support,
        survival=survival,
        rate=float(rate),
        ci_low=ci_low,
        ci_high=ci_high,
        r_squared=float(r2),
        n_values=len(values),
        n_bootstrap=n_bootstrap,
        insufficient=False,
    )


def fit_decay_slope(x, rows, n_bootstrap: int = 1000, seed: int = 0) -> dict:
    """Slope of log(mean of rows) against x, bootstrapping over replications.

    rows is a (replications, len(x)) matrix of nonnegative per-replication
    statistics; positions whose mean vanishes are dropped from the fit.
    """
    x = np.asarray(x, dtype=float)
    rows = np.asarray(rows, dtype=float)
    means = rows.mean(axis=0)
    keep = means > 0
    out = {
        "x": [float(v) for v in x],
        "means": [float(v) for v in means],
        "slope": None,
        "ci95": [None, None],
        "r_squared": None,
        "n_points": int(keep.sum()),
        "insufficient": bool(keep.sum() < MIN_FIT_POINTS),
    }
    if out["insufficient"]:
        return out
    slope, r2 = _ls_slope(x[keep], np.log(means[keep]))
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_bootstrap):
        sample = rows[rng.integers(0, len(rows), len(rows))]
        m = sample.mean(axis=0)
        k = m > 0
        if k.sum() < 2:
            continue
        boots.append(_ls_slope(x[k], np.log(m[k]))[0])
    if boots:
        lo, hi = np.percentile(boots, [2.5, 97.5])
        out["ci95"] = [float(lo), float(hi)]
    else:
        out["ci95"] = [float(slope), float(slope)]
    out["slope"] = float(slope)
    out["r_squared"] = float(r2)
    return out
