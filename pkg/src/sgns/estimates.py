"""Moment-exponent bookkeeping, ensemble aggregation of the a priori energy
functionals, uniformity-in-n verdicts, and the discrete Gronwall envelope.

The admissible exponent window p in [2, 2 + eta/(2-eta)) and the epsilon
interval in the Ito estimate reduce to the same inequality
p - p*eps - p(p-1)(2-eta)/2 > 0; both are exposed and tested for consistency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import kendalltau


def p_range(eta: float) -> tuple:
    """Admissible moment exponents: [2, 2 + eta/(2-eta)), or [2, inf) at eta = 2."""
    if not 0.0 < eta <= 2.0:
        raise ValueError(f"eta must lie in (0, 2], got {eta}")
    if eta == 2.0:
        return (2.0, math.inf)
    return (2.0, 2.0 + eta / (2.0 - eta))


def epsilon_for_p(p: float, eta: float) -> tuple:
    """Open interval of admissible epsilon in the p-th moment estimate."""
    lo, hi = p_range(eta)
    if not lo <= p < hi:
        raise ValueError(f"p = {p} outside the admissible range [{lo}, {hi})")
    upper = 1.0 - 0.5 * (p - 1.0) * (2.0 - eta)
    return (0.0, upper)


@dataclass
class FunctionalStats:
    mean: float
    se: float

    @staticmethod
    def of(values) -> "FunctionalStats":
        values = np.asarray(values, dtype=float)
        if len(values) == 0:
            return FunctionalStats(float("nan"), float("nan"))
        se = float(np.std(values, ddof=1) / math.sqrt(len(values))) if len(values) > 1 else 0.0
        return FunctionalStats(mean=float(np.mean(values)), se=se)


@dataclass
class EnsembleStats:
    """Aggregated moment functionals per Galerkin level n."""

    per_n: dict  # n -> {"sup_H_p": {p: FunctionalStats}, "int_weighted": {...},
    #                    "int_dirichlet2": FunctionalStats, "count": int, "aborts": int}
    p_list: tuple
    warnings: tuple = ()


def aggregate(records_by_n: dict, p_list=(2.0,), eta: float | None = None) -> EnsembleStats:
    """Unbiased ensemble means with standard errors of the energy functionals.

    Aborted trajectories are excluded from the statistics and counted.  If a
    certified eta is supplied, requested exponents outside its admissible
    window are flagged (the statistic is still computed).
    """
    warnings = []
    if eta is not None:
        lo, hi = p_range(eta)
        for p in p_list:
            if not lo <= p < hi:
                warnings.append(f"p = {p} outside the admissible range [{lo}, {hi}) for eta = {eta}")
    per_n = {}
    for n, records in records_by_n.items():
        ok = [r for r in records if not r.aborted]
        if len(ok) < 2:
            raise ValueError(f"need at least 2 usable trajectories at n = {n}")
        per_n[n] = {
            "sup_H_p": {
                p: FunctionalStats.of([r.sup_H() ** p for r in ok]) for p in p_list
            },
            "int_weighted": {
                p: FunctionalStats.of([r.integral_weighted(p) for r in ok]) for p in p_list
            },
            "int_dirichlet2": FunctionalStats.of([r.integral_dirichlet2() for r in ok]),
            "count": len(ok),
            "aborts": len(records) - len(ok),
        }
    return EnsembleStats(per_n=per_n, p_list=tuple(p_list), warnings=tuple(warnings))


@dataclass
class UniformityVerdict:
    ratios: dict  # functional name -> max/min ratio across n
    kendall: dict  # functional name -> (tau, one-sided p-value for a rising trend)
    ratio_bound: float
    alpha: float
    passed: bool


def uniformity_report(
    stats: EnsembleStats,
    p: float = 2.0,
    ratio_bound: float = 1.5,
    alpha: float = 0.05,
) -> UniformityVerdict:
    """Uniformity-in-n check: bounded max/min ratio and no rising trend beyond
    noise for E[sup |u|_H^p] and E[int ||u||^2 dt].

    The trend test is one-sided Kendall tau on the per-level means at level
    alpha; a monotone ordering whose total rise stays within the combined
    standard errors (1.645 sigma one-sided) counts as flat.
    """
    ns = sorted(stats.per_n)
    if len(ns) < 3:
        raise ValueError("need at least 3 Galerkin levels")
    series = {
        f"sup_H_{p:g}": [
            (stats.per_n[n]["sup_H_p"][p].mean, stats.per_n[n]["sup_H_p"][p].se) for n in ns
        ],
        "int_dirichlet2": [
            (stats.per_n[n]["int_dirichlet2"].mean, stats.per_n[n]["int_dirichlet2"].se)
            for n in ns
        ],
    }
    ratios = {}
    kendall = {}
    passed = True
    for name, pairs in series.items():
        vals = np.asarray([m for m, _ in pairs])
        ses = np.asarray([s for _, s in pairs])
        if np.any(vals <= 0):
            raise ValueError(f"nonpositive functional {name}; cannot form ratios")
        ratios[name] = float(np.max(vals) / np.min(vals))
        tau, pval = kendalltau(ns, vals, alternative="greater")
        kendall[name] = (float(tau), float(pval))
        rise = vals[-1] - vals[0]
        noise = 1.645 * math.sqrt(ses[0] ** 2 + ses[-1] ** 2)
        trending_up = pval < alpha and rise > noise
        if ratios[name] > ratio_bound or trending_up:
            passed = False
    return UniformityVerdict(
        ratios=ratios, kendall=kendall, ratio_bound=ratio_bound, alpha=alpha, passed=passed
    )


def gronwall_eval(a, theta, y0: float, grid) -> np.ndarray:
    """Discrete Gronwall envelope for y' <= a(t) + theta(t) y on the grid:

        y(t_j) <= y0 exp(int_0^tj theta) + sum_{l<j} a_l dl exp(int_{tl}^{tj} theta)

    with left-endpoint quadrature of the exponents; dominates the forward
    Euler solution of y' = a + theta y.
    """
    grid = np.asarray(grid, dtype=float)
    a = np.asarray(a, dtype=float)
    theta = np.asarray(theta, dtype=float)
    m = len(grid)
    if len(a) < m - 1 or len(theta) < m - 1:
        raise ValueError("a and theta must be given on every step of the grid")
    if np.any(a[: m - 1] < 0) or np.any(theta[: m - 1] < 0):
        raise ValueError("gronwall_eval requires nonnegative inputs")
    dt = np.diff(grid)
    Theta = np.concatenate([[0.0], np.cumsum(theta[: m - 1] * dt)])
    out = np.zeros(m)
    out[0] = y0
    for j in range(1, m):
        acc = y0 * math.exp(Theta[j])
        acc += float(np.sum(a[:j] * dt[:j] * np.exp(Theta[j] - Theta[:j])))
        out[j] = acc
    return out
