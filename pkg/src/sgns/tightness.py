"""Empirical compactness and tightness diagnostics for trajectory families.

A family of Galerkin paths is probed exactly the way the compactness
machinery consumes it: bounded energy (sup of the V-integral and of the
running H-sup), a uniform U'-modulus of continuity that decays as the window
shrinks, an Aldous-type exceedance table over stopped increments, and the
per-term scaling of the drift and noise pieces of the path decomposition
(initial state, Stokes integral, convection integral, forcing integral,
stochastic integral).  The nested-space construction that supplies the
compact embedding U -> V_s is built and certified separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .galerkin import TrajectoryRecord
from .spectral import Basis


# -- trajectory families -----------------------------------------------------


class FunctionFamily:
    """Snapshot trajectories of one ensemble in U'-coordinates."""

    def __init__(self, records, basis: Basis, n: int | None = None):
        if not records:
            raise ValueError("empty family")
        recs = [r for r in records if not r.aborted]
        if not recs:
            raise ValueError("all trajectories aborted")
        n = recs[0].n if n is None else n
        snap = recs[0].snap_idx
        for r in recs:
            if r.n != n or not np.array_equal(r.snap_idx, snap):
                raise ValueError("family members must share the Galerkin level and grid")
        self.records = recs
        self.n = n
        self.dt = recs[0].dt
        self.times = recs[0].snap_times
        self.coords = np.stack([r.snap_u for r in recs])  # (R, S, n)
        self.wUdual = basis.mode_weights("Udual", n)

    @property
    def size(self) -> int:
        return len(self.records)

    def sup_V_integral(self) -> float:
        return max(
            float(np.sum((r.norm_H[:-1] ** 2 + r.norm_D[:-1] ** 2)) * r.dt) for r in self.records
        )

    def sup_sup_H(self) -> float:
        return max(r.sup_H() for r in self.records)

    def lag_maxima(self, max_lag: int) -> np.ndarray:
        """m[r, l-1] = max_j |u_r(t_{j+l}) - u_r(t_j)|_{U'} for lags 1..max_lag."""
        R, S, _ = self.coords.shape
        out = np.zeros((R, max_lag))
        for lag in range(1, max_lag + 1):
            diff = self.coords[:, lag:, :] - self.coords[:, :-lag, :]
            d2 = np.einsum("rsn,n->rs", diff * diff, self.wUdual)
            out[:, lag - 1] = np.sqrt(np.max(d2, axis=1))
        return out


def median_modulus_curve(family: FunctionFamily, deltas) -> tuple:
    """Per-delta ensemble median of the per-trajectory moduli, with the fitted
    log-log slope (nan when the curve touches zero)."""
    deltas = np.sort(np.asarray(deltas, dtype=float))
    h = family.times[1] - family.times[0]
    max_lag = min(int(math.floor(deltas[-1] / h + 1e-12)), len(family.times) - 1)
    lagmax = family.lag_maxima(max_lag)  # (R, max_lag)
    running = np.maximum.accumulate(lagmax, axis=1)
    curve = np.zeros(len(deltas))
    for i, d in enumerate(deltas):
        lag = min(int(math.floor(d / h + 1e-12)), max_lag)
        curve[i] = float(np.median(running[:, lag - 1])) if lag >= 1 else 0.0
    slope = math.nan
    if np.all(curve > 0):
        slope = float(np.polyfit(np.log(deltas), np.log(curve), 1)[0])
    return curve, slope


def modulus_of_continuity(coords: np.ndarray, wUdual: np.ndarray, times: np.ndarray, delta: float) -> float:
    """sup over |t - s| <= delta of |u(t) - u(s)|_{U'} on the snapshot grid."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    h = times[1] - times[0]
    max_lag = min(int(math.floor(delta / h + 1e-12)), len(times) - 1)
    worst = 0.0
    for lag in range(1, max_lag + 1):
        diff = coords[lag:] - coords[:-lag]
        d2 = np.max(np.einsum("sn,n->s", diff * diff, wUdual))
        worst = max(worst, math.sqrt(float(d2)))
    return worst


# -- Dubinsky-type diagnostic -------------------------------------------------


@dataclass
class DubinskyReport:
    sup_V_integral: float
    sup_sup_H: float
    deltas: np.ndarray
    modulus_curve: np.ndarray  # sup over the family, per delta
    slope: float
    slope_threshold: float
    passed: bool


def dubinsky_diagnostic(
    family: FunctionFamily, deltas, slope_threshold: float = 0.4
) -> DubinskyReport:
    """Bounded energy plus a decaying uniform modulus: the two premises of the
    deterministic compactness criterion, checked on the finite family.

    The modulus curve is fitted in log-log coordinates; the family passes when
    the fitted slope reaches the threshold (a flat curve fails).  An exactly
    zero curve (constant family) passes trivially.
    """
    deltas = np.sort(np.asarray(deltas, dtype=float))
    h = family.times[1] - family.times[0]
    max_lag = min(int(math.floor(deltas[-1] / h + 1e-12)), len(family.times) - 1)
    lagmax = family.lag_maxima(max_lag)
    fam_lag = np.max(lagmax, axis=0)
    running = np.maximum.accumulate(fam_lag)
    curve = np.zeros(len(deltas))
    for i, d in enumerate(deltas):
        lag = min(int(math.floor(d / h + 1e-12)), max_lag)
        curve[i] = running[lag - 1] if lag >= 1 else 0.0
    supV = family.sup_V_integral()
    supH = family.sup_sup_H()
    if np.max(curve) == 0.0:
        return DubinskyReport(supV, supH, deltas, curve, math.inf, slope_threshold, True)
    if np.any(curve <= 0.0):
        passed = False
        slope = 0.0
    else:
        slope = float(np.polyfit(np.log(deltas), np.log(curve), 1)[0])
        passed = slope >= slope_threshold
    return DubinskyReport(supV, supH, deltas, curve, slope, slope_threshold, passed)


# -- Aldous condition ----------------------------------------------------------


@dataclass
class AldousReport:
    thetas: np.ndarray
    probabilities: np.ndarray  # max over stopping rules, per theta
    per_rule: dict  # rule label -> probabilities per theta
    eta: float
    monotone: bool
    decays: bool

    @property
    def passed(self) -> bool:
        return self.monotone and self.decays


def _hitting_positions(family: FunctionFamily, level: float) -> np.ndarray:
    """Snapshot position of the first time |u|_H >= level (end of path if never)."""
    out = np.zeros(family.size, dtype=int)
    stride = int(round((family.times[1] - family.times[0]) / family.dt))
    for r, rec in enumerate(family.records):
        hits = np.nonzero(rec.norm_H >= level)[0]
        if len(hits):
            out[r] = min(int(math.ceil(hits[0] / stride)), len(family.times) - 1)
        else:
            out[r] = len(family.times) - 1
    return out


def aldous_check(family: FunctionFamily, thetas, eta: float) -> AldousReport:
    """Empirical exceedance probabilities of stopped increments.

    Stopping rules: three deterministic grid times plus first-hitting times of
    the ensemble's 50th/90th percentile running-sup levels; tau + theta is
    clipped to the horizon.  Probabilities are reported per theta, maximized
    over rules; the pass flag requires them nonincreasing in theta with an
    overall decay.
    """
    if family.size == 0:
        raise ValueError("empty ensemble")
    thetas = np.sort(np.asarray(thetas, dtype=float))[::-1]  # descending
    S = len(family.times)
    h = family.times[1] - family.times[0]
    T = family.times[-1]
    rules = {}
    for frac in (0.2, 0.45, 0.7):
        pos = int(round(frac * (S - 1)))
        rules[f"grid_t={family.times[pos]:.4g}"] = np.full(family.size, pos, dtype=int)
    sups = np.array([r.sup_H() for r in family.records])
    for q in (50, 90):
        level = float(np.percentile(sups, q))
        rules[f"hit_p{q}"] = _hitting_positions(family, level)

    per_rule = {label: np.zeros(len(thetas)) for label in rules}
    for i, theta in enumerate(thetas):
        lag = int(round(theta / h))
        for label, taus in rules.items():
            ends = np.minimum(taus + lag, S - 1)
            diff = family.coords[np.arange(family.size), ends] - family.coords[
                np.arange(family.size), taus
            ]
            d = np.sqrt(np.einsum("rn,n->r", diff * diff, family.wUdual))
            per_rule[label][i] = float(np.mean(d >= eta))
    probs = np.max(np.stack(list(per_rule.values())), axis=0)
    # thetas descending: probabilities must not increase as theta shrinks
    monotone = bool(np.all(np.diff(probs) <= 1e-12))
    decays = bool(probs[-1] < probs[0] or probs[0] == 0.0)
    return AldousReport(
        thetas=thetas, probabilities=probs, per_rule=per_rule, eta=eta,
        monotone=monotone, decays=decays,
    )


# -- J-term decomposition -------------------------------------------------------


def calibrate_aldous_eta(family: FunctionFamily, theta: float, quantile: float = 60.0) -> float:
    """Threshold for the exceedance table: a quantile of the pooled increments
    |u(t + theta) - u(t)|_{U'} over the family at the largest window, so the
    table starts mid-range and its decay toward 0 is informative."""
    h = family.times[1] - family.times[0]
    lag = max(1, int(round(theta / h)))
    diff = family.coords[:, lag:, :] - family.coords[:, :-lag, :]
    d = np.sqrt(np.einsum("rsn,n->rs", diff * diff, family.wUdual))
    stride = max(1, d.shape[1] // 64)
    return float(np.percentile(d[:, ::stride].ravel(), quantile))


def decomposition_increments(rec: TrajectoryRecord, tau: float, theta: float) -> dict:
    """U'-norms of the increments of the drift/forcing/noise integrals over
    [tau, tau + theta], plus the decomposition-identity residual against the
    increment of the path itself."""
    jt = rec.integral_snap_idx * rec.dt
    pos_a = int(np.argmin(np.abs(jt - tau)))
    pos_b = int(np.argmin(np.abs(jt - (tau + theta))))
    if abs(jt[pos_a] - tau) > rec.dt / 2 or abs(jt[pos_b] - (tau + theta)) > rec.dt / 2:
        raise ValueError("tau and tau+theta must lie on the J-snapshot grid")
    out = {}
    total = None
    for name in ("stokes", "convection", "forcing", "noise"):
        inc = rec.snap_integrals[name][pos_b] - rec.snap_integrals[name][pos_a]
        out[name] = inc
        total = inc if total is None else total + inc
    # the identity needs u at the same steps
    su = {int(s): i for i, s in enumerate(rec.snap_idx)}
    ia, ib = su.get(int(rec.integral_snap_idx[pos_a])), su.get(int(rec.integral_snap_idx[pos_b]))
    residual = math.nan
    if ia is not None and ib is not None:
        du = rec.snap_u[ib] - rec.snap_u[ia]
        residual = float(np.max(np.abs(du - total)))
    return {"increments": out, "identity_residual": residual}


def decomposition_increment_norms(rec: TrajectoryRecord, wUdual: np.ndarray, tau: float, theta: float) -> dict:
    res = decomposition_increments(rec, tau, theta)
    return {
        name: math.sqrt(float(np.sum(wUdual * inc * inc)))
        for name, inc in res["increments"].items()
    }


@dataclass
class IncrementScalingReport:
    thetas: np.ndarray
    median_norms: dict  # term -> medians per theta
    exponents: dict  # term -> fitted log-log slope (nan when the term vanishes)


def increment_scaling(records, basis: Basis, tau, thetas) -> IncrementScalingReport:
    """Fit |J_i(tau+theta) - J_i(tau)|_{U'} ~ theta^gamma per term over a
    theta-halving grid, using medians over the ensemble.

    `tau` may be a single anchor or a list; the increment bounds hold at every
    anchor, so pooling several of them sharpens the median without bias."""
    recs = [r for r in records if not r.aborted]
    wUdual = basis.mode_weights("Udual", recs[0].n)
    taus = np.atleast_1d(np.asarray(tau, dtype=float))
    thetas = np.sort(np.asarray(thetas, dtype=float))
    med = {name: np.zeros(len(thetas)) for name in ("stokes", "convection", "forcing", "noise")}
    for i, theta in enumerate(thetas):
        vals = {name: [] for name in med}
        for rec in recs:
            for t0 in taus:
                norms = decomposition_increment_norms(rec, wUdual, t0, theta)
                for name, v in norms.items():
                    vals[name].append(v)
        for name in med:
            med[name][i] = float(np.median(vals[name]))
    exps = {}
    for name, series in med.items():
        if np.all(series > 0):
            exps[name] = float(np.polyfit(np.log(thetas), np.log(series), 1)[0])
        else:
            exps[name] = math.nan
    return IncrementScalingReport(thetas=thetas, median_norms=med, exponents=exps)


# -- nonlinear-term refinement ----------------------------------------------------


@dataclass
class RefinementReport:
    levels: tuple
    integrals: np.ndarray
    successive_gaps: np.ndarray
    passed: bool  # strictly nonincreasing successive gaps
    cauchy_decay: bool  # last gap at most half the largest gap


def nonlinear_refinement_check(records_by_n: dict) -> RefinementReport:
    """Cauchy behaviour of I_n = int <B(u_n,u_n), P_n psi> dt across Galerkin
    levels driven by the same Wiener path (records must carry the accumulated
    refinement integral, i.e. were run with refinement_probe=psi).

    `passed` demands monotone-decreasing gaps; single-path pre-asymptotic gaps
    can fluctuate even when the tail converges, which `cauchy_decay` captures.
    """
    levels = tuple(sorted(records_by_n))
    if len(levels) < 3:
        raise ValueError("need at least 3 levels")
    vals = []
    for n in levels:
        rec = records_by_n[n]
        if rec.refinement_I is None:
            raise ValueError("records lack the accumulated refinement integral")
        if rec.aborted:
            raise ValueError(f"trajectory at n = {n} aborted")
        vals.append(rec.refinement_I[-1])
    vals = np.asarray(vals)
    gaps = np.abs(np.diff(vals))
    passed = bool(np.all(np.diff(gaps) <= 1e-12 * np.maximum(1.0, gaps[:-1]))) or bool(
        np.all(gaps <= 1e-12)
    )
    cauchy = bool(gaps[-1] <= 0.5 * np.max(gaps) or np.all(gaps <= 1e-12))
    return RefinementReport(
        levels=levels, integrals=vals, successive_gaps=gaps, passed=passed, cauchy_decay=cauchy
    )


# -- nested-space construction ------------------------------------------------------


@dataclass
class NestedSpaceSpec:
    eta0: float
    etas: np.ndarray  # eta_0 .. eta_N
    phi_norms: np.ndarray  # |h_n|_Phi, n = 1..N
    radii: np.ndarray  # r_n, n = 1..N

    def h_norm(self, x: np.ndarray) -> float:
        """Weighted norm |x|_H with 1/r_n^2 weights on basis coordinates."""
        return math.sqrt(float(np.sum((x / self.radii) ** 2)))

    def phi_norm(self, x: np.ndarray) -> float:
        """Phi-norm realized through the triangle-inequality summation."""
        return float(np.sum(np.abs(x) * self.phi_norms))


@dataclass
class NestedSpaceCertificate:
    embedding_norm_bound: float  # 1 - eta0
    max_embedding_norm: float
    embedding_violations: int
    tail_violations: int
    samples: int


def build_nested_space(
    phi_norms, eta0: float, samples: int = 1000, seed: int = 0
) -> tuple:
    """Construct the weighted sequence space compactly embedded below Phi.

    The recursion eta_n = (eta_{n-1} + 1)/2 climbs to 1 and the radii
    r_n = (1 - eta_n) / (2 |h_n|_Phi) shrink to 0.  The certificate samples the
    unit sphere of the weighted space and checks (i) the embedding norm stays
    below 1 - eta0 and (ii) every tail satisfies
    |s_N - s_m|_Phi <= eta_N - eta_m.
    """
    if not 0.0 < eta0 < 1.0:
        raise ValueError("eta0 must lie in (0, 1)")
    phi_norms = np.asarray(phi_norms, dtype=float)
    if np.any(phi_norms <= 0):
        raise ValueError("Phi-norms must be positive")
    N = len(phi_norms)
    etas = np.zeros(N + 1)
    etas[0] = eta0
    for i in range(1, N + 1):
        etas[i] = (etas[i - 1] + 1.0) / 2.0
    radii = (1.0 - etas[1:]) / (2.0 * phi_norms)
    spec = NestedSpaceSpec(eta0=eta0, etas=etas, phi_norms=phi_norms, radii=radii)

    rng = np.random.default_rng(seed)
    emb_viol = 0
    tail_viol = 0
    max_emb = 0.0
    bound = 1.0 - eta0
    for _ in range(samples):
        g = rng.standard_normal(N)
        nrm = np.linalg.norm(g)
        if nrm == 0:
            continue
        x = radii * g / nrm  # |x|_H = 1 exactly
        phi_terms = np.abs(x) * phi_norms
        emb = float(np.sum(phi_terms))
        max_emb = max(max_emb, emb)
        if emb > bound * (1.0 + 1e-12):
            emb_viol += 1
        tails = np.cumsum(phi_terms[::-1])[::-1]  # tails[m] = sum_{i >= m} (0-based)
        # |s_N - s_m|_Phi <= eta_N - eta_m for every m = 0..N-1
        allowed = etas[-1] - etas[:-1]
        if np.any(tails > allowed * (1.0 + 1e-12) + 1e-15):
            tail_viol += 1
    cert = NestedSpaceCertificate(
        embedding_norm_bound=bound,
        max_embedding_norm=max_emb,
        embedding_violations=emb_viol,
        tail_violations=tail_viol,
        samples=samples,
    )
    return spec, cert
