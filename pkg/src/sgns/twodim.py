"""Two-dimensional structure: the interpolation inequality for the L4 norm,
the sharpened trilinear bounds, the shifted deterministic equation with its
energy inequality and Gronwall uniqueness, and the pathwise-uniqueness
experiment for twin stochastic runs driven by one Wiener path.

The L4-based constants are stated for Dirichlet domains; on the torus the
sharp constants may differ, so every check records the realized ratio and a
refinement-stability verdict instead of hard-asserting the literature value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimates import gronwall_eval
from .galerkin import GalerkinConfig, _compiled, generate_wiener, integrate_trajectory
from .nonlinear import TrilinearWorkspace, bilinear_B, trilinear_b
from .spectral import Basis, SpectralField, eval_physical, norm

# Young-chain constant in the shifted energy inequality: bounding the doubled
# convection term by (1/2)||v||^2 + C (|v|^2 + 1) ||z||_L4^4 via two Young
# splits at ratio 1/2 and the quadratic L4 interpolation costs C = 128.
YOUNG_CHAIN_C = 128.0


def _require_2d(basis: Basis):
    if basis.domain.d != 2:
        raise ValueError("this diagnostic is specific to d = 2")


def l4_norm(u: SpectralField, grid_n: int | None = None) -> float:
    """L4 norm by grid quadrature, exact for N >= 4K+1."""
    N = grid_n if grid_n is not None else 4 * u.basis.domain.K + 2
    vals = eval_physical(u, N)
    vol = u.basis.domain.volume
    return float((np.mean(np.sum(vals**2, axis=-1) ** 2) * vol) ** 0.25)


def ladyzhenskaya_check(u: SpectralField, grid_n: int | None = None) -> float:
    """||u||_L4 / (2^(1/4) |u|_H^(1/2) ||u||^(1/2)); expected <= 1 on domains,
    recorded (not asserted) on the torus."""
    _require_2d(u.basis)
    h = norm(u, "H")
    d = norm(u, "D")
    if h == 0.0 or d == 0.0:
        raise ValueError("Ladyzhenskaya ratio needs a nonzero field")
    return l4_norm(u, grid_n) / (2.0**0.25 * math.sqrt(h) * math.sqrt(d))


def trilinear_2d_bound(
    u: SpectralField, v: SpectralField, w: SpectralField, ws: TrilinearWorkspace
) -> float:
    """|b(u,v,w)| over the 2D interpolation bound; nan when degenerate."""
    _require_2d(u.basis)
    denom = (
        2.0**0.5
        * math.sqrt(norm(u, "H") * norm(u, "D"))
        * norm(v, "D")
        * math.sqrt(norm(w, "H") * norm(w, "D"))
    )
    if denom == 0.0:
        return math.nan
    return abs(trilinear_b(u, v, w, ws)) / denom


@dataclass
class PathBoundReport:
    ratio: float
    b_l2_vdual: float
    sup_H: float
    l2_V: float


def convection_path_bound(record, basis: Basis, ws: TrilinearWorkspace) -> PathBoundReport:
    """Path-level bound ||B(u)||_{L2(0,T;V')} <= sqrt(2) |u|_{Linf H} ||u||_{L2 V}
    evaluated on the snapshot grid of a simulated trajectory."""
    _require_2d(basis)
    times = record.snap_times
    if len(times) < 2:
        raise ValueError("record carries too few snapshots")
    b2 = np.zeros(len(times))
    v2 = np.zeros(len(times))
    supH = 0.0
    for pos in range(len(times)):
        u = record.snapshot_field(basis, pos)
        b2[pos] = norm(bilinear_B(u, u, ws), "Vdual") ** 2
        v2[pos] = norm(u, "V") ** 2
        supH = max(supH, norm(u, "H"))
    dts = np.diff(times)
    int_b = float(np.sum(b2[:-1] * dts))
    int_v = float(np.sum(v2[:-1] * dts))
    denom = 2.0**0.5 * supH * math.sqrt(int_v)
    ratio = math.sqrt(int_b) / denom if denom > 0 else 0.0
    return PathBoundReport(ratio=ratio, b_l2_vdual=math.sqrt(int_b), sup_H=supH, l2_V=math.sqrt(int_v))


# -- shifted deterministic equation ------------------------------------------


@dataclass
class ShiftedProblem:
    """dv/dt = -Av + v + z - B(v + z) + f on the first n modes, v(0) = P_n u0.

    z may be None, a callable t -> SpectralField, or a coords array sampled on
    the step grid (steps+1, n); array paths are linearly interpolated at the
    Runge-Kutta half steps.  f likewise (constant field or callable).
    """

    basis: Basis
    n: int
    dt: float
    T: float
    u0: SpectralField
    z: object = None
    f: object = None
    include_B: bool = True

    def __post_init__(self):
        _require_2d(self.basis)
        if self.dt <= 0 or self.T < self.dt:
            raise ValueError("need dt > 0 and T >= dt")
        if not 1 <= self.n <= self.basis.n_modes:
            raise ValueError(f"n must lie in [1, {self.basis.n_modes}]")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))


def _path_eval(problem: ShiftedProblem, sys, source) -> object:
    """Normalize a z/f specification to a function t -> coords."""
    if source is None:
        zero = np.zeros(problem.n)
        return lambda t: zero
    if callable(source):
        return lambda t: sys.encode(source(t))
    if isinstance(source, SpectralField):
        const = sys.encode(source)
        return lambda t: const
    arr = np.asarray(source, dtype=float)
    if arr.shape != (problem.steps + 1, problem.n):
        raise ValueError(f"path array must have shape {(problem.steps + 1, problem.n)}")

    def interp(t):
        s = t / problem.dt
        j = min(int(math.floor(s)), problem.steps - 1)
        w = s - j
        return (1.0 - w) * arr[j] + w * arr[j + 1]

    return interp


def solve_shifted(problem: ShiftedProblem) -> np.ndarray:
    """Classical RK4 integration; returns the coords path (steps+1, n)."""
    sys = _compiled(problem.basis, problem.n, None, problem.include_B)
    z_at = _path_eval(problem, sys, problem.z)
    f_at = _path_eval(problem, sys, problem.f)

    def rhs(x, t):
        zt = z_at(t)
        out = -sys.lamD * x + zt + f_at(t)
        if problem.include_B:
            w = x + zt
            out = out - sys.convection(w)
        return out

    from .spectral import project_Pn

    x = sys.encode(project_Pn(problem.u0, problem.n))
    steps = problem.steps
    path = np.zeros((steps + 1, problem.n))
    path[0] = x
    dt = problem.dt
    for j in range(steps):
        t = j * dt
        k1 = rhs(x, t)
        k2 = rhs(x + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = rhs(x + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = rhs(x + dt * k3, t + dt)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise RuntimeError(f"shifted solve left the finite range at step {j + 1}")
        path[j + 1] = x
    return path


@dataclass
class EnergyInequalityReport:
    worst_margin: float
    margins: np.ndarray
    C: float


def energy_inequality_check(
    v_path: np.ndarray, problem: ShiftedProblem, C: float = YOUNG_CHAIN_C
) -> EnergyInequalityReport:
    """Discrete form of d|v|^2/dt + (1/2)||v||^2 <= a(t) + theta(t)|v|^2 with
    a = |z|_H^2 + |f|_{V'}^2 + C ||z||_L4^4 and theta = 2 + C ||z||_L4^4.

    Margins are RHS - LHS per step; the worst one is expected >= -O(dt)."""
    sys = _compiled(problem.basis, problem.n, None, problem.include_B)
    z_at = _path_eval(problem, sys, problem.z)
    f_at = _path_eval(problem, sys, problem.f)
    wVdual = problem.basis.mode_weights("Vdual", problem.n)
    steps = problem.steps
    margins = np.zeros(steps)
    for j in range(steps):
        t = j * problem.dt
        x = v_path[j]
        zt = z_at(t)
        ft = f_at(t)
        zf = sys.decode(zt)
        z_l4 = l4_norm(zf) if np.any(zt != 0.0) else 0.0
        a_t = float(np.sum(zt * zt)) + float(np.sum(ft * ft * wVdual)) + C * z_l4**4
        theta_t = 2.0 + C * z_l4**4
        h2 = float(np.sum(x * x))
        d2 = float(np.sum(sys.lamD * x * x))
        lhs = (float(np.sum(v_path[j + 1] ** 2)) - h2) / problem.dt + 0.5 * d2
        margins[j] = a_t + theta_t * h2 - lhs
    return EnergyInequalityReport(worst_margin=float(np.min(margins)), margins=margins, C=C)


@dataclass
class ShiftedUniquenessReport:
    distance_sq: np.ndarray
    envelope: np.ndarray
    within_envelope: bool
    identical: bool


def uniqueness_shifted(
    problem: ShiftedProblem,
    v10: SpectralField,
    v20: SpectralField,
    rel_tol: float = 1e-6,
) -> ShiftedUniquenessReport:
    """Distance of two shifted solutions against the Gronwall envelope
    y' <= theta(t) y with theta = 2 ||v2 + z||^2 (Dirichlet)."""
    sys = _compiled(problem.basis, problem.n, None, problem.include_B)
    p1 = ShiftedProblem(
        basis=problem.basis, n=problem.n, dt=problem.dt, T=problem.T,
        u0=v10, z=problem.z, f=problem.f, include_B=problem.include_B,
    )
    p2 = ShiftedProblem(
        basis=problem.basis, n=problem.n, dt=problem.dt, T=problem.T,
        u0=v20, z=problem.z, f=problem.f, include_B=problem.include_B,
    )
    path1 = solve_shifted(p1)
    path2 = solve_shifted(p2)
    identical = bool(np.array_equal(path1, path2))
    w = path1 - path2
    dist2 = np.sum(w * w, axis=1)
    z_at = _path_eval(problem, sys, problem.z)
    steps = problem.steps
    theta = np.zeros(steps)
    for j in range(steps):
        wj = path2[j] + z_at(j * problem.dt)
        theta[j] = 2.0 * float(np.sum(sys.lamD * wj * wj))
    grid = np.arange(steps + 1) * problem.dt
    env = gronwall_eval(np.zeros(steps), theta, dist2[0], grid)
    scale = max(dist2[0], 1e-300)
    within = bool(np.all(dist2 <= env * (1.0 + rel_tol) + 1e-14 * scale))
    return ShiftedUniquenessReport(
        distance_sq=dist2, envelope=env, within_envelope=within, identical=identical
    )


# -- pathwise uniqueness of the stochastic system --------------------------------


@dataclass
class PathwiseUniquenessReport:
    gamma: float
    eps: float
    C_eps: float
    lipschitz_L: float
    ratios_at_T: np.ndarray
    sup_ratios: np.ndarray
    median_ratio_T: float
    identical: bool
    trajectories: int


def pathwise_uniqueness_experiment(
    config: GalerkinConfig,
    lipschitz_L: float,
    gamma: float,
    n_traj: int = 100,
    eps: float | None = None,
    perturb_mode: int = 0,
) -> PathwiseUniquenessReport:
    """Twin stochastic runs on one Wiener path, u2 starting gamma off u1.

    Requires the certified Lipschitz quotient L < 2 of the noise.  The
    weighted distance exp(-r(t)) |u1 - u2|_H^2, with r' = C_eps ||u2||^2 and
    C_eps = 2/eps from the Young split of the convection difference, has
    nonincreasing expectation up to the martingale term; the report carries
    the per-trajectory terminal and running ratios against the initial value.
    With gamma = 0 the runs must coincide bitwise.
    """
    _require_2d(config.basis)
    if not lipschitz_L < 2.0:
        raise ValueError(f"pathwise-uniqueness gate requires L < 2, got L = {lipschitz_L}")
    L_eff = max(lipschitz_L, lipschitz_L**2)
    if eps is None:
        eps = 0.5 * (2.0 - L_eff)
    if not 0.0 < eps < 2.0 - L_eff + 1e-15:
        raise ValueError(f"eps must lie in (0, 2 - max(L, L^2)) = (0, {2.0 - L_eff})")
    C_eps = 2.0 / eps

    basis = config.basis
    pert = np.zeros(basis.n_modes)
    pert[perturb_mode] = gamma
    u0_pert = config.u0 + basis.field_from_real_coords(pert)

    def variant(u0):
        return GalerkinConfig(
            basis=basis, n=config.n, dt=config.dt, T=config.T, u0=u0,
            model=config.model, forcing=config.forcing, cutoff_level=config.cutoff_level,
            seed=config.seed, snapshot_stride=1, scheme=config.scheme,
            include_B=config.include_B,
        )

    cfg1, cfg2 = variant(config.u0), variant(u0_pert)
    ratios_T = np.zeros(n_traj)
    sup_ratios = np.zeros(n_traj)
    identical = True
    for r in range(n_traj):
        path = generate_wiener(cfg1.steps, cfg1.M, cfg1.dt, cfg1.seed, r)
        rec1 = integrate_trajectory(cfg1, path=path, traj_index=r)
        rec2 = integrate_trajectory(cfg2, path=path, traj_index=r)
        if rec1.aborted or rec2.aborted:
            raise RuntimeError(f"trajectory {r} aborted during the uniqueness experiment")
        if gamma == 0.0:
            if not np.array_equal(rec1.snap_u, rec2.snap_u):
                identical = False
            ratios_T[r] = 0.0
            sup_ratios[r] = 0.0
            continue
        U2 = np.sum((rec1.snap_u - rec2.snap_u) ** 2, axis=1)
        r_t = C_eps * np.concatenate([[0.0], np.cumsum(rec2.norm_D[:-1] ** 2) * cfg2.dt])
        weighted = np.exp(-r_t) * U2
        ratios_T[r] = weighted[-1] / weighted[0]
        sup_ratios[r] = float(np.max(weighted)) / weighted[0]
    return PathwiseUniquenessReport(
        gamma=gamma,
        eps=eps,
        C_eps=C_eps,
        lipschitz_L=lipschitz_L,
        ratios_at_T=ratios_T,
        sup_ratios=sup_ratios,
        median_ratio_T=float(np.median(ratios_T)),
        identical=identical,
        trajectories=n_traj,
    )
