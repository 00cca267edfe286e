import math

import numpy as np
import pytest

from sgns.estimates import (
    aggregate,
    epsilon_for_p,
    gronwall_eval,
    p_range,
    uniformity_report,
)
from sgns.galerkin import GalerkinConfig, integrate_ensemble, integrate_trajectory
from sgns.noise import default_noise_model
from sgns.spectral import random_field


def test_p_range_values():
    assert p_range(2.0) == (2.0, math.inf)
    assert p_range(1.0) == (2.0, 3.0)
    lo, hi = p_range(0.5)
    assert lo == 2.0
    assert abs(hi - 7.0 / 3.0) < 1e-15
    with pytest.raises(ValueError):
        p_range(0.0)
    with pytest.raises(ValueError):
        p_range(2.5)


def test_epsilon_for_p_values():
    assert epsilon_for_p(2.0, 2.0) == (0.0, 1.0)
    lo, hi = epsilon_for_p(2.0, 1.0)
    assert abs(hi - 0.5) < 1e-15
    with pytest.raises(ValueError):
        epsilon_for_p(3.0, 1.0)  # upper endpoint excluded


def test_p_range_and_epsilon_consistent():
    # epsilon interval nonempty iff p admissible: both encode the same inequality
    for eta in (0.3, 0.9, 1.4, 2.0):
        lo, hi = p_range(eta)
        for p in np.linspace(2.0, (hi if hi != math.inf else 6.0) - 1e-9, 7):
            _, upper = epsilon_for_p(p, eta)
            assert upper > 0
        if hi != math.inf:
            with pytest.raises(ValueError):
                epsilon_for_p(hi, eta)


def make_records(basis, n, n_traj, T=0.05, seed=0, **kw):
    rng = np.random.default_rng(99)
    u0 = random_field(basis, rng, n=4, decay=0.5)
    cfg = GalerkinConfig(
        basis=basis, n=n, dt=1e-3, T=T, u0=u0, model=default_noise_model(2), seed=seed, **kw
    )
    return integrate_ensemble(cfg, n_traj)


def test_aggregate_basic(basis2d_small):
    recs = make_records(basis2d_small, n=8, n_traj=6)
    stats = aggregate({8: recs}, p_list=(2.0, 2.2), eta=0.5)
    entry = stats.per_n[8]
    assert entry["count"] == 6
    assert entry["aborts"] == 0
    assert entry["sup_H_p"][2.0].mean > 0
    assert entry["int_dirichlet2"].se >= 0
    # 2.2 < 7/3 is admissible at eta = 0.5; p = 3 is not and gets flagged
    assert not stats.warnings
    stats2 = aggregate({8: recs}, p_list=(3.0,), eta=0.5)
    assert stats2.warnings


def test_aggregate_duplicated_trajectory(basis2d_small):
    recs = make_records(basis2d_small, n=8, n_traj=2)
    # duplicate the same record: SE = 0, mean = functional value
    stats = aggregate({8: [recs[0], recs[0]]}, p_list=(2.0,))
    st = stats.per_n[8]["sup_H_p"][2.0]
    assert st.se == 0.0
    assert abs(st.mean - recs[0].sup_H() ** 2) < 1e-15


def test_aggregate_deterministic_dissipative(basis2d_small):
    # zero noise, zero forcing: sup attained at t=0, E[sup|u|^2] = |P_n u0|^2
    rng = np.random.default_rng(1)
    u0 = random_field(basis2d_small, rng, n=8)
    cfg = GalerkinConfig(basis=basis2d_small, n=8, dt=1e-3, T=0.05, u0=u0, model=None, seed=0)
    recs = [integrate_trajectory(cfg, traj_index=i) for i in range(2)]
    stats = aggregate({8: recs}, p_list=(2.0,))
    from sgns.spectral import norm, project_Pn

    expect = norm(project_Pn(u0, 8), "H") ** 2
    assert abs(stats.per_n[8]["sup_H_p"][2.0].mean - expect) <= 1e-12 * expect


def test_aggregate_stokes_analytic_integral(basis2d_small):
    # Stokes-only single mode: int ||u||^2 dt has the closed form
    # lam |u0|^2 (1 - r^(2S)) / (1 - r^2) * dt with r = 1 - lam dt (left endpoint),
    # which converges to |u0|^2 (1 - e^(-2 lam T))/2 as dt -> 0
    basis = basis2d_small
    lam = basis.mode_weights("D", 1)[0]
    T, dt = 1.0, 1e-4
    cfg = GalerkinConfig(
        basis=basis, n=4, dt=dt, T=T, u0=basis.basis_field(0), model=None, include_B=False, seed=0
    )
    rec = integrate_trajectory(cfg)
    got = rec.integral_dirichlet2()
    exact = lam * (1 - math.exp(-2 * lam * T)) / (2 * lam)
    assert abs(got - exact) < 5e-4 * exact


def test_uniformity_pass_and_fail():
    class Rec:
        def __init__(self, sup, intd):
            self._s, self._i = sup, intd
            self.aborted = False

        def sup_H(self):
            return self._s

        def integral_weighted(self, p):
            return self._i

        def integral_dirichlet2(self):
            return self._i

    flat = {n: [Rec(1.0 + 0.01 * i, 2.0) for i in range(5)] for n in (4, 8, 16, 32)}
    stats = aggregate(flat, p_list=(2.0,))
    verdict = uniformity_report(stats)
    assert verdict.passed
    assert all(r <= 1.5 for r in verdict.ratios.values())

    growing = {
        n: [Rec(1.0 * 2**j * (1 + 0.001 * i), 2.0 * 2**j) for i in range(5)]
        for j, n in enumerate((4, 8, 16, 32))
    }
    stats2 = aggregate(growing, p_list=(2.0,))
    verdict2 = uniformity_report(stats2)
    assert not verdict2.passed


def test_uniformity_needs_three_levels(basis2d_small):
    recs = make_records(basis2d_small, n=8, n_traj=3)
    stats = aggregate({8: recs}, p_list=(2.0,))
    with pytest.raises(ValueError):
        uniformity_report(stats)


def test_gronwall_constant_theta():
    grid = np.linspace(0.0, 1.0, 201)
    theta = np.full(200, 0.7)
    a = np.zeros(200)
    out = gronwall_eval(a, theta, y0=2.0, grid=grid)
    assert abs(out[-1] - 2.0 * math.exp(0.7)) < 1e-12
    out2 = gronwall_eval(np.full(200, 0.3), np.zeros(200), y0=1.0, grid=grid)
    assert abs(out2[-1] - (1.0 + 0.3)) < 1e-12


def test_gronwall_refinement_first_order():
    # piecewise inputs vs fine-grid refinement oracle
    def run(m):
        grid = np.linspace(0.0, 1.0, m + 1)
        tt = grid[:-1]
        a = 1.0 + np.sin(3 * tt) ** 2
        theta = 0.5 + 0.5 * np.cos(2 * tt) ** 2
        return gronwall_eval(a, theta, y0=1.0, grid=grid)[-1]

    fine = run(6400)
    errs = [abs(run(m) - fine) for m in (100, 200, 400)]
    order = math.log(errs[0] / errs[2]) / math.log(4.0)
    assert 0.8 <= order <= 1.2


def test_gronwall_dominates_forward_euler():
    rng = np.random.default_rng(3)
    grid = np.linspace(0.0, 0.5, 101)
    a = rng.uniform(0.0, 2.0, 100)
    theta = rng.uniform(0.0, 3.0, 100)
    env = gronwall_eval(a, theta, y0=1.0, grid=grid)
    y = 1.0
    dt = grid[1] - grid[0]
    for j in range(100):
        y = y + dt * (a[j] + theta[j] * y)
        assert y <= env[j + 1] * (1 + 1e-12)


def test_gronwall_rejects_negative():
    grid = np.linspace(0, 1, 11)
    with pytest.raises(ValueError):
        gronwall_eval(-np.ones(10), np.ones(10), 1.0, grid)
