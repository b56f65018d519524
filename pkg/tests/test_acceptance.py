"""Acceptance suite: one test per acceptance criterion, at the stated tolerances.

Run alone with ``pytest tests/test_acceptance.py -v``; the terminal summary
ends with one PASS/FAIL line per criterion.
"""

import math
import time

import numpy as np
import pytest

from lvchemo.config import InitialDataSpec, RunConfig, generate_initial
from lvchemo.dynamics import (
    BlowUp,
    StepControl,
    Termination,
    advective_tendency,
    compute_dt,
    initial_state,
    run,
    step,
)
from lvchemo.elliptic import EllipticConfig, solve_array, solve_w, verify_lp_bound
from lvchemo.experiments import (
    blowup_probe,
    grid_saturation_threshold,
    hhe_ppe_convergence,
    vanishing_diffusion_sweep,
)
from lvchemo.grid import Field, GridSpec, integrate, total
from lvchemo.params import ModelParams, unit_params
from lvchemo.regimes import (
    CriterionInputs,
    PScan,
    blowup_coefficients,
    check_hhe_global,
    check_p_conditions,
    check_reduced,
    exists_p,
    finite_time_bound,
    initial_data_criterion,
    loop_exists_p,
    ode_blowup_oracle,
    xu_mu_sum_ceiling,
)

TOL = EllipticConfig().tol


def _random_input(rng, grid):
    kind = rng.integers(3)
    shape = grid.shape
    if kind == 0:
        u = rng.random(shape)
    elif kind == 1:
        u = rng.random(shape) ** 8 * 50  # spiky
    else:
        u = np.zeros(shape)
        idx = rng.integers(0, grid.size, size=5)
        u.ravel()[idx] = rng.uniform(1, 1e3, size=5)  # isolated point masses
    return Field(grid, u)


@pytest.fixture(scope="module")
def elliptic_cases():
    rng = np.random.default_rng(20240611)
    cases = []
    for grid in (GridSpec.line(256), GridSpec.rect(64, 64)):
        for _ in range(100):
            P = unit_params(
                d3=10 ** rng.uniform(-2, 1),
                alpha=rng.uniform(0.1, 3),
                beta=rng.uniform(0.1, 3),
                gamma=10 ** rng.uniform(-1, 1),
            )
            cases.append((P, _random_input(rng, grid), _random_input(rng, grid)))
    return cases


@pytest.fixture(scope="module")
def elliptic_solutions(elliptic_cases):
    t0 = time.perf_counter()
    sols = [solve_w(u, v, P)[0] for P, u, v in elliptic_cases]
    return sols, time.perf_counter() - t0


@pytest.mark.criterion(1, "elliptic mass identity to 1e-10 relative, < 10 s")
def test_criterion_01_mass_identity(elliptic_cases, elliptic_solutions, detail):
    sols, elapsed = elliptic_solutions
    worst = 0.0
    for (P, u, v), w in zip(elliptic_cases, sols):
        rhs = P.alpha * integrate(u) + P.beta * integrate(v)
        worst = max(worst, abs(P.gamma * integrate(w) - rhs) / rhs)
    detail(f"{len(sols)} inputs, worst rel {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-10
    assert elapsed < 10.0


@pytest.mark.criterion(2, "discrete L^p bound on w for p in {1, 2, inf}")
def test_criterion_02_lp_bound(elliptic_cases, elliptic_solutions, detail):
    sols, _ = elliptic_solutions
    worst = math.inf
    for (P, u, v), w in zip(elliptic_cases, sols):
        for p in (1, 2, math.inf):
            worst = min(worst, verify_lp_bound(u, v, w, P, p))
    detail(f"min margin {worst:.3e}")
    assert worst >= -10 * TOL


@pytest.mark.criterion(3, "second-order eigenfunction convergence, ratio in [3.2, 4.8]")
def test_criterion_03_eigenfunction_order(detail):
    d3, gamma = 1.0, 1.0
    ratios = []
    for dim in (1, 2):
        errs = []
        for n in (64, 128):
            g = GridSpec.line(n) if dim == 1 else GridSpec.rect(n, n)
            xs = g.centers()
            f = np.prod([np.cos(np.pi * x) for x in xs], axis=0)
            exact = f / (gamma + d3 * dim * np.pi**2)
            w, _ = solve_array(f, g, d3, gamma)
            errs.append(np.abs(w - exact).max())
        ratios.append(errs[0] / errs[1])
    detail("ratios " + ", ".join(f"{dim}D {r:.3f}" for dim, r in zip((1, 2), ratios)))
    for r in ratios:
        assert 3.2 <= r <= 4.8


@pytest.mark.criterion(4, "dynamics invariants on 20 seeded runs (1D nx=512, t_end=1)")
def test_criterion_04_dynamics_invariants(detail):
    g = GridSpec.line(512)
    vol = g.cell_volume
    worst_adv = worst_mass = worst_sum = 0.0
    steps = 0
    blowups = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        hhe = seed % 2 == 0
        d = 0.0 if hhe else 10 ** rng.uniform(-4, -3)
        P = ModelParams(
            d1=d, d2=d, d3=rng.uniform(0.5, 2),
            chi1=rng.uniform(0, 3), chi2=rng.uniform(0, 3),
            mu1=rng.uniform(0.3, 2), mu2=rng.uniform(0.3, 2),
            a1=rng.uniform(0, 1.5), a2=rng.uniform(0, 1.5),
            alpha=rng.uniform(0.5, 2), beta=rng.uniform(0.5, 2), gamma=rng.uniform(0.5, 2),
        )
        u0 = generate_initial(InitialDataSpec.noise(seed=seed, amplitude=rng.uniform(0.2, 3)), g)
        v0 = generate_initial(InitialDataSpec.noise(seed=seed + 1000, amplitude=rng.uniform(0.2, 3)), g)
        ctrl = StepControl(blowup_threshold=grid_saturation_threshold(u0, v0))
        mu_bound = max(g.measure, integrate(u0)) * 1.05
        mv_bound = max(g.measure, integrate(v0)) * 1.05
        sum_bound = max(integrate(u0) + integrate(v0), 2 * g.measure) * 1.05
        s = initial_state(u0, v0, P)
        while s.t < 1.0:
            dt = min(compute_dt(s, P, ctrl), 1.0 - s.t)
            for c, chi in ((s.u.values, P.chi1), (s.v.values, P.chi2)):
                adv = abs(total(advective_tendency(c, s.w.values, chi, g))) * dt * vol
                worst_adv = max(worst_adv, adv / (total(c) * vol))
            stop = False
            try:
                s = step(s, P, ctrl, dt)
            except BlowUp as exc:  # invariants still checked on the last state
                s, stop = exc.state, True
                blowups += 1
            u, v = s.u.values, s.v.values
            assert u.min() >= 0.0 and v.min() >= 0.0, f"seed {seed}: negative density"
            mu_, mv_ = integrate(s.u), integrate(s.v)
            worst_mass = max(worst_mass, mu_ / mu_bound * 1.05, mv_ / mv_bound * 1.05)  # ratio to the unpadded bound
            assert mu_ <= mu_bound and mv_ <= mv_bound, f"seed {seed}: mass bound"
            if hhe:
                worst_sum = max(worst_sum, (mu_ + mv_) / sum_bound * 1.05)
                assert mu_ + mv_ <= sum_bound, f"seed {seed}: sum bound"
            steps += 1
            if stop:
                break
    detail(
        f"{steps} steps, adv drift {worst_adv:.1e}, mass/bound {worst_mass:.3f}, "
        f"sum/bound {worst_sum:.3f}, {blowups} blow-ups"
    )
    assert worst_adv < 1e-12


@pytest.mark.criterion(5, "uniform logistic oracle to 1e-3; coexistence stationary to 1e-10")
def test_criterion_05_uniform_oracles(detail):
    g = GridSpec.line(32)
    P = unit_params(chi1=2.0, chi2=2.0)
    res = run(g.full(0.1), g.zeros(), P, StepControl(dt_max=1e-3), 1.0)
    exact = 0.1 * math.e / (1 + 0.1 * (math.e - 1))
    rel = np.abs(res.final.u.values - exact).max() / exact

    a1, a2 = 0.5, 0.25
    us, vs = (1 - a1) / (1 - a1 * a2), (1 - a2) / (1 - a1 * a2)
    Pc = unit_params(a1=a1, a2=a2, chi1=2.0, chi2=2.0)
    s = initial_state(g.full(us), g.full(vs), Pc)
    drift = 0.0
    for _ in range(1000):
        s = step(s, Pc, StepControl())
        drift = max(drift, np.abs(s.u.values - us).max(), np.abs(s.v.values - vs).max())
    detail(f"logistic rel err {rel:.2e}, coexistence drift {drift:.1e}")
    assert res.final.t == 1.0
    assert rel <= 1e-3
    assert drift <= 1e-10


@pytest.mark.criterion(6, "ODE comparison: oracle <= bound in 200/200; analytic cases to 1%")
def test_criterion_06_finite_time_bound(detail):
    rng = np.random.default_rng(6)
    ok = 0
    for _ in range(200):
        kappa = rng.uniform(1.1, 4.0)
        d = 10 ** rng.uniform(-1, 0.7)
        b = 0.0 if rng.random() < 0.2 else rng.uniform(0, 5)
        floor = (2 * b / d) ** (1 / kappa)
        a = rng.uniform(0.1, 5) if b == 0 else floor * rng.uniform(1.01, 3)
        T = finite_time_bound(a, b, d, kappa)
        t = ode_blowup_oracle(a, b, d, kappa)
        ok += T is not None and t is not None and t <= T
    t1 = ode_blowup_oracle(1, 0, 1, 2)
    t2 = ode_blowup_oracle(2, 1, 1, 2)
    detail(f"{ok}/200 dominated; t=1 case {t1:.5f} (bound 2), coth case {t2:.5f} (bound 1)")
    assert ok == 200
    assert finite_time_bound(1, 0, 1, 2) == 2.0 and finite_time_bound(2, 1, 1, 2) == 1.0
    assert t1 == pytest.approx(1.0, rel=1e-2)
    assert t2 == pytest.approx(0.5 * math.log(3), rel=1e-2)


def _random_params(rng, chi_hi):
    return ModelParams(
        d3=rng.uniform(0.2, 2), chi1=rng.uniform(0, chi_hi), chi2=rng.uniform(0, chi_hi),
        mu1=rng.uniform(0.2, 2), mu2=rng.uniform(0.2, 2),
        a1=rng.uniform(0, 2.5), a2=rng.uniform(0, 2.5),
        alpha=rng.uniform(0.3, 3), beta=rng.uniform(0.3, 3), gamma=rng.uniform(0.3, 3),
    )


@pytest.mark.criterion(7, "regimes algebra (a)-(d)")
def test_criterion_07_regimes_algebra(detail):
    rng = np.random.default_rng(7)
    branch_case = {("up2", "vp2"): "i", ("up2", "vp"): "ii", ("up", "vp2"): "iii", ("up", "vp"): "iv"}

    # (a) coefficient positivity <=> pointwise conditions
    checked = positive = 0
    for _ in range(1000):
        P = _random_params(rng, 12.0)
        p = 10 ** rng.uniform(math.log10(1.05), 1.5)
        c = check_p_conditions(P, p)
        k = blowup_coefficients(P, p)
        if c.boundary or min(abs(k.coeff_u), abs(k.coeff_v)) < 1e-9:
            continue
        checked += 1
        assert k.positive == c.any
        if k.positive:
            positive += 1
            assert c.first_case() == branch_case[(k.case_used_u, k.case_used_v)]
    assert checked >= 990 and 50 < positive < checked - 50

    # (b) exists_p <=> reduced conditions, away from 5% ties
    agreed = found = 0
    scan = PScan(p_max=1e4)
    for _ in range(500):
        P = _random_params(rng, 5.0)
        r = check_reduced(P).any
        lo = check_reduced(P.with_(chi1=0.95 * P.chi1, chi2=0.95 * P.chi2)).any
        hi = check_reduced(P.with_(chi1=1.05 * P.chi1, chi2=1.05 * P.chi2)).any
        for side in (P.a1 * P.alpha / P.beta, P.a2 * P.beta / P.alpha):
            if 0.95 < side < 1.05:
                lo = not r
        if not (lo == r == hi):
            continue
        e = exists_p(P, scan) is not None
        assert e == r, P
        agreed += 1
        found += e
    assert agreed >= 300 and 30 < found < agreed - 30

    # (c) the gamma-carrying conditions need mu1 + mu2 below max (p-1)/(p^2+p)
    p_star, m_star = xu_mu_sum_ceiling()
    assert abs(m_star - math.sqrt(2) / (4 + 3 * math.sqrt(2))) <= 1e-9
    assert abs(p_star - (1 + math.sqrt(2))) <= 1e-6

    # (d) unit-parameter reductions on boundary probes
    assert exists_p(unit_params(chi1=1.01, chi2=1.01)) is not None
    for x1, x2 in ((1.0, 1.0), (0.99, 1.01), (1.01, 0.99), (0.5, 3.0)):
        assert exists_p(unit_params(chi1=x1, chi2=x2)) is None
    for p in (2.0, 4.0, 10.0):
        m = (p - 1) / p
        assert check_p_conditions(unit_params(mu1=m * (1 - 1e-6), mu2=m * (1 - 1e-6)), p).c1
        assert not check_p_conditions(unit_params(mu1=m * (1 + 1e-6), mu2=m * (1 + 1e-6)), p).c1
    assert loop_exists_p(2.01, 2.01, 1, 1, 1, 1) is not None
    for c2, c4 in ((2.0, 2.0), (1.99, 3.0), (3.0, 1.99)):
        assert loop_exists_p(c2, c4, 1, 1, 1, 1) is None
    assert check_hhe_global(unit_params(chi1=1.0, chi2=1.0))
    assert check_hhe_global(unit_params(chi1=0.5, chi2=0.99))
    assert not check_hhe_global(unit_params(chi1=1.0001, chi2=1.0))
    assert not check_hhe_global(unit_params(chi1=1.0, chi2=1.0001))
    detail(f"(a) {checked} points, {positive} positive; (b) {agreed} points, {found} found")


def _growth_config():
    return RunConfig(
        model=unit_params(chi1=5.0, chi2=5.0, mu1=0.5, mu2=0.5),
        grid=GridSpec.line(1024),
        u0=InitialDataSpec.spike(),
        v0=InitialDataSpec.spike(),
        t_end=0.1,
    )


@pytest.mark.criterion(8, "transient growth as d -> 0 (1D nx=1024, <= 5 min)")
def test_criterion_08_transient_growth(detail):
    t0 = time.perf_counter()
    cfg = _growth_config()
    u0, v0 = cfg.initial_fields()
    crit = initial_data_criterion(u0, v0, CriterionInputs.from_params(cfg.model, 2.0, cfg.grid.measure, B=1.0))
    assert crit.holds
    init = float((u0.values + v0.values).max())
    d_list = [1e-1, 1e-2, 1e-3, 1e-4]
    sweep = vanishing_diffusion_sweep(cfg, d_list)
    control = vanishing_diffusion_sweep(cfg.with_model(chi1=0.0, chi2=0.0), d_list)
    elapsed = time.perf_counter() - t0
    peaks = [sweep.peak(d) for d in d_list]
    ctrl_peaks = [control.peak(d) for d in d_list]
    detail(
        "peaks " + ", ".join(f"{p:.1f}" for p in peaks)
        + f"; control max {max(ctrl_peaks):.1f}; initial {init:g}; {elapsed:.0f} s"
    )
    assert peaks[-1] > 3 * peaks[0]
    assert peaks[-1] > 10 * init
    # control: no growth mechanism, the logistic supersolution bound holds
    assert max(ctrl_peaks) <= max(1.0, init) * 1.05
    assert not ctrl_peaks[-1] > 3 * ctrl_peaks[0]
    assert elapsed <= 300


@pytest.mark.criterion(9, "diffusive runs converge to the d=0 run at t=0.2")
def test_criterion_09_convergence(detail):
    cfg = RunConfig(
        model=unit_params(chi1=1.0, chi2=1.0),
        grid=GridSpec.line(256),
        u0=InitialDataSpec.bump(1.0, 0.1),
        v0=InitialDataSpec.bump(0.5, 0.15, center=0.3),
    )
    rep = hhe_ppe_convergence(cfg, [1e-1, 1e-2, 1e-3, 0.0], t_check=0.2)
    e = rep.errors("u")
    detail("u errors " + ", ".join(f"{x:.3g}" for x in e))
    assert len(e) == 4
    assert e[0] > e[1] > e[2]
    assert e[3] == 0.0


@pytest.mark.criterion(10, "chi=5 d=0 run blows up before t=10; chi=0.9 run stays bounded")
def test_criterion_10_blowup_contrast(detail):
    base = _growth_config().replace(t_end=10.0)
    hot = blowup_probe(base)
    # mu = 1 puts chi = 0.9 inside the global-existence region (chi/mu <= 1)
    cold_cfg = base.with_model(chi1=0.9, chi2=0.9, mu1=1.0, mu2=1.0)
    assert check_hhe_global(cold_cfg.model)
    cold = blowup_probe(cold_cfg)
    u0, v0 = base.initial_fields()
    init = float((u0.values + v0.values).max())
    detail(
        f"chi=5: {hot.termination} at t={hot.last_time:.4g}, convex={hot.convex_increasing}; "
        f"chi=0.9: {cold.termination}, peak {cold.peak:.3g}"
    )
    assert hot.termination in (Termination.BLOW_UP.value, Termination.DT_UNDERFLOW.value)
    assert hot.last_time < 10.0
    assert hot.convex_increasing
    assert hot.mass_margin >= -0.05
    assert cold.termination == Termination.COMPLETED.value and cold.last_time == 10.0
    assert cold.peak <= max(1.0, init) * 1.05
    assert cold.mass_margin >= -0.05
