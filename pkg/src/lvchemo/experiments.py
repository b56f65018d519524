"""Numerical studies built on ``dynamics.run``.

* vanishing-diffusion sweeps of the peak density ``max ||u+v||_inf``
* an empirical bracket for the diffusion level below which a threshold M
  is exceeded
* convergence of the parabolic runs to the hyperbolic (d1 = d2 = 0) run
* blow-up probes of the hyperbolic system

All of these report what the runs did; none of them claims a value for the
non-constructive constants of the underlying existence results.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .config import RunConfig
from .dynamics import RunResult, Termination, run
from .grid import Field, GridSpec, integrate
from .regimes import CriterionInputs, check_p_conditions, initial_data_criterion

log = logging.getLogger(__name__)


def run_config(cfg: RunConfig, **model_overrides) -> RunResult:
    if model_overrides:
        cfg = cfg.with_model(**model_overrides)
    u0, v0 = cfg.initial_fields()
    m = cfg.monitors
    return run(
        u0,
        v0,
        cfg.model,
        cfg.control,
        cfg.t_end,
        m.observe_every,
        p_monitor=m.p_monitor,
        q_monitor=m.q_monitor,
        elliptic=cfg.elliptic,
    )


# -- vanishing-diffusion sweep ----------------------------------------------


@dataclass(frozen=True)
class SweepRecord:
    d1: float
    d2: float
    peak_density: float
    time_of_peak: float
    termination: str
    error: str | None = None


@dataclass
class SweepResult:
    records: list[SweepRecord]

    def by_pair(self) -> dict[tuple[float, float], SweepRecord]:
        return {(r.d1, r.d2): r for r in self.records}

    def peak(self, d1: float, d2: float | None = None) -> float:
        return self.by_pair()[(d1, d1 if d2 is None else d2)].peak_density


def _sweep_member(args) -> SweepRecord:
    cfg, d1, d2 = args
    try:
        res = run_config(cfg, d1=d1, d2=d2)
    except Exception as exc:  # recorded, the sweep goes on
        return SweepRecord(d1, d2, math.nan, math.nan, "error", f"{type(exc).__name__}: {exc}")
    return SweepRecord(d1, d2, res.peak, res.t_peak, res.termination.value)


def vanishing_diffusion_sweep(
    base: RunConfig, d_list, workers: int = 1
) -> SweepResult:
    pairs = [(float(d), float(d)) if np.isscalar(d) else (float(d[0]), float(d[1])) for d in d_list]
    jobs = [(base, d1, d2) for d1, d2 in pairs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            recs = list(ex.map(_sweep_member, jobs))
    else:
        recs = [_sweep_member(j) for j in jobs]
    for r in recs:
        log.info("sweep d=(%g, %g): peak %.4g at t=%.4g [%s]", r.d1, r.d2, r.peak_density, r.time_of_peak, r.termination)
    return SweepResult(recs)


# -- d*(M) bracket -------------------------------------------------------------


@dataclass
class DStarResult:
    M: float
    d_star: float | None
    bracket: tuple[float, float] | None
    evaluations: list[tuple[float, float, bool]] = field(default_factory=list)


def find_dstar(base: RunConfig, M: float, d_hi: float, d_lo: float, iters: int = 6) -> DStarResult:
    """Bisect in log d (d1 = d2 = d) on the predicate 'peak density > M'.

    Assumes the predicate holds at small d and fails at large d. Returns
    ``d_hi`` if it already holds there and None if it fails even at ``d_lo``.
    """
    if not 0 < d_lo < d_hi:
        raise ValueError("need 0 < d_lo < d_hi")
    evals: list[tuple[float, float, bool]] = []

    def exceeds(d: float) -> bool:
        peak = run_config(base, d1=d, d2=d).peak
        hit = peak > M
        evals.append((d, peak, hit))
        log.info("dstar M=%g: d=%.4g peak=%.4g %s", M, d, peak, "exceeds" if hit else "below")
        return hit

    if exceeds(d_hi):
        return DStarResult(M, d_hi, (d_hi, d_hi), evals)
    if not exceeds(d_lo):
        return DStarResult(M, None, None, evals)
    lo, hi = d_lo, d_hi  # predicate true at lo, false at hi
    for _ in range(iters):
        mid = math.sqrt(lo * hi)
        if exceeds(mid):
            lo = mid
        else:
            hi = mid
    log.info("dstar M=%g bracket [%.4g, %.4g]", M, lo, hi)
    return DStarResult(M, math.sqrt(lo * hi), (lo, hi), evals)


# -- parabolic -> hyperbolic convergence --------------------------------------


@dataclass(frozen=True)
class ConvergenceEntry:
    d: float
    err_u: float
    err_v: float
    err_w: float
    excluded: bool = False
    reason: str = ""


@dataclass
class ConvergenceReport:
    t_check: float
    entries: list[ConvergenceEntry]

    def errors(self, name: str = "u") -> list[float]:
        return [getattr(e, "err_" + name) for e in self.entries if not e.excluded]


def hhe_ppe_convergence(base: RunConfig, d_list, t_check: float = 0.2) -> ConvergenceReport:
    """Sup-norm distance at ``t_check`` between runs with d1 = d2 = d and d = 0.

    Every run is integrated to exactly ``t_check`` (the last step is
    shortened), so no interpolation in time is needed.
    """
    cfg = base.replace(t_end=t_check)
    ref = run_config(cfg, d1=0.0, d2=0.0)
    if ref.termination is not Termination.COMPLETED:
        raise RuntimeError(f"reference hyperbolic run ended early: {ref.message}")
    entries = []
    for d in d_list:
        d = float(d)
        res = run_config(cfg, d1=d, d2=d)
        if res.termination is not Termination.COMPLETED:
            entries.append(ConvergenceEntry(d, math.nan, math.nan, math.nan, True, res.message))
            continue
        a, b = res.final, ref.final
        entries.append(
            ConvergenceEntry(
                d,
                float(np.max(np.abs(a.u.values - b.u.values))),
                float(np.max(np.abs(a.v.values - b.v.values))),
                float(np.max(np.abs(a.w.values - b.w.values))),
            )
        )
    return ConvergenceReport(t_check, entries)


# -- blow-up probe -------------------------------------------------------------


def grid_saturation_threshold(u0: Field, v0: Field, fraction: float = 0.1) -> float:
    """Density at which ``fraction`` of the bounded total mass sits in one cell.

    Total mass of the hyperbolic system stays below
    ``max(int u0 + int v0, 2|Omega|)``, so on a fixed grid ``||u+v||_inf``
    can never exceed that over the cell volume; this is the discrete
    stand-in for ``||u||_inf + ||v||_inf -> infinity``.
    """
    g = u0.grid
    mass = max(integrate(u0) + integrate(v0), 2 * g.measure)
    return fraction * mass / g.cell_volume


def convex_increasing(t: np.ndarray, y: np.ndarray) -> bool:
    """True if log y has positive slope and positive finite-difference
    curvature at every sample of the last quartile."""
    t = np.asarray(t, dtype=float)
    ly = np.log(np.asarray(y, dtype=float))
    k = (3 * len(t)) // 4
    tt, yy = t[k:], ly[k:]
    if len(tt) < 3:
        return False
    slope = np.diff(yy) / np.diff(tt)
    curv = np.diff(slope) / np.diff(0.5 * (tt[1:] + tt[:-1]))
    return bool(np.all(slope > 0) and np.all(curv > 0))


@dataclass
class ProbeReport:
    termination: str
    last_time: float
    t: list[float]
    y: list[float]
    mass_bound: float
    max_mass: float
    convex_increasing: bool
    conditions_hold: bool
    criterion_holds: bool | None
    criterion_lhs: float | None
    criterion_rhs: float | None
    peak: float
    threshold: float

    @property
    def mass_margin(self) -> float:
        """Relative slack in the total-mass bound (negative means violated)."""
        return 1.0 - self.max_mass / self.mass_bound

    @property
    def blew_up(self) -> bool:
        return self.termination in (Termination.BLOW_UP.value, Termination.DT_UNDERFLOW.value)


def blowup_probe(
    cfg: RunConfig,
    p_monitor: float | None = None,
    threshold_fraction: float = 0.1,
    B: float = 1.0,
) -> ProbeReport:
    """Run the hyperbolic system and summarise whether it concentrates.

    ``cfg.control.blowup_threshold``, when set, wins over the grid-saturation
    threshold.
    """
    p = cfg.monitors.p_monitor if p_monitor is None else p_monitor
    cfg = cfg.with_model(d1=0.0, d2=0.0)
    u0, v0 = cfg.initial_fields()
    thr = cfg.control.blowup_threshold
    if thr is None:
        thr = grid_saturation_threshold(u0, v0, threshold_fraction)
        cfg = cfg.replace(control=replace(cfg.control, blowup_threshold=thr))
    cfg = cfg.replace(monitors=replace(cfg.monitors, p_monitor=p))

    conds = check_p_conditions(cfg.model, p) if p > 1 else None
    crit = None
    if conds is not None and conds.any:
        inputs = CriterionInputs.from_params(cfg.model, p, cfg.grid.measure, B=B)
        crit = initial_data_criterion(u0, v0, inputs)

    res = run_config(cfg)
    mass = res.column("mass_u") + res.column("mass_v")
    bound = max(float(mass[0]), 2 * cfg.grid.measure)
    t, y = res.column("t"), res.column("yp")
    return ProbeReport(
        termination=res.termination.value,
        last_time=res.final.t,
        t=t.tolist(),
        y=y.tolist(),
        mass_bound=bound,
        max_mass=float(mass.max()),
        convex_increasing=convex_increasing(t, y),
        conditions_hold=bool(conds is not None and conds.any),
        criterion_holds=None if crit is None else crit.holds,
        criterion_lhs=None if crit is None else crit.lhs,
        criterion_rhs=None if crit is None else crit.rhs,
        peak=res.peak,
        threshold=thr,
    )


def default_grid(dim: int = 1) -> GridSpec:
    return GridSpec.line(1024) if dim == 1 else GridSpec.rect(128, 128)
