"""Explicit time stepping for the chemotaxis-competition system.

One step is forward Euler on the species equations, with donor-cell
upwinding for the chemotactic flux, followed by a fresh elliptic solve for
the signal. ``compute_dt`` picks the step so that every cell keeps a
nonnegative share of its own mass, which makes nonnegativity structural.
Setting ``d1 = d2 = 0`` gives the hyperbolic limit system.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace

import numpy as np

from .elliptic import EllipticConfig, solve_array
from .grid import (
    FaceField,
    Field,
    GridSpec,
    div_arrays,
    grad_norm_q_array,
    grad_x,
    grad_y,
    laplacian_array,
    total,
)
from .params import ModelParams

log = logging.getLogger(__name__)


class BlowUp(RuntimeError):
    def __init__(self, t: float, level: float, state: "State | None" = None):
        super().__init__(f"numerical blow-up at t={t:.6g} (||u||+||v|| = {level:.3e})")
        self.t = t
        self.level = level
        self.state = state


class DtUnderflow(RuntimeError):
    def __init__(self, t: float, dt: float):
        super().__init__(f"time step collapsed to {dt:.3e} at t={t:.6g}")
        self.t = t
        self.dt = dt


@dataclass(frozen=True)
class StepControl:
    """Step-size policy.

    The three fractions bound, per cell, the share of mass a single step may
    remove by diffusion, advection and kinetics; their sum must stay <= 1 so
    that the Euler update is a nonnegative combination.
    ``blowup_threshold=None`` means ``1e6 * max(1, ||u0 + v0||_inf)``.
    """

    cfl_adv: float = 0.5
    cfl_diff: float = 0.4
    dt_max: float = 1e-2
    dt_min: float = 1e-12
    blowup_threshold: float | None = None
    reaction_safety: float = 0.05

    def __post_init__(self):
        if not 0 < self.cfl_adv <= 1:
            raise ValueError(f"cfl_adv must be in (0, 1], got {self.cfl_adv}")
        if not 0 < self.cfl_diff <= 1:
            raise ValueError(f"cfl_diff must be in (0, 1], got {self.cfl_diff}")
        if not 0 < self.reaction_safety < 1:
            raise ValueError(f"reaction_safety must be in (0, 1), got {self.reaction_safety}")
        if self.cfl_adv + self.cfl_diff + self.reaction_safety > 1:
            raise ValueError("cfl_adv + cfl_diff + reaction_safety must not exceed 1")
        if not 0 < self.dt_min < self.dt_max:
            raise ValueError("need 0 < dt_min < dt_max")
        if self.blowup_threshold is not None and not self.blowup_threshold > 0:
            raise ValueError("blowup_threshold must be > 0")

    def resolved(self, u0: Field, v0: Field) -> "StepControl":
        if self.blowup_threshold is not None:
            return self
        peak = float(np.max(u0.values + v0.values))
        return replace(self, blowup_threshold=1e6 * max(1.0, peak))


@dataclass(frozen=True, eq=False)
class State:
    t: float
    u: Field
    v: Field
    w: Field

    @property
    def grid(self) -> GridSpec:
        return self.u.grid


class Termination(str, enum.Enum):
    COMPLETED = "completed"
    BLOW_UP = "blow_up"
    DT_UNDERFLOW = "dt_underflow"


@dataclass(frozen=True)
class Record:
    t: float
    mass_u: float
    mass_v: float
    linf_u: float
    linf_v: float
    linf_sum: float
    yp: float
    gradq: float

    FIELDS = ("t", "mass_u", "mass_v", "linf_u", "linf_v", "linf_sum", "yp", "gradq")

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, k) for k in self.FIELDS)


@dataclass
class RunResult:
    series: list[Record]
    final: State
    termination: Termination
    termination_time: float | None = None
    steps: int = 0
    p_monitor: float = 2.0
    q_monitor: float = 4.0
    message: str = ""
    peak: float = 0.0  # max of ||u+v||_inf over every accepted step
    t_peak: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.series])


# -- building blocks --------------------------------------------------------


def _upwind_flux(c: np.ndarray, w: np.ndarray, chi: float, grid: GridSpec):
    gx = grad_x(w, grid.dx)
    fx = np.zeros_like(gx)
    # donor cell is the one the flow leaves: left cell when grad w > 0
    fx[1:-1] = chi * np.where(gx[1:-1] > 0, c[:-1], c[1:]) * gx[1:-1]
    fy = None
    if grid.dim == 2:
        gy = grad_y(w, grid.dy)
        fy = np.zeros_like(gy)
        fy[:, 1:-1] = chi * np.where(gy[:, 1:-1] > 0, c[:, :-1], c[:, 1:]) * gy[:, 1:-1]
    return fx, fy


def chemotactic_flux(c: Field, w: Field, chi: float) -> FaceField:
    """Donor-cell approximation of ``chi * c * grad(w)`` on cell faces."""
    if c.grid != w.grid:
        raise ValueError("c and w live on different grids")
    fx, fy = _upwind_flux(c.values, w.values, chi, c.grid)
    return FaceField(c.grid, fx, fy)


def advective_tendency(c: np.ndarray, w: np.ndarray, chi: float, grid: GridSpec) -> np.ndarray:
    fx, fy = _upwind_flux(c, w, chi, grid)
    return -div_arrays(fx, fy, grid.dx, grid.dy)


def reaction_arrays(u: np.ndarray, v: np.ndarray, p: ModelParams):
    return p.mu1 * u * (1.0 - u - p.a1 * v), p.mu2 * v * (1.0 - p.a2 * u - v)


def reaction(u: Field, v: Field, params: ModelParams) -> tuple[Field, Field]:
    ru, rv = reaction_arrays(u.values, v.values, params)
    return Field(u.grid, ru), Field(v.grid, rv)


def _outflow_rate(w: np.ndarray, grid: GridSpec) -> float:
    """max over cells of the summed outgoing face speed |grad w| / h."""
    gx = grad_x(w, grid.dx)
    rate = (np.maximum(gx[1:], 0.0) + np.maximum(-gx[:-1], 0.0)) / grid.dx
    if grid.dim == 2:
        gy = grad_y(w, grid.dy)
        rate = rate + (np.maximum(gy[:, 1:], 0.0) + np.maximum(-gy[:, :-1], 0.0)) / grid.dy
    return float(rate.max())


def compute_dt(state: State, params: ModelParams, ctrl: StepControl) -> float:
    g = state.grid
    dt = ctrl.dt_max
    dmax = max(params.d1, params.d2)
    if dmax > 0:
        dt = min(dt, ctrl.cfl_diff * g.h**2 / (2 * g.dim * dmax))
    chi = max(params.chi1, params.chi2)
    if chi > 0:
        rate = chi * _outflow_rate(state.w.values, g)
        if rate > 0:
            dt = min(dt, ctrl.cfl_adv / rate)
    nu = float(np.max(state.u.values))
    nv = float(np.max(state.v.values))
    kin = max(params.mu1 * (nu + params.a1 * nv + 1.0), params.mu2 * (nv + params.a2 * nu + 1.0))
    if kin > 0:
        dt = min(dt, ctrl.reaction_safety / kin)
    if dt < ctrl.dt_min:
        raise DtUnderflow(state.t, dt)
    return dt


def initial_state(
    u0: Field, v0: Field, params: ModelParams, cfg: EllipticConfig = EllipticConfig(), t: float = 0.0
) -> State:
    if u0.grid != v0.grid:
        raise ValueError("u0 and v0 live on different grids")
    if np.any(u0.values < 0) or np.any(v0.values < 0):
        raise ValueError("initial data must be nonnegative")
    w, _ = solve_array(
        params.alpha * u0.values + params.beta * v0.values, u0.grid, params.d3, params.gamma, cfg
    )
    return State(t, u0, v0, Field(u0.grid, w))


def _finish(state, u, v, dt, params, ctrl, cfg) -> State:
    g = state.grid
    w, _ = solve_array(
        params.alpha * u + params.beta * v, g, params.d3, params.gamma, cfg, x0=state.w.values
    )
    t = state.t + dt
    new = State(t, Field(g, u), Field(g, v), Field(g, w))
    thr = ctrl.blowup_threshold
    if thr is not None:
        level = float(np.max(u)) + float(np.max(v))
        if level > thr:
            raise BlowUp(t, level, new)
    return new


def step(
    state: State,
    params: ModelParams,
    ctrl: StepControl,
    dt: float | None = None,
    cfg: EllipticConfig = EllipticConfig(),
) -> State:
    """Advance one forward-Euler step; ``dt`` defaults to ``compute_dt``."""
    if dt is None:
        dt = compute_dt(state, params, ctrl)
    g = state.grid
    u, v, w = state.u.values, state.v.values, state.w.values
    ru, rv = reaction_arrays(u, v, params)
    du = params.d1 * laplacian_array(u, g) + advective_tendency(u, w, params.chi1, g) + ru
    dv = params.d2 * laplacian_array(v, g) + advective_tendency(v, w, params.chi2, g) + rv
    return _finish(state, u + dt * du, v + dt * dv, dt, params, ctrl, cfg)


def step_hhe(
    state: State,
    params: ModelParams,
    ctrl: StepControl,
    dt: float | None = None,
    cfg: EllipticConfig = EllipticConfig(),
) -> State:
    """Step of the diffusion-free limit system; ignores d1 and d2."""
    if dt is None:
        dt = compute_dt(state, params.with_(d1=0.0, d2=0.0), ctrl)
    g = state.grid
    u, v, w = state.u.values, state.v.values, state.w.values
    ru, rv = reaction_arrays(u, v, params)
    du = advective_tendency(u, w, params.chi1, g) + ru
    dv = advective_tendency(v, w, params.chi2, g) + rv
    return _finish(state, u + dt * du, v + dt * dv, dt, params, ctrl, cfg)


def diagnostics(state: State, p: float, q: float) -> Record:
    g = state.grid
    u, v = state.u.values, state.v.values
    vol = g.cell_volume
    return Record(
        t=state.t,
        mass_u=total(u) * vol,
        mass_v=total(v) * vol,
        linf_u=float(u.max()),
        linf_v=float(v.max()),
        linf_sum=float((u + v).max()),
        yp=(total(u**p) + total(v**p)) * vol,
        gradq=grad_norm_q_array(u, g, q) + grad_norm_q_array(v, g, q),
    )


def run(
    u0: Field,
    v0: Field,
    params: ModelParams,
    ctrl: StepControl,
    t_end: float,
    observe_every: int = 1,
    *,
    p_monitor: float = 2.0,
    q_monitor: float = 4.0,
    elliptic: EllipticConfig = EllipticConfig(),
    max_steps: int | None = None,
) -> RunResult:
    """Integrate from ``t=0`` to ``t_end`` or until blow-up / dt collapse.

    The last step is shortened to land exactly on ``t_end``.
    """
    if observe_every < 1:
        raise ValueError("observe_every must be >= 1")
    if not t_end > 0:
        raise ValueError("t_end must be > 0")
    ctrl = ctrl.resolved(u0, v0)
    state = initial_state(u0, v0, params, elliptic)
    series = [diagnostics(state, p_monitor, q_monitor)]
    peak, t_peak = series[0].linf_sum, 0.0
    nsteps = 0
    term = Termination.COMPLETED
    t_term = None
    msg = ""
    while state.t < t_end:
        if max_steps is not None and nsteps >= max_steps:
            msg = f"stopped after max_steps={max_steps}"
            break
        try:
            dt = compute_dt(state, params, ctrl)
            # avoid a sliver step at the end
            if state.t + dt >= t_end or t_end - (state.t + dt) < 1e-12 * t_end:
                dt = t_end - state.t
            state = step(state, params, ctrl, dt, elliptic)
        except BlowUp as exc:
            state = exc.state
            term, t_term, msg = Termination.BLOW_UP, exc.t, str(exc)
            nsteps += 1
            peak, t_peak = max(peak, exc.level), exc.t
            break
        except DtUnderflow as exc:
            term, t_term, msg = Termination.DT_UNDERFLOW, exc.t, str(exc)
            break
        nsteps += 1
        if state.t >= t_end:
            state = replace(state, t=t_end)
        level = float(np.max(state.u.values + state.v.values))
        if level > peak:
            peak, t_peak = level, state.t
        if nsteps % observe_every == 0:
            series.append(diagnostics(state, p_monitor, q_monitor))
    if series[-1].t < state.t:
        series.append(diagnostics(state, p_monitor, q_monitor))
    if msg:
        log.info(msg)
    return RunResult(
        series=series,
        final=state,
        termination=term,
        termination_time=t_term,
        steps=nsteps,
        p_monitor=p_monitor,
        q_monitor=q_monitor,
        message=msg,
        peak=peak,
        t_peak=t_peak,
    )
