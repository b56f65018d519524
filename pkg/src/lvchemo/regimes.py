"""Parameter-region conditions, blow-up criteria and closed-form bounds.

Every inequality is evaluated literally: strict where the condition is
strict, non-strict where it reads ``<=``. Inequalities that are within a
relative ``flag_tol`` of a tie are reported through ``boundary`` flags so
callers can tell a robust answer from a floating-point coin toss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .grid import Field, integrate, lp_norm
from .params import ModelParams

CASES = ("i", "ii", "iii", "iv")


class RegimeError(ValueError):
    pass


class _Cmp:
    """Collects literal comparisons and remembers near-ties."""

    def __init__(self, flag_tol: float):
        self.flag_tol = flag_tol
        self.ties: list[str] = []

    def _near(self, a, b, label):
        scale = max(abs(a), abs(b), 1e-300)
        if abs(a - b) <= self.flag_tol * scale:
            self.ties.append(label)

    def gt(self, a: float, b: float, label: str = "") -> bool:
        self._near(a, b, label)
        return a > b

    def le(self, a: float, b: float, label: str = "") -> bool:
        self._near(a, b, label)
        return a <= b


@dataclass(frozen=True)
class PConditions:
    p: float
    c1: bool
    c2: bool
    c3: bool
    c4: bool
    boundary: tuple[str, ...] = ()

    @property
    def any(self) -> bool:
        return self.c1 or self.c2 or self.c3 or self.c4

    def first_case(self) -> str | None:
        for name, ok in zip(CASES, (self.c1, self.c2, self.c3, self.c4)):
            if ok:
                return name
        return None


def _check_p(p: float):
    if not p > 1:
        raise RegimeError(f"p must be > 1, got {p}")


def check_p_conditions(params: ModelParams, p: float, flag_tol: float = 1e-9) -> PConditions:
    """Conditions (i)-(iv) on (chi1, chi2) at a fixed exponent p > 1."""
    _check_p(p)
    P = params
    d3, al, be = P.d3, P.alpha, P.beta
    m1, m2, a1, a2 = P.mu1, P.mu2, P.a1, P.a2
    x1, x2 = P.chi1, P.chi2
    cmp = _Cmp(flag_tol)

    # shared thresholds
    up1 = d3 * p * a1 * m1 / (be * (p - 1))  # chi1 above this -> u keeps the u^p v term
    up2 = d3 * p * a2 * m2 / (al * (p - 1))

    c1 = cmp.gt(x1, p * d3 / (p - 1) * m1 * max(1 / al, a1 / be), "i.chi1") & cmp.gt(
        x2, p * d3 / (p - 1) * m2 * max(1 / be, a2 / al), "i.chi2"
    )

    lo1 = (d3 * p * (p + 1) * m1 + d3 * p * a2 * m2 - x2 * al * (p - 1)) / (al * (p * p - 1))
    lo2 = (d3 * p * (p + 1) * m2 + d3 * p * p * a2 * m2) / (al * p * (p - 1) + be * (p * p - 1))
    c2 = (
        cmp.gt(x1, max(lo1, up1), "ii.chi1")
        & cmp.gt(x2, lo2, "ii.chi2.lo")
        & cmp.le(x2, up2, "ii.chi2.hi")
    )

    lo1 = (d3 * p * (p + 1) * m1 + d3 * p * p * a1 * m1) / (al * (p * p - 1) + be * p * (p - 1))
    lo2 = (d3 * p * a1 * m1 + d3 * p * (p + 1) * m2 - x1 * be * (p - 1)) / (be * (p * p - 1))
    c3 = (
        cmp.gt(x1, lo1, "iii.chi1.lo")
        & cmp.le(x1, up1, "iii.chi1.hi")
        & cmp.gt(x2, max(lo2, up2), "iii.chi2")
    )

    lo1 = (
        d3 * p * (p + 1) * m1 + d3 * p * p * a1 * m1 + d3 * p * a2 * m2 - x2 * al * (p - 1)
    ) / (al * (p * p - 1) + be * p * (p - 1))
    lo2 = (
        d3 * p * (p + 1) * m2 + d3 * p * a1 * m1 + d3 * p * p * a2 * m2 - x1 * be * (p - 1)
    ) / (al * p * (p - 1) + be * (p * p - 1))
    c4 = (
        cmp.gt(x1, lo1, "iv.chi1.lo")
        & cmp.le(x1, up1, "iv.chi1.hi")
        & cmp.gt(x2, lo2, "iv.chi2.lo")
        & cmp.le(x2, up2, "iv.chi2.hi")
    )
    return PConditions(p, bool(c1), bool(c2), bool(c3), bool(c4), tuple(cmp.ties))


@dataclass(frozen=True)
class PScan:
    p_min: float = 1.0 + 1e-3
    p_max: float = 1e4
    points: int = 400

    def __post_init__(self):
        if not (1 < self.p_min < self.p_max) or self.points < 2:
            raise RegimeError("need 1 < p_min < p_max and points >= 2")

    def grid(self) -> np.ndarray:
        return np.geomspace(self.p_min, self.p_max, self.points)


def exists_p(params: ModelParams, scan: PScan = PScan()) -> tuple[float, str] | None:
    """First scanned p at which one of (i)-(iv) holds, with the case label."""
    for p in scan.grid():
        case = check_p_conditions(params, float(p)).first_case()
        if case is not None:
            return float(p), case
    return None


@dataclass(frozen=True)
class Reduced:
    r1: bool
    r2: bool
    r3: bool
    r4: bool

    @property
    def any(self) -> bool:
        return self.r1 or self.r2 or self.r3 or self.r4


def check_reduced(params: ModelParams) -> Reduced:
    """The p-free conditions equivalent to 'some p > 1 satisfies (i)-(iv)'."""
    P = params
    d3, al, be = P.d3, P.alpha, P.beta
    big1 = P.chi1 > d3 * P.mu1 * max(1 / al, P.a1 / be)
    big2 = P.chi2 > d3 * P.mu2 * max(1 / be, P.a2 / al)
    mix1 = P.chi1 > d3 * P.mu1 * (1 + P.a1) / (al + be)
    mix2 = P.chi2 > d3 * P.mu2 * (1 + P.a2) / (al + be)
    side1 = P.a1 / be > 1 / al
    side2 = P.a2 / al > 1 / be
    return Reduced(
        r1=big1 and big2,
        r2=big1 and mix2 and side2,
        r3=mix1 and big2 and side1,
        r4=mix1 and mix2 and side1 and side2,
    )


def check_xu(params: ModelParams, p: float) -> bool | None:
    """Earlier blow-up conditions that still carried gamma; None when inapplicable."""
    _check_p(p)
    P = params
    den1 = P.alpha * (p * p - 1) - P.gamma * p * (p - 1)
    den2 = P.beta * (p * p - 1) - P.gamma * p * (p - 1)
    if den1 <= 0 or den2 <= 0:
        return None
    n1 = P.d3 * P.mu1 * p * (p + 1) + P.d3 * P.a1 * P.mu1 * p * p + P.d3 * P.a2 * P.mu2 * p
    n2 = P.d3 * P.mu2 * p * (p + 1) + P.d3 * P.a2 * P.mu2 * p * p + P.d3 * P.a1 * P.mu1 * p
    return P.chi1 > n1 / den1 and P.chi2 > n2 / den2


def xu_mu_sum_ceiling() -> tuple[float, float]:
    """(argmax, max) of (p-1)/(p^2+p) over p > 0 by golden-section search."""
    res = minimize_scalar(
        lambda p: -(p - 1) / (p * p + p),
        bracket=(1.0, 2.0, 10.0),
        method="golden",
        tol=1e-12,
    )
    return float(res.x), float(-res.fun)


def _ratio(chi: float, mu: float) -> float:
    if mu == 0:
        return 0.0 if chi == 0 else math.inf
    return chi / mu


def check_hhe_global(params: ModelParams) -> bool:
    P = params
    return (_ratio(P.chi1, P.mu1) <= P.d3 * min(1 / P.alpha, P.a1 / P.beta)) and (
        _ratio(P.chi2, P.mu2) <= P.d3 * min(1 / P.beta, P.a2 / P.alpha)
    )


def check_m2018(params: ModelParams, n: int) -> bool:
    """Boundedness condition for the parabolic system in dimension n."""
    if n < 1:
        raise RegimeError(f"n must be >= 1, got {n}")
    if n <= 2:
        return True
    P = params
    f = n * P.d3 / (n - 2)
    return (_ratio(P.chi1, P.mu1) < f * min(1 / P.alpha, P.a1 / P.beta)) and (
        _ratio(P.chi2, P.mu2) < f * min(1 / P.beta, P.a2 / P.alpha)
    )


def check_loop_conditions(chi2t, chi4t, mu1t, mu2t, a1t, a2t, p) -> bool:
    """Large-density conditions for the signal-loop system (tilde parameters)."""
    _check_p(p)
    k = p / (p - 1)
    return chi2t > k * (mu1t + (a1t * mu1t * p + a2t * mu2t) / (p + 1)) and chi4t > k * (
        mu2t + (a2t * mu2t * p + a1t * mu1t) / (p + 1)
    )


def loop_exists_p(chi2t, chi4t, mu1t, mu2t, a1t, a2t, scan: PScan = PScan()) -> float | None:
    for p in scan.grid():
        if check_loop_conditions(chi2t, chi4t, mu1t, mu2t, a1t, a2t, float(p)):
            return float(p)
    return None


def loop_tildes(params: ModelParams) -> dict[str, float] | None:
    """Map onto the signal-loop parametrisation; needs d3 = beta = gamma."""
    P = params
    if not (P.d3 == P.beta == P.gamma):
        return None
    return dict(
        chi2t=P.alpha * P.chi1 / P.gamma,
        chi4t=P.chi2,
        mu1t=P.mu1,
        mu2t=P.mu2,
        a1t=P.a1,
        a2t=P.a2,
    )


# -- blow-up coefficient algebra -------------------------------------------


@dataclass(frozen=True)
class BlowupCoefficients:
    """Coefficients of the space-time integrals of u^{p+1} and v^{p+1}.

    ``coeff_u``/``coeff_v`` are on the scale of the ``(1/p) int u^p`` energy
    inequalities; ``C_explicit`` is rescaled to the ``int u^p + int v^p``
    inequality, where the eta-penalty is exactly ``-eta``.
    """

    p: float
    eta: float
    coeff_u: float
    coeff_v: float
    case_used_u: str  # "up2" keeps the u^p v term, "up" absorbs it by Young
    case_used_v: str
    C_explicit: float

    @property
    def positive(self) -> bool:
        return self.coeff_u > 0 and self.coeff_v > 0


def _species_terms(chi, own, other, mu, a, d3, p, eta):
    """(main, cross) coefficients for one species' energy inequality.

    ``own`` multiplies the self-interaction of grad w (alpha for u, beta
    for v); ``other`` the interaction through the other species.
    """
    keep = chi * other * (p - 1) / (d3 * p) - a * mu
    if keep > 0:
        main = chi * own * (p - 1) / (d3 * p) - mu - 2 * eta / (3 * p)
        cross = -eta / (3 * p)
        branch = "2"
    else:
        main = (
            chi * own * (p - 1) / (d3 * p)
            - mu
            + chi * other * (p - 1) / (d3 * (p + 1))
            - a * mu * p / (p + 1)
            - 2 * eta / (3 * p)
        )
        cross = chi * other * (p - 1) / (d3 * p * (p + 1)) - a * mu / (p + 1) - eta / (3 * p)
        branch = ""
    return main, cross, branch


def blowup_coefficients(params: ModelParams, p: float, eta: float = 0.0) -> BlowupCoefficients:
    _check_p(p)
    if eta < 0:
        raise RegimeError("eta must be >= 0")
    P = params
    mu_u, cu_v, bu = _species_terms(P.chi1, P.alpha, P.beta, P.mu1, P.a1, P.d3, p, eta)
    mv_v, cv_u, bv = _species_terms(P.chi2, P.beta, P.alpha, P.mu2, P.a2, P.d3, p, eta)
    coeff_u = mu_u + cv_u
    coeff_v = mv_v + cu_v
    if eta == 0.0:
        c0u, c0v = coeff_u, coeff_v
    else:
        c0u = coeff_u + eta / p
        c0v = coeff_v + eta / p
    return BlowupCoefficients(
        p=p,
        eta=eta,
        coeff_u=coeff_u,
        coeff_v=coeff_v,
        case_used_u="up" + bu,
        case_used_v="vp" + bv,
        C_explicit=p * min(c0u, c0v),
    )


@dataclass(frozen=True)
class CriterionInputs:
    p: float
    C: float
    omega_measure: float
    B: float = 1.0
    eta: float | None = None

    def __post_init__(self):
        if not self.p > 1:
            raise RegimeError("p must be > 1")
        if not self.C > 0:
            raise RegimeError(f"C must be > 0 (conditions fail at p={self.p}), got {self.C}")
        if not self.B > 0:
            raise RegimeError("B must be > 0")
        if not self.omega_measure > 0:
            raise RegimeError("omega_measure must be > 0")
        eta = self.C / 2 if self.eta is None else self.eta
        if not 0 < eta < self.C:
            raise RegimeError("need 0 < eta < C")
        object.__setattr__(self, "eta", eta)

    @classmethod
    def from_params(cls, params: ModelParams, p: float, omega_measure: float, B: float = 1.0):
        c = blowup_coefficients(params, p).C_explicit
        return cls(p=p, C=c, omega_measure=omega_measure, B=B)

    def threshold(self) -> float:
        """C(p) of the initial-data criterion."""
        p, om = self.p, self.omega_measure
        base = 2 ** (2 + 1 / p) * om ** (1 / p) * self.B / self.C
        return base ** (1 / (p + 1)) * max(1.0, 2 * om)


@dataclass(frozen=True)
class CriterionResult:
    holds: bool
    lhs: float
    rhs: float
    C_p: float


def initial_data_criterion(u0: Field, v0: Field, inputs: CriterionInputs) -> CriterionResult:
    if np.any(u0.values < 0) or np.any(v0.values < 0):
        raise RegimeError("initial data must be nonnegative")
    p = inputs.p
    lhs = (lp_norm(u0, p) ** p + lp_norm(v0, p) ** p) ** (1 / p)
    cp = inputs.threshold()
    rhs = cp * max(1.0, integrate(u0) + integrate(v0))
    return CriterionResult(holds=lhs > rhs, lhs=lhs, rhs=rhs, C_p=cp)


# -- comparison ODE ----------------------------------------------------------


def _check_abdk(a, b, d, kappa):
    if not a > 0:
        raise RegimeError("a must be > 0")
    if not b >= 0:
        raise RegimeError("b must be >= 0")
    if not d > 0:
        raise RegimeError("d must be > 0")
    if not kappa > 1:
        raise RegimeError("kappa must be > 1")


def finite_time_bound(a: float, b: float, d: float, kappa: float) -> float | None:
    """Upper bound on the lifetime of y >= a - b t + d int y^kappa; None if a is too small."""
    _check_abdk(a, b, d, kappa)
    if not a > (2 * b / d) ** (1 / kappa):
        return None
    return 2.0 / ((kappa - 1) * a ** (kappa - 1) * d)


@dataclass(frozen=True)
class OracleControl:
    z_max: float = 1e12
    horizon: float = 1e6
    rel_change: float = 1e-2
    max_steps: int = 2_000_000


def ode_blowup_oracle(
    a: float, b: float, d: float, kappa: float, ctrl: OracleControl = OracleControl()
) -> float | None:
    """Time at which z' = -b + d z^kappa, z(0) = a, passes ``z_max``.

    Classical RK4; the step is sized so z changes by about ``rel_change``
    per step and is halved whenever a trial step overshoots that or leaves
    the admissible range. Returns None if z stays below ``z_max`` up to
    ``horizon``.
    """
    _check_abdk(a, b, d, kappa)

    def f(z):
        return -b + d * max(z, 0.0) ** kappa

    t, z = 0.0, float(a)
    h_cap = ctrl.horizon / 1000
    for _ in range(ctrl.max_steps):
        if z > ctrl.z_max:
            return t
        if t >= ctrl.horizon:
            return None
        slope = f(z)
        h = h_cap if slope == 0 else min(h_cap, ctrl.rel_change * max(abs(z), 1e-12) / abs(slope))
        h = min(h, ctrl.horizon - t)
        while True:
            k1 = slope
            k2 = f(z + 0.5 * h * k1)
            k3 = f(z + 0.5 * h * k2)
            k4 = f(z + h * k3)
            zn = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            ok = math.isfinite(zn) and zn >= 0 and abs(zn - z) <= 4 * ctrl.rel_change * max(abs(z), 1e-12)
            if ok or h < 1e-300:
                break
            h *= 0.5
        if zn > ctrl.z_max:
            # linear interpolation to the crossing inside the last step
            return t + h * (ctrl.z_max - z) / (zn - z)
        t, z = t + h, zn
    return None


# -- aggregate report ---------------------------------------------------------


@dataclass
class ConditionReport:
    at_p: PConditions
    exists_p: tuple[float, str] | None
    reduced: Reduced
    xu: bool | None
    xu_applicable: bool
    hhe_global: bool
    m2018_bounded: bool | None = None
    loop_conditions: bool | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        ep = None
        if self.exists_p is not None:
            ep = {"p": self.exists_p[0], "case": self.exists_p[1]}
        return {
            "at_p": {
                "p": self.at_p.p,
                "c1": self.at_p.c1,
                "c2": self.at_p.c2,
                "c3": self.at_p.c3,
                "c4": self.at_p.c4,
                "boundary": list(self.at_p.boundary),
            },
            "exists_p": ep,
            "reduced": {
                "r1": self.reduced.r1,
                "r2": self.reduced.r2,
                "r3": self.reduced.r3,
                "r4": self.reduced.r4,
            },
            "xu": self.xu,
            "xu_applicable": self.xu_applicable,
            "hhe_global": self.hhe_global,
            "m2018_bounded": self.m2018_bounded,
            "loop_conditions": self.loop_conditions,
            "notes": list(self.notes),
        }


def condition_report(
    params: ModelParams, p: float, n: int | None = None, scan: PScan = PScan()
) -> ConditionReport:
    at_p = check_p_conditions(params, p)
    xu = check_xu(params, p)
    notes = []
    if at_p.boundary:
        notes.append("near-tie inequalities at p: " + ", ".join(at_p.boundary))
    loop = None
    tildes = loop_tildes(params)
    if tildes is not None:
        loop = loop_exists_p(**tildes, scan=scan) is not None
    else:
        notes.append("signal-loop comparison needs d3 = beta = gamma; skipped")
    return ConditionReport(
        at_p=at_p,
        exists_p=exists_p(params, scan),
        reduced=check_reduced(params),
        xu=xu,
        xu_applicable=xu is not None,
        hhe_global=check_hhe_global(params),
        m2018_bounded=None if n is None else check_m2018(params, n),
        loop_conditions=loop,
        notes=notes,
    )
