"""Run configuration: TOML schema, validation, defaults and round-tripping.

Schema (every section optional except ``model`` and ``grid``)::

    [model]      d1 d2 d3 chi1 chi2 mu1 mu2 a1 a2 alpha beta gamma
    [grid]       dim nx ny lx ly
    [initial.u]  kind = "constant" | "bump" | "spike" | "noise", plus its keys
    [initial.v]  same
    [control]    cfl_adv cfl_diff dt_max dt_min blowup_threshold reaction_safety
    [elliptic]   tol max_iter
    [monitors]   p_monitor q_monitor observe_every
    [run]        t_end output_dir

Unknown keys are rejected; missing keys take the defaults in ``DEFAULTS``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import scipy.fft

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from .dynamics import StepControl
from .elliptic import EllipticConfig
from .grid import Field, GridError, GridSpec
from .params import ModelParams, ParamError


class ConfigError(ValueError):
    pass


INITIAL_KINDS = {
    "constant": {"value": 0.0},
    "bump": {"amplitude": 1.0, "center": None, "width": 0.1},
    "spike": {"mass": 1.0, "patch_fraction": 0.0625},
    "noise": {"seed": 0, "cutoff": 8, "amplitude": 1.0},
}


@dataclass(frozen=True)
class InitialDataSpec:
    """One initial profile. ``center`` is in domain coordinates (default: middle)."""

    kind: str = "spike"
    value: float = 0.0
    amplitude: float = 1.0
    center: tuple[float, ...] | None = None
    width: float = 0.1
    mass: float = 1.0
    patch_fraction: float = 0.0625
    seed: int = 0
    cutoff: int = 8

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ConfigError(f"initial kind must be one of {sorted(INITIAL_KINDS)}, got {self.kind!r}")
        if self.kind == "constant" and not self.value >= 0:
            raise ConfigError("constant initial value must be >= 0")
        if self.kind in ("bump", "noise") and not self.amplitude >= 0:
            raise ConfigError("amplitude must be >= 0")
        if self.kind == "bump" and not self.width > 0:
            raise ConfigError("bump width must be > 0")
        if self.kind == "spike":
            if not self.mass >= 0:
                raise ConfigError("spike mass must be >= 0")
            if not 0 < self.patch_fraction <= 1:
                raise ConfigError(f"patch_fraction must be in (0, 1], got {self.patch_fraction}")
        if self.kind == "noise" and self.cutoff < 0:
            raise ConfigError("noise cutoff must be >= 0")
        if self.center is not None:
            object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    @classmethod
    def constant(cls, value: float) -> "InitialDataSpec":
        return cls(kind="constant", value=value)

    @classmethod
    def spike(cls, mass: float = 1.0, patch_fraction: float = 0.0625) -> "InitialDataSpec":
        return cls(kind="spike", mass=mass, patch_fraction=patch_fraction)

    @classmethod
    def bump(cls, amplitude: float = 1.0, width: float = 0.1, center=None) -> "InitialDataSpec":
        return cls(kind="bump", amplitude=amplitude, width=width, center=center)

    @classmethod
    def noise(cls, seed: int = 0, cutoff: int = 8, amplitude: float = 1.0) -> "InitialDataSpec":
        return cls(kind="noise", seed=seed, cutoff=cutoff, amplitude=amplitude)

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"kind": self.kind}
        for k in INITIAL_KINDS[self.kind]:
            val = getattr(self, k)
            if val is None:
                continue
            d[k] = list(val) if isinstance(val, tuple) else val
        return d


def _centered_run(n: int, frac: float) -> tuple[int, int]:
    """Smallest count k >= frac*n with the same parity as n, and its start."""
    k = max(1, math.ceil(frac * n - 1e-9))
    if (n - k) % 2:
        k += 1
    k = min(k, n)
    return (n - k) // 2, k


def generate_initial(spec: InitialDataSpec, grid: GridSpec) -> Field:
    """Nonnegative initial profile on ``grid``; deterministic for a given spec."""
    if spec.kind == "constant":
        return grid.full(spec.value)
    if spec.kind == "spike":
        a = np.zeros(grid.shape)
        if grid.dim == 1:
            s, k = _centered_run(grid.nx, spec.patch_fraction)
            a[s : s + k] = 1.0
            cells = k
        else:
            side = math.sqrt(spec.patch_fraction)
            sx, kx = _centered_run(grid.nx, side)
            sy, ky = _centered_run(grid.ny, side)
            while kx * ky < spec.patch_fraction * grid.size - 1e-9:
                kx += 2
                sx -= 1
            a[sx : sx + kx, sy : sy + ky] = 1.0
            cells = kx * ky
        return Field(grid, a * (spec.mass / (cells * grid.cell_volume)))
    if spec.kind == "bump":
        xs = grid.centers()
        center = spec.center or tuple(0.5 * L for L in (grid.lx, grid.ly)[: grid.dim])
        if len(center) != grid.dim:
            raise ConfigError(f"bump center needs {grid.dim} coordinates")
        r2 = sum((x - c) ** 2 for x, c in zip(xs, center))
        return Field(grid, spec.amplitude * np.exp(-r2 / (2 * spec.width**2)))
    # filtered noise: white noise projected onto the lowest cosine modes
    rng = np.random.default_rng(spec.seed)
    coef = scipy.fft.dctn(rng.standard_normal(grid.shape), norm="ortho")
    mask = np.ones(grid.shape, dtype=bool)
    for ax, n in enumerate(grid.shape):
        idx = np.arange(n).reshape([-1 if i == ax else 1 for i in range(grid.dim)])
        mask &= idx <= spec.cutoff
    s = scipy.fft.idctn(np.where(mask, coef, 0.0), norm="ortho")
    s = s - s.mean()
    peak = float(np.abs(s).max())
    if peak > 0:
        s = s / peak
    return Field(grid, spec.amplitude * np.clip(1.0 + s, 0.0, None))


@dataclass(frozen=True)
class Monitors:
    p_monitor: float = 2.0
    q_monitor: float = 4.0
    observe_every: int = 1

    def __post_init__(self):
        if not self.p_monitor >= 1:
            raise ConfigError("p_monitor must be >= 1")
        if not self.q_monitor > 1:
            raise ConfigError("q_monitor must be > 1")
        if self.observe_every < 1:
            raise ConfigError("observe_every must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    grid: GridSpec
    u0: InitialDataSpec = field(default_factory=InitialDataSpec)
    v0: InitialDataSpec = field(default_factory=InitialDataSpec)
    control: StepControl = field(default_factory=StepControl)
    elliptic: EllipticConfig = field(default_factory=EllipticConfig)
    monitors: Monitors = field(default_factory=Monitors)
    t_end: float = 1.0
    output_dir: str = "out"

    def __post_init__(self):
        if not self.t_end > 0:
            raise ConfigError("run.t_end must be > 0")

    def with_model(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, model=self.model.with_(**kw))

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)

    def initial_fields(self) -> tuple[Field, Field]:
        return generate_initial(self.u0, self.grid), generate_initial(self.v0, self.grid)

    def to_dict(self) -> dict[str, Any]:
        g = self.grid
        grid = {"dim": g.dim, "nx": g.nx, "lx": g.lx}
        if g.dim == 2:
            grid.update(ny=g.ny, ly=g.ly)
        control = dataclasses.asdict(self.control)
        if control["blowup_threshold"] is None:
            del control["blowup_threshold"]
        return {
            "model": self.model.to_dict(),
            "grid": grid,
            "initial": {"u": self.u0.to_dict(), "v": self.v0.to_dict()},
            "control": control,
            "elliptic": dataclasses.asdict(self.elliptic),
            "monitors": dataclasses.asdict(self.monitors),
            "run": {"t_end": self.t_end, "output_dir": self.output_dir},
        }


DEFAULTS: dict[str, dict[str, Any]] = {
    "control": {f.name: f.default for f in dataclasses.fields(StepControl)},
    "elliptic": {f.name: f.default for f in dataclasses.fields(EllipticConfig)},
    "monitors": {f.name: f.default for f in dataclasses.fields(Monitors)},
    "run": {"t_end": 1.0, "output_dir": "out"},
}

SECTIONS = ("model", "grid", "initial", "control", "elliptic", "monitors", "run")
_MODEL_KEYS = tuple(f.name for f in dataclasses.fields(ModelParams))
_GRID_KEYS = ("dim", "nx", "ny", "lx", "ly")


def _reject_unknown(section: str, got: dict, allowed) -> None:
    extra = sorted(set(got) - set(allowed))
    if extra:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(extra)}")


def _build(section: str, cls, data: dict):
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None
    except (ValueError, ParamError, GridError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def _initial(name: str, data: dict | None) -> InitialDataSpec:
    if data is None:
        return InitialDataSpec()
    if not isinstance(data, dict):
        raise ConfigError(f"[initial.{name}] must be a table")
    kind = data.get("kind", "spike")
    if kind not in INITIAL_KINDS:
        raise ConfigError(f"[initial.{name}] kind must be one of {sorted(INITIAL_KINDS)}, got {kind!r}")
    _reject_unknown(f"initial.{name}", data, ("kind", *INITIAL_KINDS[kind]))
    return _build(f"initial.{name}", InitialDataSpec, dict(data))


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    _reject_unknown("top level", data, SECTIONS)
    for req in ("model", "grid"):
        if req not in data:
            raise ConfigError(f"missing required section [{req}]")
    model_d = data["model"]
    _reject_unknown("model", model_d, _MODEL_KEYS)
    for k, v in model_d.items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"model.{k} must be a number, got {v!r}")
    model = _build("model", ModelParams, {k: float(v) for k, v in model_d.items()})

    grid_d = dict(data["grid"])
    _reject_unknown("grid", grid_d, _GRID_KEYS)
    grid_d.setdefault("dim", 1)
    if "nx" not in grid_d:
        raise ConfigError("grid.nx is required")
    grid = _build("grid", GridSpec, grid_d)

    init = data.get("initial", {})
    _reject_unknown("initial", init, ("u", "v"))
    parts = {}
    for sec, cls in (("control", StepControl), ("elliptic", EllipticConfig), ("monitors", Monitors)):
        got = data.get(sec, {})
        _reject_unknown(sec, got, DEFAULTS[sec])
        parts[sec] = _build(sec, cls, {**DEFAULTS[sec], **got})
    run = data.get("run", {})
    _reject_unknown("run", run, DEFAULTS["run"])
    run = {**DEFAULTS["run"], **run}
    try:
        return RunConfig(
            model=model,
            grid=grid,
            u0=_initial("u", init.get("u")),
            v0=_initial("v", init.get("v")),
            t_end=float(run["t_end"]),
            output_dir=str(run["output_dir"]),
            **parts,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def parse_config(text: str) -> RunConfig:
    """Parse and validate a TOML run configuration."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from None
    return config_from_dict(data)


def load_config(path: str | Path) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def serialize_config(cfg: RunConfig) -> str:
    return tomli_w.dumps(cfg.to_dict())


# flat ``--key value`` overrides, as used by the CLI
FLAT_KEYS: dict[str, tuple[str, ...]] = {
    **{k: ("model", k) for k in _MODEL_KEYS},
    **{k: ("grid", k) for k in _GRID_KEYS},
    **{k: ("control", k) for k in DEFAULTS["control"]},
    **{k: ("elliptic", k) for k in DEFAULTS["elliptic"]},
    **{k: ("monitors", k) for k in DEFAULTS["monitors"]},
    **{k: ("run", k) for k in DEFAULTS["run"]},
}


def apply_overrides(data: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    """Return a copy of ``data`` with flat overrides written into their sections."""
    out = {k: (dict(v) if isinstance(v, dict) else v) for k, v in data.items()}
    for key, val in overrides.items():
        if val is None:
            continue
        if key in ("u0", "v0"):
            out.setdefault("initial", {})
            out["initial"] = dict(out["initial"])
            out["initial"][key[0]] = val
            continue
        if key not in FLAT_KEYS:
            raise ConfigError(f"unknown override key {key!r}")
        sec, name = FLAT_KEYS[key]
        out.setdefault(sec, {})[name] = val
    return out


def parse_initial_flag(text: str) -> dict[str, Any]:
    """``'spike:mass=1,patch_fraction=0.0625'`` -> initial-data table."""
    kind, _, rest = text.partition(":")
    d: dict[str, Any] = {"kind": kind.strip()}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        k, sep, v = item.partition("=")
        if not sep:
            raise ConfigError(f"bad initial-data item {item!r} (expected key=value)")
        k = k.strip()
        if k in ("seed", "cutoff"):
            d[k] = int(v)
        elif k == "center":
            d[k] = [float(c) for c in v.split(";")]
        else:
            d[k] = float(v)
    return d
