"""Command-line interface.

Exit codes: 0 success, 1 domain error (bad parameters, failed solve, ...),
2 usage error (argparse).  Every run-type subcommand accepts ``--config
FILE`` and then ``--key value`` overrides named after the config keys.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .config import (
    FLAT_KEYS,
    ConfigError,
    apply_overrides,
    config_from_dict,
    parse_initial_flag,
    serialize_config,
)
from .dynamics import DtUnderflow, run
from .elliptic import EllipticError
from .grid import GridError
from .output import write_heatmap_svg, write_manifest, write_series
from .params import ModelParams, ParamError
from .regimes import (
    PScan,
    RegimeError,
    condition_report,
    finite_time_bound,
    ode_blowup_oracle,
)
from . import experiments

log = logging.getLogger("lvchemo")

DOMAIN_ERRORS = (ConfigError, ParamError, GridError, RegimeError, EllipticError, DtUnderflow, ValueError, RuntimeError)

_INT_KEYS = {"dim", "nx", "ny", "max_iter", "observe_every"}
_STR_KEYS = {"output_dir"}


def _add_config_flags(p: argparse.ArgumentParser, model_only: bool = False) -> None:
    p.add_argument("--config", type=Path, help="TOML run configuration; flags override it")
    g = p.add_argument_group("config overrides")
    for key, (section, _) in FLAT_KEYS.items():
        if model_only and section != "model":
            continue
        typ = int if key in _INT_KEYS else str if key in _STR_KEYS else float
        g.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ, default=None, metavar=section.upper())
    if not model_only:
        g.add_argument("--u0", default=None, help="initial u, e.g. 'spike:mass=1,patch_fraction=0.0625'")
        g.add_argument("--v0", default=None, help="initial v, same syntax as --u0")


def _overrides(args) -> dict:
    out = {}
    for key in FLAT_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    for key in ("u0", "v0"):
        val = getattr(args, key, None)
        if val is not None:
            out[key] = parse_initial_flag(val)
    return out


def _load_data(args) -> dict:
    data: dict = {"model": {}, "grid": {"dim": 1, "nx": 256}}
    if args.config is not None:
        try:
            data = tomllib.loads(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{args.config}: TOML parse error: {exc}") from None
    return apply_overrides(data, _overrides(args))


def _build_config(args):
    return config_from_dict(_load_data(args))


def _floats(text: str) -> list[float]:
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _outdir(cfg, args) -> Path:
    out = Path(args.out) if getattr(args, "out", None) else Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_kv(d: dict, prefix: str = "") -> None:
    for k, v in d.items():
        if isinstance(v, dict):
            _print_kv(v, f"{prefix}{k}.")
        else:
            print(f"{prefix}{k} = {v}")


# -- subcommands ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    cfg = _build_config(args)
    out = _outdir(cfg, args)
    u0, v0 = cfg.initial_fields()
    t0 = time.perf_counter()
    res = run(
        u0,
        v0,
        cfg.model,
        cfg.control,
        cfg.t_end,
        cfg.monitors.observe_every,
        p_monitor=cfg.monitors.p_monitor,
        q_monitor=cfg.monitors.q_monitor,
        elliptic=cfg.elliptic,
    )
    wall = time.perf_counter() - t0
    write_series(res, out / "series.csv")
    files = ["series.csv", "config.toml"]
    (out / "config.toml").write_text(serialize_config(cfg), encoding="utf-8")
    for name in ("u", "v", "w"):
        fname = f"final_{name}.svg"
        write_heatmap_svg(getattr(res.final, name), out / fname, args.colormap, title=f"{name} at t={res.final.t:.6g}")
        files.append(fname)
    write_manifest(
        out,
        files,
        config=cfg.to_dict(),
        termination=res.termination.value,
        wall_time=wall,
        extra={"steps": res.steps, "peak": res.peak, "t_peak": res.t_peak, "message": res.message},
    )
    print(f"termination = {res.termination.value}")
    print(f"final_time = {res.final.t!r}")
    print(f"steps = {res.steps}")
    print(f"peak_linf_sum = {res.peak!r}")
    print(f"output = {out}")
    return 0


def cmd_regimes(args) -> int:
    data = _load_data(args)
    model = data.get("model", {})
    if not args.unit_rest:
        missing = [k for k in ModelParams.__dataclass_fields__ if k not in model]
        if missing:
            raise ConfigError("missing model constants " + ", ".join(missing) + " (pass --unit-rest to default them to 1)")
    params = ModelParams(**{k: float(v) for k, v in model.items()})
    rep = condition_report(params, args.p, args.n, PScan(args.p_min, args.p_max, args.points))
    d = rep.to_dict()
    if args.json:
        print(json.dumps(d, indent=2))
        return 0
    if rep.exists_p is None:
        print("exists_p = not found")
    else:
        print(f"exists_p = found (p = {rep.exists_p[0]:.6g}, case {rep.exists_p[1]})")
    del d["exists_p"]
    _print_kv(d)
    return 0


def cmd_sweep(args) -> int:
    cfg = _build_config(args)
    out = _outdir(cfg, args)
    t0 = time.perf_counter()
    res = experiments.vanishing_diffusion_sweep(cfg, args.d_list, workers=args.workers)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("d1", "d2", "peak_density", "time_of_peak", "termination", "error"))
        for r in res.records:
            w.writerow((repr(r.d1), repr(r.d2), repr(r.peak_density), repr(r.time_of_peak), r.termination, r.error or ""))
    write_manifest(out, ["sweep.csv"], config=cfg.to_dict(), wall_time=time.perf_counter() - t0)
    print(f"{'d1':>10} {'d2':>10} {'peak':>12} {'t_peak':>10}  termination")
    for r in res.records:
        print(f"{r.d1:10.3g} {r.d2:10.3g} {r.peak_density:12.6g} {r.time_of_peak:10.4g}  {r.termination}")
    return 0


def cmd_dstar(args) -> int:
    cfg = _build_config(args)
    r = experiments.find_dstar(cfg, args.M, args.d_hi, args.d_lo, args.iters)
    for d, peak, hit in r.evaluations:
        print(f"d = {d:.6g}  peak = {peak:.6g}  {'exceeds' if hit else 'below'} M")
    if r.d_star is None:
        print(f"d_star = not found (peak stays below M={args.M:g} down to d={args.d_lo:g})")
    else:
        print(f"d_star = {r.d_star:.6g}  bracket = [{r.bracket[0]:.6g}, {r.bracket[1]:.6g}]")
    return 0


def cmd_converge(args) -> int:
    cfg = _build_config(args)
    rep = experiments.hhe_ppe_convergence(cfg, args.d_list, args.t_check)
    print(f"t_check = {rep.t_check:g}")
    print(f"{'d':>10} {'err_u':>12} {'err_v':>12} {'err_w':>12}")
    for e in rep.entries:
        note = f"  excluded: {e.reason}" if e.excluded else ""
        print(f"{e.d:10.3g} {e.err_u:12.6g} {e.err_v:12.6g} {e.err_w:12.6g}{note}")
    return 0


def cmd_blowup_bound(args) -> int:
    bound = finite_time_bound(args.a, args.b, args.d, args.kappa)
    oracle = ode_blowup_oracle(args.a, args.b, args.d, args.kappa)
    print(f"bound = {'inapplicable' if bound is None else repr(bound)}")
    print(f"oracle = {'no blow-up detected' if oracle is None else repr(oracle)}")
    return 0


def cmd_probe(args) -> int:
    cfg = _build_config(args)
    rep = experiments.blowup_probe(cfg, args.p_monitor_probe, args.threshold_fraction, args.B)
    print(f"termination = {rep.termination}")
    print(f"last_time = {rep.last_time!r}")
    print(f"peak = {rep.peak!r}  (threshold {rep.threshold:.6g})")
    print(f"conditions_hold = {rep.conditions_hold}")
    print(f"criterion_holds = {rep.criterion_holds}")
    if rep.criterion_lhs is not None:
        print(f"criterion = {rep.criterion_lhs:.6g} > {rep.criterion_rhs:.6g}")
    print(f"convex_increasing = {rep.convex_increasing}")
    print(f"mass_margin = {rep.mass_margin:.6g}")
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lvchemo", description="Finite-volume lab for two-species chemotaxis with Lotka-Volterra competition.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run one simulation and write CSV/SVG/manifest")
    _add_config_flags(p)
    p.add_argument("--out", help="output directory (default: run.output_dir)")
    p.add_argument("--colormap", default="viridis")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("regimes", parents=[common], help="evaluate the parameter-regime conditions")
    _add_config_flags(p, model_only=True)
    p.add_argument("--unit-rest", action="store_true", help="model constants not given default to 1")
    p.add_argument("-p", type=float, default=2.0, help="exponent for the pointwise check")
    p.add_argument("-n", type=int, default=None, help="space dimension for the boundedness comparison")
    p.add_argument("--p-min", type=float, default=1.001)
    p.add_argument("--p-max", type=float, default=1e4)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--json", action="store_true", help="emit JSON")
    p.set_defaults(func=cmd_regimes)

    p = sub.add_parser("sweep", parents=[common], help="peak density over a list of diffusion levels")
    _add_config_flags(p)
    p.add_argument("--d-list", type=_floats, default=[1e-1, 1e-2, 1e-3, 1e-4])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dstar", parents=[common], help="bracket the diffusion level at which the peak exceeds M")
    _add_config_flags(p)
    p.add_argument("--M", type=float, required=True)
    p.add_argument("--d-hi", type=float, default=1e-1)
    p.add_argument("--d-lo", type=float, default=1e-4)
    p.add_argument("--iters", type=int, default=6)
    p.set_defaults(func=cmd_dstar)

    p = sub.add_parser("converge", parents=[common], help="distance of diffusive runs from the d=0 run")
    _add_config_flags(p)
    p.add_argument("--d-list", type=_floats, default=[1e-1, 1e-2, 1e-3, 0.0])
    p.add_argument("--t-check", type=float, default=0.2)
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("blowup-bound", parents=[common], help="ODE comparison bound and numerical oracle")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, required=True)
    p.add_argument("--d", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.set_defaults(func=cmd_blowup_bound)

    p = sub.add_parser("probe", parents=[common], help="run the d=0 system and report concentration")
    _add_config_flags(p)
    p.add_argument("--probe-p", dest="p_monitor_probe", type=float, default=None, help="exponent (default: p_monitor)")
    p.add_argument("--threshold-fraction", type=float, default=0.1)
    p.add_argument("--B", type=float, default=1.0)
    p.set_defaults(func=cmd_probe)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse: 2 on usage error, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
