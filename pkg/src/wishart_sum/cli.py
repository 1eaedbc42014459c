"""Command-line front end: ``wishart-sum <command> [options]``.

Model configs are JSON documents::

    {"sigma2": 1.0, "terms": [{"M": 4, "N": 4, "a_db": 19.8}, ...]}
    {"sigma2": 1.0, "m": 2, "terms": [{"p": 3, "a_linear": 1.0}, ...]}

The relay command reads ``{"bc": <model>, "mac": <model>}``.  Exit status is
0 on success, 2 for invalid input and 3 when a result cannot be computed to
the required accuracy.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys

import numpy as np

from . import __version__
from ._core import PRECISION_MODES, resolve_precision
from .capacity import capacity_approx, capacity_determinantal, capacity_quadrature
from .density import build_evaluator, density_grid
from .errors import NumericalFailure, ValidationError
from .model import AntennaConfig, SumSpec, WishartTerm, compute_ps, equivalent_spec, from_antennas
from .montecarlo import McConfig, empirical_capacity, empirical_density, sample_eigenvalues, sweep_error, sweep_relay

EXIT_OK, EXIT_FAILED, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def _number(obj, key, where):
    val = obj.get(key)
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ValidationError(f"{where}: '{key}' must be a number, got {val!r}")
    return val


def _integer(obj, key, where):
    val = obj.get(key)
    if isinstance(val, bool) or not isinstance(val, int):
        raise ValidationError(f"{where}: '{key}' must be an integer, got {val!r}")
    return val


def parse_model(doc: dict, default_sigma2: float = 1.0) -> SumSpec:
    """Build a :class:`SumSpec` from the antenna or the raw config form."""
    if not isinstance(doc, dict):
        raise ValidationError("model config must be a JSON object")
    sigma2 = _number(doc, "sigma2", "config") if "sigma2" in doc else default_sigma2
    terms = doc.get("terms")
    if not isinstance(terms, list) or not terms:
        raise ValidationError("config needs a non-empty 'terms' list")
    if not all(isinstance(t, dict) for t in terms):
        raise ValidationError("each term must be a JSON object")
    antenna = [{"M", "N", "a_db"} <= set(t) for t in terms]
    raw = [{"p", "a_linear"} <= set(t) for t in terms]
    for k, t in enumerate(terms):
        if antenna[k] == raw[k]:
            raise ValidationError(f"term {k}: give exactly one of {{M, N, a_db}} or {{p, a_linear}}")
    if all(antenna):
        if "m" in doc:
            raise ValidationError("'m' is implied by the antenna counts and must not be given")
        cfgs = [AntennaConfig(_integer(t, "M", f"term {k}"), _integer(t, "N", f"term {k}"),
                              _number(t, "a_db", f"term {k}")) for k, t in enumerate(terms)]
        return from_antennas(cfgs, sigma2)
    if all(raw):
        if "m" not in doc:
            raise ValidationError("the raw form needs the matrix dimension 'm'")
        m = _integer(doc, "m", "config")
        return SumSpec(m, tuple(WishartTerm(_integer(t, "p", f"term {k}"), _number(t, "a_linear", f"term {k}"))
                                for k, t in enumerate(terms)), sigma2)
    raise ValidationError("all terms must use the same form (antenna or raw)")


def spec_to_config(spec: SumSpec) -> dict:
    """Raw-form config that :func:`parse_model` turns back into ``spec``."""
    return {"sigma2": spec.sigma2, "m": spec.m,
            "terms": [{"p": t.p, "a_linear": t.a} for t in spec.terms]}


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("config must be a JSON object")
    return doc


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.16e" % x


def render_csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(float(x)) for x in row) + "\n")
    return buf.getvalue()


def _emit(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ValidationError(f"cannot write {out}: {exc.strerror}") from exc


def _emit_json(record: dict, out: str | None):
    _emit(json.dumps(record, indent=2) + "\n", out)


def _mc_config(args) -> McConfig:
    return McConfig(realizations=args.realizations, seed=args.seed, bins=args.bins,
                    lambda_max=args.lambda_max, workers=args.workers)


def _require_spec(cfg: dict) -> SumSpec:
    if not cfg:
        raise ValidationError("this command needs --config with a model")
    return parse_model(cfg)


def _grid(lo: float, hi: float, points: int) -> np.ndarray:
    if points < 1:
        raise ValidationError("--points must be at least 1")
    if points == 1:
        return np.array([lo])
    return np.linspace(lo, hi, points)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_density(args, cfg):
    spec = _require_spec(cfg)
    ev = build_evaluator(spec, precision=args.precision)
    lam_max = args.lambda_max if args.lambda_max is not None else 4.0 * spec.mean_eigenvalue
    lam_min = 1e-6 * spec.mean_eigenvalue
    if not lam_max > lam_min:
        raise ValidationError("--lambda-max must exceed the grid start 1e-6 * sigma2 * sum(a)")
    lams = _grid(lam_min, lam_max, args.points)
    header = ["lambda", "pdf_exact"]
    cols = [lams, density_grid(ev, lams)]
    if args.approx:
        header.append("pdf_approx")
        cols.append(density_grid(build_evaluator(equivalent_spec(spec), precision=args.precision), lams))
    if args.mc:
        mc = McConfig(realizations=args.realizations, seed=args.seed, bins=args.bins,
                      lambda_max=lam_max, workers=args.workers)
        emp = empirical_density(spec, mc)
        idx = np.clip(np.searchsorted(emp.bin_edges, lams, side="right") - 1, 0, emp.heights.size - 1)
        header.append("pdf_empirical")
        cols.append(emp.heights[idx])
    _emit(render_csv(header, zip(*cols)), args.out)
    return EXIT_OK


def cmd_capacity(args, cfg):
    spec = _require_spec(cfg)
    ev = build_evaluator(spec, precision=args.precision)
    record = {}
    det = quad = None
    if args.method in ("det", "both"):
        det = capacity_determinantal(ev)
    if args.method in ("quad", "both"):
        quad = capacity_quadrature(ev)
    main = det or quad
    record["analytical_bits"] = main.bits
    record["analytical_method"] = main.method
    record["analytical_err_estimate"] = main.err_estimate
    record["approx_bits"] = capacity_approx(spec, precision=args.precision).bits
    record["p_s"] = compute_ps(spec)
    if det is not None and quad is not None:
        record["quadrature_bits"] = quad.bits
        record["method_agreement"] = abs(det.bits - quad.bits) / quad.bits
    else:
        record["method_agreement"] = None
    if args.mc:
        mc = empirical_capacity(spec, _mc_config(args))
        record["mc_bits"] = mc.bits
        record["mc_stderr"] = mc.err_estimate
        record["realizations"] = args.realizations
        record["seed"] = args.seed
    record["precision_mode"] = ev.precision_mode
    record["config_echo"] = spec_to_config(spec)
    _emit_json(record, args.out)
    return EXIT_OK


def cmd_approx(args, cfg):
    spec = _require_spec(cfg)
    eq = equivalent_spec(spec)
    res = capacity_approx(spec, precision=args.precision)
    record = {"approx_bits": res.bits, "p_s": compute_ps(spec),
              "equivalent": spec_to_config(eq), "err_estimate": res.err_estimate}
    _emit_json(record, args.out)
    return EXIT_OK


def cmd_mc(args, cfg):
    spec = _require_spec(cfg)
    mc = _mc_config(args)
    if args.out is not None:
        emp = empirical_density(spec, mc)
        rows = zip(emp.bin_edges[:-1], emp.bin_edges[1:], emp.heights)
        _emit(render_csv(["bin_left", "bin_right", "pdf_empirical"], rows), args.out)
    cap = empirical_capacity(spec, mc)
    eigs = sample_eigenvalues(spec, mc)
    record = {"mc_bits": cap.bits, "mc_stderr": cap.err_estimate, "realizations": mc.realizations,
              "seed": mc.seed, "mean_eigenvalue_mc": float(np.mean(eigs)),
              "mean_eigenvalue_theory": spec.mean_eigenvalue}
    _emit_json(record, None)
    return EXIT_OK


def parse_relay(cfg: dict) -> tuple[SumSpec, SumSpec]:
    if "bc" not in cfg or "mac" not in cfg:
        raise ValidationError("relay config needs 'bc' and 'mac' model sections")
    sigma2 = cfg.get("sigma2", 1.0)
    if isinstance(sigma2, bool) or not isinstance(sigma2, (int, float)):
        raise ValidationError("'sigma2' must be a number")
    return parse_model(cfg["bc"], sigma2), parse_model(cfg["mac"], sigma2)


def cmd_relay(args, cfg):
    if not cfg:
        raise ValidationError("relay needs --config with 'bc' and 'mac' sections")
    bc, mac = parse_relay(cfg)
    c_bc = capacity_determinantal(bc, precision=args.precision)
    c_mac = capacity_determinantal(mac, precision=args.precision)
    a_bc = capacity_approx(bc, precision=args.precision)
    a_mac = capacity_approx(mac, precision=args.precision)
    record = {"bc_bits": c_bc.bits, "mac_bits": c_mac.bits,
              "upper_bits": min(c_bc.bits, c_mac.bits),
              "upper_branch": "bc" if c_bc.bits <= c_mac.bits else "mac",
              "approx_bc_bits": a_bc.bits, "approx_mac_bits": a_mac.bits,
              "approx_upper_bits": min(a_bc.bits, a_mac.bits),
              "p_s_bc": compute_ps(bc), "p_s_mac": compute_ps(mac)}
    _emit_json(record, args.out)
    return EXIT_OK


def _geometry(cfg) -> tuple[int, int]:
    geo = cfg.get("geometry", [2, 2])
    if (not isinstance(geo, list) or len(geo) != 2
            or not all(isinstance(g, int) and not isinstance(g, bool) and g >= 1 for g in geo)):
        raise ValidationError("'geometry' must be a list [M, N] of positive integers")
    return geo[0], geo[1]


def _sweep_grid(cfg, args, lo, hi):
    if "grid" in cfg:
        grid = cfg["grid"]
        if not isinstance(grid, list) or not grid or not all(
                isinstance(x, (int, float)) and not isinstance(x, bool) for x in grid):
            raise ValidationError("'grid' must be a non-empty list of numbers")
        return [float(x) for x in grid]
    return [float(x) for x in _grid(lo, hi, args.points)]


def cmd_sweep_relay(args, cfg):
    grid = _sweep_grid(cfg, args, 0.0, 30.0)
    rows = sweep_relay(grid, _mc_config(args), geometry=_geometry(cfg))
    _emit(render_csv(["x", "value", "value2"], rows), args.out)
    return EXIT_OK


def cmd_sweep_error(args, cfg):
    grid = _sweep_grid(cfg, args, 0.0, 15.0)
    a2 = cfg.get("a2_db", 5.0)
    if isinstance(a2, bool) or not isinstance(a2, (int, float)):
        raise ValidationError("'a2_db' must be a number")
    rows = sweep_error(grid, a2_db=float(a2), geometry=_geometry(cfg))
    _emit(render_csv(["x", "value"], rows), args.out)
    return EXIT_OK


def cmd_selftest(args, cfg):
    from .acceptance import run_all

    results = run_all(echo=lambda line: print(line, flush=True))
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_FAILED


COMMANDS = {
    "density": cmd_density,
    "capacity": cmd_capacity,
    "approx": cmd_approx,
    "mc": cmd_mc,
    "relay": cmd_relay,
    "sweep-relay": cmd_sweep_relay,
    "sweep-error": cmd_sweep_error,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wishart-sum",
                                     description="Eigenvalue density and ergodic capacity of weighted "
                                                 "sums of complex Wishart matrices.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", metavar="PATH", help="JSON model or sweep config")
    parser.add_argument("--out", metavar="PATH", help="output file (default: standard output)")
    parser.add_argument("--seed", type=int, default=0, help="Monte Carlo seed (default 0)")
    parser.add_argument("--realizations", type=int, default=40_000, help="Monte Carlo draws (default 40000)")
    parser.add_argument("--bins", type=int, default=60, help="histogram bins (default 60)")
    parser.add_argument("--points", type=int, default=None, help="grid points (default 200, 31 for sweeps)")
    parser.add_argument("--lambda-max", type=float, default=None, help="upper end of the lambda grid")
    parser.add_argument("--method", choices=("det", "quad", "both"), default="det",
                        help="capacity route (default det)")
    parser.add_argument("--precision", choices=PRECISION_MODES, default=None,
                        help="arithmetic for the determinants (default: $WISHART_SUM_PRECISION or auto)")
    parser.add_argument("--approx", action="store_true", help="add the single-Wishart approximation")
    parser.add_argument("--mc", action="store_true", help="add Monte Carlo results")
    parser.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo (default 1)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.points is None:
        args.points = 31 if args.command.startswith("sweep") else 200
    try:
        args.precision = resolve_precision(args.precision)
        for name in ("realizations", "bins", "workers"):
            if getattr(args, name) < 1:
                raise ValidationError(f"--{name} must be at least 1")
        if args.seed < 0:
            raise ValidationError("--seed must be non-negative")
        if args.lambda_max is not None and not (math.isfinite(args.lambda_max) and args.lambda_max > 0):
            raise ValidationError("--lambda-max must be positive")
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
