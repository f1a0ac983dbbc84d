"""Command line entry point: crlab <subcommand> [options]."""
from __future__ import annotations

import argparse
import configparser
import json
import sys
from typing import Optional, Sequence

import numpy as np

from . import asymptotics as asy
from .catalog import EXPECTED, HEX_LATTICE, HEX_TORUS_AREA, make_chart
from .functionals import CrVolumeConfig, balance_point, cr_volume, energies, lambda1_flat_torus
from .immersion import (beta_curl, fundamental_data, horizontality_residual, sample_interior,
                        scalar_curvature_residual)
from .integration import build_grid, volume
from .moebius import normalize_at_point

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL, EXIT_INVARIANT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InvariantViolation(Exception):
    def __init__(self, report: dict):
        super().__init__("invariant violation")
        self.report = report


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list:
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}")


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# dest -> (type, default); config files may set any of these
OPTIONS = {
    "chart": (str, None), "m": (int, None), "n": (int, 2), "b": (_floats, None), "res": (int, None),
    "seed": (int, 0), "out": (str, None), "genus": (int, None), "amplitude": (float, 0.1), "mode": (int, 1),
    "u": (_floats, None), "starts": (int, 8), "corrected": (_bool, True), "cases": (int, 50),
    "samples": (int, 10**6), "t_min": (float, 1e-4), "t_max": (float, 1e-2), "count": (int, 12),
    "csv": (str, None), "input": (str, None), "extended": (_bool, True), "lattice": (str, "hex"),
    "basis": (_floats, None), "area": (float, None),
}


def _add(p: argparse.ArgumentParser, *names: str) -> None:
    for name in names:
        typ = OPTIONS[name][0]
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crlab", description="Horizontal submanifolds of the CR sphere.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = ("chart", "m", "n", "b", "res", "seed", "out", "amplitude", "mode")

    def cmd(name, *extra):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None)
        _add(p, *common, *extra)
        return p

    cmd("volume")
    cmd("energies", "genus")
    cmd("cr-volume", "starts")
    cmd("balance")
    cmd("normalize", "u", "corrected")
    a = sub.add_parser("asymptotics")
    asub = a.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name in ("scan", "fit"):
        p = asub.add_parser(name)
        p.add_argument("--config", default=None)
        _add(p, *common, "u", "t_min", "t_max", "count", "csv", "input", "extended")
    v = sub.add_parser("verify")
    vsub = v.add_subparsers(dest="action", required=True, parser_class=_Parser)
    for name in ("identities", "appendix", "sextic"):
        p = vsub.add_parser(name)
        p.add_argument("--config", default=None)
        _add(p, "seed", "out", "cases", "samples", "m")
    cmd("lambda1", "lattice", "basis", "area")
    return parser


def load_config(path: str) -> dict:
    """Flat key = value file; '#' comments; keys use the long option names."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            cp.read_string("[crlab]\n" + fh.read())
    except (OSError, configparser.Error) as exc:
        raise UsageError(f"cannot read config {path!r}: {exc}")
    return {k.replace("-", "_"): v for k, v in cp["crlab"].items()}


def resolve(args: argparse.Namespace) -> dict:
    """Flags override config keys, which override defaults."""
    conf = load_config(args.config) if getattr(args, "config", None) else {}
    opts = {}
    for name, (typ, default) in OPTIONS.items():
        flag = getattr(args, name, None)
        if flag is not None:
            opts[name] = flag
        elif name in conf:
            try:
                opts[name] = typ(conf[name])
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"config key {name}: {exc}")
        else:
            opts[name] = default
    unknown = set(conf) - set(OPTIONS)
    if unknown:
        raise UsageError(f"unknown config keys: {sorted(unknown)}")
    return opts


def chart_from(opts: dict, default: str = "geodesic_sphere"):
    name = opts["chart"] or default
    if name in ("geodesic_sphere",):
        params = {"m": opts["m"] or 2, "n": opts["n"]}
    elif name == "whitney_sphere":
        params = {"m": opts["m"] or 2, "n": opts["n"], "b": opts["b"]}
    elif name == "horizontal_circle":
        params = {"n": opts["n"] if opts["n"] else 1}
    elif name == "perturbed_torus":
        params = {"amplitude": opts["amplitude"], "mode": opts["mode"]}
    else:
        params = {}
    try:
        return make_chart(name, **params), {"chart": name, **params}
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc))


def _grid(chart, opts):
    try:
        return build_grid(chart, opts["res"])
    except ValueError as exc:
        raise UsageError(str(exc))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    return x


# ---------------------------------------------------------------- commands

def _volume(opts):
    chart, params = chart_from(opts)
    grid = _grid(chart, opts)
    return {"parameters": {**params, "resolution": list(grid.resolution)}, "volume": volume(chart, grid)}


def _energies(opts):
    chart, params = chart_from(opts)
    grid = _grid(chart, opts)
    genus = opts["genus"] if opts["genus"] is not None else EXPECTED.get(params["chart"], {}).get("genus")
    rep = energies(chart, grid, genus)
    return {"parameters": {**params, "resolution": list(grid.resolution), "genus": genus}, "energies": rep.as_dict()}


def _cr_volume(opts):
    chart, params = chart_from(opts)
    grid = _grid(chart, opts)
    cfg = CrVolumeConfig(seed=opts["seed"], random_starts=opts["starts"])
    res = cr_volume(chart, grid, cfg)
    return {"parameters": {**params, "resolution": list(grid.resolution), "optimizer": dict(cfg.__dict__)},
            "cr_volume": res.as_dict()}


def _balance(opts):
    chart, params = chart_from(opts)
    grid = _grid(chart, opts)
    res = balance_point(chart, grid)
    return {"parameters": {**params, "resolution": list(grid.resolution), "tol": 1e-8, "damping": 0.5},
            "balance": {"b": res.b, "residual": res.residual, "iterations": res.iterations, "method": res.method}}


def _normalize(opts):
    chart, params = chart_from(opts)
    u = np.array(opts["u"]) if opts["u"] else sample_interior(chart, 1, opts["seed"])[0]
    if len(u) != chart.m:
        raise UsageError(f"--u needs {chart.m} parameters")
    factors, rep = normalize_at_point(chart, u, corrected=opts["corrected"])
    return {"parameters": {**params, "u": u, "seed": opts["seed"], "corrected": opts["corrected"]},
            "normalization": rep.as_dict(),
            "factors": [{"A": a, "b": b} for a, b in factors]}


def _asymptotics(action, opts):
    chart, params = chart_from(opts, "hexagonal_torus")
    if action == "fit":
        if not opts["input"]:
            raise UsageError("asymptotics fit needs --input CSV")
        data = np.genfromtxt(opts["input"], delimiter=",", names=True)
        t, vals = np.atleast_1d(data["t"]), np.atleast_1d(data["value"])
        coef, resid = asy.fit_expansion(t, vals, chart.m, opts["extended"])
        return {"parameters": {"m": chart.m, "input": opts["input"], "extended": opts["extended"]},
                "fit": {"basis": asy.expansion_basis(chart.m, opts["extended"]), "coefficients": coef,
                        "residual_norm": resid}}
    u = np.array(opts["u"]) if opts["u"] else sample_interior(chart, 1, opts["seed"])[0]
    t = np.logspace(np.log10(opts["t_max"]), np.log10(opts["t_min"]), opts["count"])
    fit = asy.degeneration_scan(chart, u, t, extended=opts["extended"])
    if opts["csv"]:
        asy.write_scan_csv(opts["csv"], fit)
    alpha = float(asy.alpha_coefficient(fundamental_data(chart, u)))
    if not fit.converged:
        raise RuntimeError("degeneration quadrature did not converge at the resolution cap")
    return {"parameters": {**params, "u": u, "seed": opts["seed"], "t": t, "extended": opts["extended"]},
            "fit": {"basis": fit.basis, "coefficients": fit.coefficients, "residual_norm": fit.residual_norm,
                    "resolutions": fit.resolutions, "values": fit.values},
            "alpha": alpha, "predicted_c1": asy.predicted_c1(alpha, chart.m),
            "sphere_volume": asy.sphere_area(chart.m)}


def identity_checks(seed: int = 0, count: int = 5) -> list:
    """(name, value, tolerance) for the catalog table and pointwise curvature identities."""
    out = []
    charts = {
        "geodesic_sphere": make_chart("geodesic_sphere"),
        "whitney_sphere": make_chart("whitney_sphere", b=[0.4, 0, 0, 0.2, 0, 0]),
        "hexagonal_torus": make_chart("hexagonal_torus"),
        "horizontal_circle": make_chart("horizontal_circle"),
        "perturbed_torus": make_chart("perturbed_torus"),
    }
    for name, chart in charts.items():
        exp = EXPECTED[name]
        grid = build_grid(chart)
        rep = energies(chart, grid, exp.get("genus")) if chart.m == 2 else None
        for key in ("volume", "W_CR"):
            if key in exp:
                got = volume(chart, grid) if key == "volume" else rep.W_CR
                out.append((f"{name}.{key}", abs(got - exp[key]), 1e-8 * exp[key]))
        if rep is not None:
            out.append((f"{name}.gauss_bonnet", abs(rep.gauss_bonnet_residual), 1e-4))
        u = sample_interior(chart, count, seed)
        out.append((f"{name}.horizontality", horizontality_residual(chart, u), 1e-8))
        d = fundamental_data(chart, u)
        m = chart.m
        out.append((f"{name}.A_T", float(np.max(np.abs(d.A_T))), 1e-8))
        out.append((f"{name}.H_T", float(np.max(np.abs(d.H_T))), 1e-8))
        sym = max(float(np.max(np.abs(d.sigma - np.transpose(d.sigma, p))))
                  for p in [(0, 2, 1, 3), (0, 1, 3, 2), (0, 3, 2, 1)])
        out.append((f"{name}.sigma_symmetry", sym, 1e-8))
        uah = d.norm2("U") - (d.norm2("A_N") - 3 * d.norm2("H_N") / (m + 2))
        out.append((f"{name}.U_A_H", float(np.max(np.abs(uah))), 1e-8))
        if m == 2:
            out.append((f"{name}.beta_closed", max(abs(beta_curl(chart, x)) for x in u), 1e-6))
            out.append((f"{name}.scalar_curvature", max(abs(scalar_curvature_residual(chart, x)) for x in u), 1e-6))
    return out


def _verify(action, opts):
    seed = opts["seed"]
    if action == "identities":
        checks = identity_checks(seed)
    elif action == "appendix":
        from scipy.integrate import quad
        rng = np.random.default_rng(seed)
        checks = []
        for i in range(opts["cases"]):
            k, l = int(rng.integers(1, 9)), int(rng.integers(1, 9))
            tau, a = float(10 ** rng.uniform(1, 4)), float(rng.uniform(0.3, 1.0))
            brk = [x for x in (1 / np.sqrt(tau), 10 / np.sqrt(tau)) if x < a]
            ref = quad(lambda r: r ** (l - 1) / (1 + tau * r * r) ** k, 0, a, points=brk or None,
                       epsabs=0, epsrel=1e-13, limit=200)[0]
            checks.append((f"J[{k},{l}]({tau:.6g};{a:.6g})", abs(asy.j_integral(k, l, tau, a) / ref - 1), 1e-10))
            t, eps = float(10 ** rng.uniform(-4, -0.5)), float(rng.uniform(0.05, 0.9))
            top = 1 - eps
            brk = [x for x in (t, 10 * t) if x < top]
            # u = 1 - x puts the endpoint singularity at 0
            ref = quad(lambda v: v ** (l / 2 - 1) / (t + (1 - t) * v) ** k, 0, top, points=brk or None,
                       epsabs=0, epsrel=1e-13, limit=200)[0]
            checks.append((f"I[{k},{l}]({t:.6g};{eps:.6g})", abs(asy.i_integral(k, l, t, eps) / ref - 1), 1e-10))
        for k in range(2, 7):
            for l in range(3, 2 * k):
                r1, r2 = asy.c_recursion_residuals(k, l)
                checks.append((f"C[{k},{l}] difference recursion", r1, 1e-9))
                checks.append((f"C[{k},{l}] ratio recursion", r2, 1e-9))
        checks.append(("C[3,4] = 1/2", abs(asy.c_coefficient(3, 4) - 0.5), 1e-8))
        checks.append(("C[4,7]/C[4,5] = 5", abs(asy.c_coefficient(4, 7) / asy.c_coefficient(4, 5) - 5), 1e-6))
    else:
        checks = []
        ms = [opts["m"]] if opts["m"] else [1, 2, 3, 4, 5]
        for m in ms:
            c = asy.random_symmetric_cubic(m, seed + m)
            r = asy.sextic_identity_residual(c, samples=opts["samples"], seed=seed)
            tol = 1e-10 if r.method == "quadrature" else 3 * r.stderr
            checks.append((f"sextic m={m} ({r.method})", abs(r.residual), tol))
    rows = [{"name": n, "value": float(v), "tolerance": float(t), "ok": bool(v <= t)} for n, v, t in checks]
    report = {"parameters": {"action": action, "seed": seed, "cases": opts["cases"], "samples": opts["samples"]},
              "checks": rows, "passed": sum(r["ok"] for r in rows), "failed": sum(not r["ok"] for r in rows)}
    if report["failed"]:
        raise InvariantViolation(report)
    return report


def _lambda1(opts):
    if opts["basis"]:
        v = opts["basis"]
        if len(v) != 4:
            raise UsageError("--basis takes v1x,v1y,v2x,v2y")
        basis = np.array(v).reshape(2, 2)
    elif opts["lattice"] == "hex":
        basis = HEX_LATTICE.copy()
    elif opts["lattice"] == "square":
        basis = np.eye(2)
    else:
        raise UsageError("--lattice is hex or square")
    if opts["area"]:
        basis = basis * np.sqrt(opts["area"] / abs(np.linalg.det(basis)))
    try:
        lam = lambda1_flat_torus(*basis)
    except ValueError as exc:
        raise UsageError(str(exc))
    area = abs(np.linalg.det(basis))
    return {"parameters": {"basis": basis, "area": area}, "lambda1": lam, "half_lambda1_area": 0.5 * lam * area}


def _summary(command: str, report: dict) -> str:
    lines = [f"crlab {command}"]

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                walk(f"{prefix}{k}.", obj[k])
        elif isinstance(obj, list) and obj and isinstance(obj[0], dict):
            for i, row in enumerate(obj):
                walk(f"{prefix}{i}.", row)
        else:
            lines.append(f"  {prefix[:-1]} = {obj}")

    walk("", {k: v for k, v in report.items() if k not in ("factors", "checks")})
    for row in report.get("checks", []):
        flag = "PASS" if row["ok"] else "FAIL"
        lines.append(f"  {flag}  {row['name']}: {row['value']:.3e} (tol {row['tolerance']:.1e})")
    return "\n".join(lines)


def run_command(argv: Optional[Sequence[str]] = None) -> tuple:
    """Parse and run; returns (exit code, report dict or None)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return (EXIT_OK if exc.code == 0 else EXIT_USAGE), None
    command = args.command + (f" {args.action}" if getattr(args, "action", None) else "")
    code, report = EXIT_OK, None
    try:
        opts = resolve(args)
        if args.command == "volume":
            report = _volume(opts)
        elif args.command == "energies":
            report = _energies(opts)
        elif args.command == "cr-volume":
            report = _cr_volume(opts)
        elif args.command == "balance":
            report = _balance(opts)
        elif args.command == "normalize":
            report = _normalize(opts)
        elif args.command == "asymptotics":
            report = _asymptotics(args.action, opts)
        elif args.command == "verify":
            report = _verify(args.action, opts)
        else:
            report = _lambda1(opts)
    except UsageError as exc:
        print(f"crlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE, None
    except InvariantViolation as exc:
        code, report = EXIT_INVARIANT, exc.report
    except (RuntimeError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"crlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL, None
    report = _jsonable({"command": command, **report, "exit_code": code})
    print(_summary(command, report))
    if opts.get("out"):
        with open(opts["out"], "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return code, report


def main(argv: Optional[Sequence[str]] = None) -> int:
    return run_command(argv)[0]


if __name__ == "__main__":
    sys.exit(main())
