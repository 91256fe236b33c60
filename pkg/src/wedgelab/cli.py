"""Batch experiment runner.

Every run writes one artifact directory: JSON reports, CSV tables,
gnuplot data/script files and a ``manifest.json`` that echoes the config
and lists every file with its sha256. Configs are JSON documents

    {"subcommand": "...", "params": {...}, "seed": 0}

validated against a per-subcommand schema. Parameters can also be given
directly on the command line (``wedgelab exponent --theta 1.5707963 --m 2``);
values are parsed as JSON where possible and override the config file.

Exit codes: 0 success, 2 config error, 3 numerical failure, 1 anything else.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .coeffs import CoefficientSchedule, ellipticity_constant
from .errors import ArgumentError, ConfigError, NumericalError, WedgeLabError
from .geometry import ConeGeometry

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3


# -- formatting --------------------------------------------------------------

def format_number(x):
    """Decimal (positional) notation with 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if x == 0:
            return "0"
        return np.format_float_positional(x, precision=17, unique=False, fractional=False,
                                          trim="-")
    return str(x)


def _plain(obj):
    """Recursively convert numpy scalars/arrays and tuples for json."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def dumps(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


class ArtifactWriter:
    """Single writer for one artifact directory; records every file."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files = {}

    def _write(self, name, text):
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        path.write_bytes(data)
        self.files[name] = hashlib.sha256(data).hexdigest()
        return path

    def json(self, name, obj):
        return self._write(name, dumps(obj))

    def csv(self, name, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_number(v) for v in row])
        return self._write(name, buf.getvalue())

    def dat(self, name, header, rows):
        lines = ["# " + " ".join(header)]
        lines += [" ".join(format_number(v) for v in row) for row in rows]
        return self._write(name, "\n".join(lines) + "\n")

    def gnuplot(self, name, lines):
        return self._write(name, "\n".join(lines) + "\n")

    def adopt(self, sub):
        """Take over the files of a writer for a subdirectory."""
        prefix = os.path.relpath(sub.root, self.root)
        for name, digest in sub.files.items():
            self.files[f"{prefix}/{name}"] = digest

    def manifest(self, body):
        body = dict(body)
        body["files"] = dict(sorted(self.files.items()))
        (self.root / "manifest.json").write_text(dumps(body), encoding="utf-8")
        return body


# -- schemas -------------------------------------------------------------------

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_INT = {"type": "integer", "minimum": 1}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}
_POSS = {"type": "array", "items": _POS, "minItems": 1}
_SCHEDULE = {
    "oneOf": [
        {"enum": ["heat"]},
        {"type": "object", "required": ["dimension", "layers"], "additionalProperties": False,
         "properties": {"dimension": _INT, "breakpoints": _NUMS | {"minItems": 0},
                        "layers": {"type": "array", "minItems": 1,
                                   "items": {"type": "array", "items": _NUM}}}},
    ]
}
_SECTOR = {"theta": _POS, "bisector": _NUM, "schedule": _SCHEDULE}
_GRID = {"h": _POS, "R_outer": _POS}


def _obj(required=(), **props):
    return {"type": "object", "required": list(required), "properties": props,
            "additionalProperties": False}


PARAM_SCHEMAS = {
    "exponent": _obj(["theta"], m={"enum": [2, 3]}, n=_INT, **_SECTOR),
    "simulate": _obj(["theta", "h"], case={"enum": ["x1x2", "arc_one", "zero"]},
                     horizon=_POS, dt=_POS, snapshots=_NUMS, **_SECTOR, **_GRID),
    "fit": _obj(["theta", "h"], horizon=_POS, dt=_POS, t_eval=_POSS, r_min=_POS, r_max=_POS,
                **_SECTOR, **_GRID),
    "scan-mu": _obj(["theta", "mus", "hs"], mus=_NUMS, hs=_POSS, p=_POS, q=_POS,
                    mode={"enum": ["plain", "tilde"]}, horizon=_POS, dt_factor=_POS,
                    R_outer=_POS, **_SECTOR),
    "kernel-check": _obj([], n={"enum": [2, 3]}, schedule=_SCHEDULE,
                         random_layers={"type": "integer", "minimum": 0}, samples=_INT,
                         orders={"type": "array", "items": {"type": "array"}},
                         quadrature_order=_INT),
    "barrier-check": _obj(["kind", "theta"], kind={"enum": ["stmt4", "stmt5_plus", "stmt5_minus"]},
                          nu=_POS, theta=_POS, gamma={"oneOf": [_POS, {"enum": ["star"]}]},
                          rho=_POS, n=_INT, samples=_INT, schedule=_SCHEDULE,
                          comparison={"type": "boolean"}, h=_POS, dt=_POS),
    "hardy": _obj(["theta", "h"], count=_INT, **_SECTOR, **_GRID),
    "aux-check": _obj([], alpha=_NUM, beta=_NUM, gamma=_NUM, sigma=_POS, theta=_POS,
                      bisector=_NUM, w_radii={"type": "array", "items": {"type": "number",
                                                                        "minimum": 0}},
                      w_angle=_NUM),
    "green-bound": _obj(["theta", "hs"], hs=_POSS, dt=_POS, horizon=_POS, y=_NUMS,
                        sigma=_POS, tau_min=_POS, lambda_factors=_POSS,
                        lambda_minus_factor=_POS, snapshot_every=_INT, **_SECTOR),
}
PARAM_SCHEMAS["suite"] = _obj(["runs"], runs={"type": "array", "minItems": 1, "items": {
    "type": "object", "required": ["name", "subcommand", "params"], "additionalProperties": False,
    "properties": {"name": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                   "subcommand": {"enum": sorted(PARAM_SCHEMAS)},
                   "params": {"type": "object"}}}})
SUBCOMMANDS = tuple(sorted(PARAM_SCHEMAS))

CONFIG_SCHEMA = {
    "type": "object", "required": ["subcommand", "params"], "additionalProperties": False,
    "properties": {"subcommand": {"enum": list(SUBCOMMANDS)}, "params": {"type": "object"},
                   "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                   "label": {"type": "string"}},
}


def _schema_error(errors, prefix):
    keys, lines = [], []
    for e in sorted(errors, key=lambda e: list(map(str, e.absolute_path))):
        path = ".".join([prefix] + [str(p) for p in e.absolute_path]) if prefix else \
            ".".join(str(p) for p in e.absolute_path)
        if e.validator == "required":
            missing = [k for k in e.validator_value if k not in e.instance]
            keys += [f"{path}.{k}" if path else k for k in missing]
        elif e.validator == "additionalProperties":
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            keys += [f"{path}.{k}" if path else k for k in extra]
        else:
            keys.append(path or "<root>")
        lines.append(f"{path or '<root>'}: {e.message}")
    return ConfigError("invalid config: " + "; ".join(lines), keys=sorted(set(keys)))


def validate_config(config):
    v = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = list(v.iter_errors(config))
    if errors:
        raise _schema_error(errors, "")
    params_schema = PARAM_SCHEMAS[config["subcommand"]]
    errors = list(jsonschema.Draft202012Validator(params_schema).iter_errors(config["params"]))
    if errors:
        raise _schema_error(errors, "params")
    if config["subcommand"] == "suite":
        for k, run in enumerate(config["params"]["runs"]):
            validate_config({"subcommand": run["subcommand"], "params": run["params"]})
    return config


# -- shared builders --------------------------------------------------------

def _schedule(params, n=2):
    spec = params.get("schedule", "heat")
    if spec == "heat":
        return CoefficientSchedule.heat(n)
    return CoefficientSchedule.from_dict(spec)


def _sector(params):
    return ConeGeometry.sector(params["theta"], params.get("bisector", 0.0))


def _grid(params):
    from .simulator import SectorGrid
    return SectorGrid(_sector(params), params["h"], params.get("R_outer", 1.0))


def _x1x2(points, t=None):
    return points[:, 0] * points[:, 1]


def _one(points, t=None):
    return np.ones(len(points))


def _simulate_field(params):
    from .simulator import solve_sector
    grid = _grid(params)
    case = params.get("case", "arc_one")
    horizon = params.get("horizon", 1.0)
    dt = params.get("dt", grid.h ** 2)
    snaps = params.get("snapshots", [horizon])
    kw = {"x1x2": dict(initial=_x1x2, arc_data=_x1x2), "arc_one": dict(arc_data=_one),
          "zero": {}}[case]
    if case == "x1x2":
        rays = grid._rays()
        if np.max(np.abs(_x1x2(np.concatenate([r[None, :] for r in rays])))) > 1e-12:
            raise ArgumentError("the x1x2 case needs rays on the coordinate axes")
    field = solve_sector(_schedule(params), grid, horizon=horizon, dt=dt, snapshots=snaps, **kw)
    return field, case


def _gp_loglog(title, data, using, xlabel, ylabel, extra=()):
    return [f"set title '{title}'", "set logscale xy", f"set xlabel '{xlabel}'",
            f"set ylabel '{ylabel}'", *extra, f"plot '{data}' using {using} with linespoints"]


# -- subcommands ---------------------------------------------------------------

def cmd_exponent(params, writer, seed):
    from .spectral import piecewise_lambda
    m = params.get("m", 2)
    n = max(m, params.get("n", m))
    if m == 2:
        cone = ConeGeometry.sector(params["theta"], params.get("bisector", 0.0), n=n)
    else:
        cone = ConeGeometry(m=3, theta=params["theta"], n=n)
    report = piecewise_lambda(_schedule(params, n), cone)
    writer.json("report.json", report.to_dict())
    return {"lambda_heat": report.lambda_heat, "lambda_piecewise": report.lambda_piecewise,
            "lambda_minus": report.lambda_minus}


def cmd_simulate(params, writer, seed):
    field, case = _simulate_field(params)
    grid = field.grid
    for k, (t, u) in enumerate(zip(field.times, field.values)):
        rows = zip(grid.points[:, 0], grid.points[:, 1], u)
        writer.csv(f"snapshot_{k:03d}.csv", ["node_x", "node_y", "value"], rows)
    summary = {"grid": grid.describe(), "schedule": field.schedule.to_dict(), "dt": field.dt,
               "horizon": float(field.times[-1]), "times": field.times, "case": case}
    if case == "x1x2":
        exact = _x1x2(grid.points)
        summary["max_deviation"] = float(np.max(np.abs(field.values - exact[None, :])))
    writer.json("simulation.json", summary)
    return summary


def cmd_fit(params, writer, seed):
    from .simulator import fit_exponent, shell_maxima
    from .spectral import piecewise_lambda
    params = dict(params)
    params.setdefault("case", "arc_one")
    h = params["h"]
    horizon = params.get("horizon", 1.0)
    params.setdefault("dt", h)
    t_eval = params.get("t_eval", [horizon])
    params["snapshots"] = sorted(set(t_eval))
    field, _ = _simulate_field(params)
    R = field.grid.R_outer
    window = (params.get("r_min", 4 * h), params.get("r_max", R / 4))
    fit = fit_exponent(field, window, t_eval)
    report = piecewise_lambda(field.schedule, _sector(params))
    report.fit = fit.to_dict()
    writer.json("fit.json", report.to_dict())
    radii, mx = shell_maxima(field.snapshot(fit.t_eval), field.grid.radius, h, *window)
    writer.dat("shells.dat", ["r", "max_abs_u"], zip(radii, mx))
    writer.gnuplot("shells.gp", _gp_loglog(
        f"shell maxima, fitted slope {fit.lambda_hat:.4f}", "shells.dat", "1:2", "r", "M(r)"))
    return {"lambda_hat": fit.lambda_hat, "lambda_piecewise": report.lambda_piecewise,
            "residual": fit.residual}


def cmd_scan_mu(params, writer, seed):
    from .estimates.coercivity import coercivity_scan, worst_ratios
    table = coercivity_scan(_schedule(params), _sector(params), params["mus"], params["hs"],
                            p=params.get("p", 2.0), q=params.get("q", 2.0),
                            mode=params.get("mode", "plain"), R_outer=params.get("R_outer", 1.0),
                            horizon=params.get("horizon", 0.3),
                            dt_factor=params.get("dt_factor", 0.125))
    lo, hi = table["window"]
    worst = worst_ratios(table)
    best_rows = {}
    for r in table["rows"]:
        key = (r.mu, r.h)
        if r.ratio == worst[key]:
            best_rows.setdefault(key, r)
    rows = [best_rows[k] for k in sorted(best_rows)]
    writer.csv("scan.csv", ["mu", "h", "ratio", "norm_u", "norm_f"],
               [(r.mu, r.h, r.ratio, r.norm_u, r.norm_f) for r in rows])
    writer.csv("scan_sources.csv", ["mu", "h", "source", "ratio", "norm_u", "norm_f",
                                    "inside_window"],
               [(r.mu, r.h, r.source, r.ratio, r.norm_u, r.norm_f, r.inside_window)
                for r in table["rows"]])
    growth = {}
    for mu in sorted({r.mu for r in rows}):
        # coarse to fine
        sel = sorted((r for r in rows if r.mu == mu), key=lambda r: -r.h)
        vals = [r.ratio for r in sel]
        growth[repr(float(mu))] = {"hs": [r.h for r in sel], "ratios": vals,
                                     "max_over_min": max(vals) / min(vals),
                                     "fine_over_coarse": vals[-1] / vals[0],
                                     "inside_window": bool(lo < mu < hi)}
    writer.json("scan.json", {"window": [lo, hi], "growth": growth})
    mus = sorted({r.mu for r in rows})
    for j, mu in enumerate(mus):
        writer.dat(f"scan_mu{j}.dat", ["h", "ratio"], [(r.h, r.ratio) for r in rows if r.mu == mu])
    plots = ", ".join(f"'scan_mu{j}.dat' using 1:2 with linespoints title 'mu = {mu:g}'"
                      for j, mu in enumerate(mus))
    writer.gnuplot("scan.gp", [f"set title 'coercivity ratio, window ({lo:g}, {hi:g})'",
                               "set logscale xy", "set xlabel 'h'", "set ylabel 'ratio'",
                               f"plot {plots}"])
    return {"window": [lo, hi], "growth": growth}


def _random_schedule(rng, n, layers):
    out = []
    for _ in range(layers):
        q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        out.append(q @ np.diag(rng.uniform(0.5, 2.0, n)) @ q.T)
    return CoefficientSchedule(out, np.sort(rng.uniform(0.1, 0.9, layers - 1)))


def cmd_kernel_check(params, writer, seed):
    from .errors import CertificationError
    from .kernel import SampleGrid, certify_gaussian_bound, chapman_kolmogorov_residual, mass
    n = params.get("n", 2)
    rng = np.random.default_rng(seed)
    if params.get("random_layers"):
        sch = _random_schedule(rng, n, params["random_layers"])
    else:
        sch = _schedule(params, n)
    order = params.get("quadrature_order", 32)
    rows = []
    for j in range(params.get("samples", 5)):
        x, y = rng.normal(size=n) * 0.5, rng.normal(size=n) * 0.5
        s = float(rng.uniform(-0.5, 0.0))
        r = float(rng.uniform(s + 0.05, 0.7))
        t = float(rng.uniform(r + 0.05, 1.2))
        mres = abs(mass(sch, x, t, s, order) - 1.0)
        ck = chapman_kolmogorov_residual(sch, x, y, t, r, s, order=max(order, 48))
        rows.append((j, s, r, t, mres, ck))
    writer.csv("residuals.csv", ["sample", "s", "r", "t", "mass_residual", "ck_residual"], rows)
    certs = []
    for o in params.get("orders", [[0, None, None]]):
        try:
            c = certify_gaussian_bound(sch, tuple(o), SampleGrid(seed=seed))
            certs.append(c.to_dict())
        except CertificationError as exc:
            certs.append({"order": o, "error": str(exc), "report": exc.report})
    out = {"schedule": sch.to_dict(), "max_mass_residual": max(r[4] for r in rows),
           "max_ck_residual": max(r[5] for r in rows), "certificates": certs}
    writer.json("kernel.json", out)
    return {"max_mass_residual": out["max_mass_residual"],
            "max_ck_residual": out["max_ck_residual"]}


def _barrier_comparison(spec, sch, params):
    """FD solution with unit arc data in the sector of opening 2 theta,
    compared against the barrier cylinder at the vertex."""
    from .barriers import comparison_check
    from .simulator import SectorGrid, solve_sector
    h = params.get("h", 1 / 128)
    dt = params.get("dt", h)
    grid = SectorGrid(ConeGeometry.sector(2 * spec.theta), h)
    steps = int(math.ceil(max(spec.depth, 0.5) / dt)) + 1
    horizon = steps * dt
    n0 = int(math.floor((horizon - spec.depth) / dt + 1e-9))
    snaps = [k * dt for k in range(max(n0, 0), steps + 1)]
    field = solve_sector(CoefficientSchedule(
        [a[:2, :2] for a in sch.layers], sch.breakpoints), grid, arc_data=_one,
        horizon=horizon, dt=dt, snapshots=snaps)
    return comparison_check(spec, field, horizon)


def cmd_barrier_check(params, writer, seed):
    from .barriers import (BarrierSpec, boundary_sign_check, choose_delta, gamma_star,
                           sample_cylinder, verify_supersolution)
    kind = params["kind"]
    n = params.get("n", 2)
    sch = _schedule(params, n)
    nu = params.get("nu", min(1.0, ellipticity_constant(sch)))
    theta = params["theta"]
    rho = params.get("rho", 1.0)
    g = params.get("gamma", "star")
    if kind == "stmt4":
        gamma = gamma_star(nu, theta) if g == "star" else g
        spec = BarrierSpec(kind, nu, theta, gamma, rho=rho, n=n, m=2)
        extra = {}
    else:
        gamma = 0.5 if g == "star" else g
        delta, eps, s1 = choose_delta(kind, gamma, sch, m=2)
        spec = BarrierSpec(kind, nu, 0.0, gamma, rho=rho, s=s1, n=n, m=2, delta=delta)
        extra = {"delta": delta, "epsilon": eps, "s1": s1}
    rng = np.random.default_rng(seed)
    x, t = sample_cylinder(spec, params.get("samples", 10000), rng, interior=1e-9)
    sup = verify_supersolution(spec, sch, x, t)
    signs = boundary_sign_check(spec, seed=seed)
    out = {"spec": spec.to_dict(), "supersolution": sup, "boundary": signs, **extra}
    if params.get("comparison"):
        if kind != "stmt4":
            raise ArgumentError("the FD comparison is available for stmt4 barriers")
        out["comparison"] = _barrier_comparison(spec, sch, params)
    writer.json("barrier.json", out)
    summary = {"min": sup["min"], "signs_ok": all(v["ok"] for v in signs.values())}
    if "comparison" in out:
        summary["comparison_margin"] = out["comparison"]["margin"]
    return summary


def cmd_hardy(params, writer, seed):
    from .estimates.appendix import hardy_check, hardy_passes, random_bump, sine_profile
    grid = _grid(params)
    rng = np.random.default_rng(seed)
    rows = []
    lhs, rhs = hardy_check(sine_profile(grid.sector), grid)
    rows.append(("sine", lhs, rhs, lhs / rhs, hardy_passes(lhs, rhs)))
    for j in range(params.get("count", 100)):
        lhs, rhs = hardy_check(random_bump(grid.sector, rng, grid.R_outer), grid)
        rows.append((f"bump{j:03d}", lhs, rhs, lhs / rhs if rhs > 0 else float("inf"),
                     hardy_passes(lhs, rhs)))
    writer.csv("hardy.csv", ["function", "lhs", "rhs", "ratio", "passes"], rows)
    worst = min(r[3] for r in rows)
    out = {"functions": len(rows), "all_pass": all(r[4] for r in rows), "worst_ratio": worst}
    writer.json("hardy.json", out)
    return out


def cmd_aux_check(params, writer, seed):
    from .estimates.appendix import aux_integral
    a, b, g = params.get("alpha", 0.0), params.get("beta", 0.0), params.get("gamma", 0.0)
    sigma = params.get("sigma", 1.0)
    cone = ConeGeometry.sector(params.get("theta", 0.5 * np.pi), params.get("bisector", 0.0))
    ang = params.get("w_angle", cone.bisector_angle)
    radii = params.get("w_radii", list(np.linspace(0.0, 20.0, 21)))
    rows = []
    for r in radii:
        w = r * np.array([np.cos(ang), np.sin(ang)])
        val, ratio = aux_integral(a, b, g, sigma, w, cone)
        rows.append((r, val, ratio))
    writer.csv("aux.csv", ["w_norm", "integral", "ratio"], rows)
    writer.dat("aux.dat", ["w_norm", "ratio"], [(r[0], r[2]) for r in rows])
    writer.gnuplot("aux.gp", ["set title 'auxiliary integral bound ratio'", "set xlabel '|w|'",
                              "set ylabel 'ratio'", "plot 'aux.dat' using 1:2 with linespoints"])
    out = {"max_ratio": max(r[2] for r in rows), "min_ratio": min(r[2] for r in rows),
           "alpha": a, "beta": b, "gamma": g, "sigma": sigma}
    writer.json("aux.json", out)
    return out


def cmd_green_bound(params, writer, seed):
    from .simulator import SectorGrid, discrete_green, discrete_mass, green_bound_check
    sector = _sector(params)
    sch = _schedule(params)
    lam = np.pi / sector.theta
    factors = params.get("lambda_factors", [0.9, 1.25])
    lam_minus = params.get("lambda_minus_factor", 0.9) * lam
    dt = params.get("dt", 1 / 1024)
    horizon = params.get("horizon", 0.25)
    every = params.get("snapshot_every", 8)
    steps = int(round(horizon / dt))
    snaps = [k * dt for k in range(every, steps + 1, every)]
    y = params.get("y", [0.25 * v for v in sector.orientation])
    sigma = params.get("sigma", 0.125)
    tau_min = params.get("tau_min", 16 * dt)
    rows = []
    for h in params["hs"]:
        field = discrete_green(sch, SectorGrid(sector, h), y, 0.0, steps * dt, dt, snapshots=snaps)
        mass_max = float(discrete_mass(field).max())
        for f in factors:
            rep = green_bound_check(field, f * lam, lam_minus, sigma=sigma, tau_min=tau_min)
            rows.append((h, f, rep.lambda_plus, rep.lambda_minus, rep.C, rep.sigma, rep.samples,
                         mass_max))
    writer.csv("green.csv", ["h", "factor", "lambda_plus", "lambda_minus", "C", "sigma",
                             "samples", "mass_max"], rows)
    drift = {}
    for j, f in enumerate(factors):
        cs = [r[4] for r in rows if r[1] == f]
        drift[repr(float(f))] = {"C": cs, "max_step_ratio": max(
            (b / a for a, b in zip(cs[:-1], cs[1:])), default=1.0),
            "total_growth": cs[-1] / cs[0]}
        writer.dat(f"green_f{j}.dat", ["h", "C"], [(r[0], r[4]) for r in rows if r[1] == f])
    plots = ", ".join(f"'green_f{j}.dat' using 1:2 with linespoints title 'lambda+ = {f:g} lambda_D'"
                      for j, f in enumerate(factors))
    writer.gnuplot("green.gp", ["set title 'empirical Green-function constant'", "set logscale xy",
                                "set xlabel 'h'", "set ylabel 'C'", f"plot {plots}"])
    out = {"lambda_D": lam, "drift": drift}
    writer.json("green.json", out)
    return out


def cmd_suite(params, writer, seed, threads=1):
    runs = params["runs"]
    names = [r["name"] for r in runs]
    if len(set(names)) != len(names):
        raise ConfigError("suite run names must be unique", keys=["params.runs.name"])
    seeds = np.random.SeedSequence(seed).generate_state(len(runs), dtype=np.uint64)

    def one(k):
        run = runs[k]
        sub = ArtifactWriter(writer.root / run["name"])
        summary = COMMANDS[run["subcommand"]](run["params"], sub, int(seeds[k]))
        sub.manifest({"subcommand": run["subcommand"], "params": run["params"],
                      "seed": int(seeds[k]), "summary": summary})
        return sub, summary

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(len(runs))))
    else:
        results = [one(k) for k in range(len(runs))]
    out = {}
    for run, (sub, summary) in zip(runs, results):
        writer.adopt(sub)
        writer.files[f"{run['name']}/manifest.json"] = hashlib.sha256(
            (sub.root / "manifest.json").read_bytes()).hexdigest()
        out[run["name"]] = summary
    return out


COMMANDS = {
    "exponent": cmd_exponent, "simulate": cmd_simulate, "fit": cmd_fit,
    "scan-mu": cmd_scan_mu, "kernel-check": cmd_kernel_check,
    "barrier-check": cmd_barrier_check, "hardy": cmd_hardy, "aux-check": cmd_aux_check,
    "green-bound": cmd_green_bound, "suite": cmd_suite,
}


# -- entry points ----------------------------------------------------------------

def _module_of(exc):
    tb = exc.__traceback__
    mod = None
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("wedgelab"):
            mod = name
        tb = tb.tb_next
    return mod


def run(config, out, threads=1, seed=None, record_time=False):
    """Validate ``config`` and write the artifact directory ``out``.

    Returns the manifest dict. Wall time goes into the manifest only with
    ``record_time``, so that default runs are byte-reproducible.
    """
    validate_config(config)
    seed = int(config.get("seed", 0) if seed is None else seed)
    writer = ArtifactWriter(out)
    start = time.perf_counter()
    cmd = config["subcommand"]
    if cmd == "suite":
        summary = cmd_suite(config["params"], writer, seed, threads=threads)
    else:
        summary = COMMANDS[cmd](config["params"], writer, seed)
    body = {"tool": "wedgelab", "version": __version__, "config": config, "seed": seed,
            "summary": summary}
    if record_time:
        body["wall_time_s"] = time.perf_counter() - start
    return writer.manifest(body)


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(extra):
    params, k = {}, 0
    while k < len(extra):
        key = extra[k]
        if not key.startswith("--") or len(key) == 2:
            raise ConfigError(f"unexpected argument {key!r}", keys=[key])
        key = key[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            k += 1
        elif k + 1 < len(extra):
            val = extra[k + 1]
            k += 2
        else:
            raise ConfigError(f"missing value for --{key}", keys=[key])
        params[key.replace("-", "_")] = _parse_value(val)
    return params


def build_parser():
    p = argparse.ArgumentParser(prog="wedgelab", description=__doc__.split("\n\n")[0],
                                allow_abbrev=False)
    p.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS,
                   help="experiment to run (may also come from the config)")
    p.add_argument("--config", type=Path, help="JSON experiment config")
    p.add_argument("--out", type=Path, default=Path("wedgelab_out"), help="artifact directory")
    p.add_argument("--threads", type=int, default=1, help="concurrent suite points")
    p.add_argument("--seed", type=int, default=None, help="seed (u64) for randomized sweeps")
    p.add_argument("--record-time", action="store_true", help="store wall time in the manifest")
    return p


def _error_record(exc, code, out):
    rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code,
           "module": _module_of(exc)}
    for attr in ("keys", "report", "layer"):
        if getattr(exc, attr, None) not in (None, [], {}):
            rec[attr] = getattr(exc, attr)
    text = dumps(rec)
    sys.stderr.write(text)
    if out is not None:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text, encoding="utf-8")
        except OSError:
            pass
    return code


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        if args.config is not None:
            try:
                config = json.loads(args.config.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}",
                                  keys=["--config"]) from exc
            if not isinstance(config, dict):
                raise ConfigError("config must be a JSON object", keys=["<root>"])
            if args.subcommand and isinstance(config, dict):
                if config.get("subcommand", args.subcommand) != args.subcommand:
                    raise ConfigError("subcommand on the command line disagrees with the config",
                                      keys=["subcommand"])
        else:
            if not args.subcommand:
                raise ConfigError("no subcommand and no --config given", keys=["subcommand"])
            config = {"subcommand": args.subcommand, "params": {}}
        overrides = _overrides(extra)
        if overrides:
            if "params" not in config:
                config["params"] = {}
            if isinstance(config.get("params"), dict):
                config["params"].update(overrides)
        if args.seed is not None and not (0 <= args.seed < 2 ** 64):
            raise ConfigError("--seed must be a u64", keys=["--seed"])
        if args.threads < 1:
            raise ConfigError("--threads must be positive", keys=["--threads"])
        manifest = run(config, args.out, threads=args.threads, seed=args.seed,
                       record_time=args.record_time)
    except ConfigError as exc:
        return _error_record(exc, EXIT_CONFIG, args.out)
    except ArgumentError as exc:
        return _error_record(exc, EXIT_CONFIG, args.out)
    except NumericalError as exc:
        return _error_record(exc, EXIT_NUMERICAL, args.out)
    except WedgeLabError as exc:
        return _error_record(exc, EXIT_OTHER, args.out)
    sys.stdout.write(dumps(manifest["summary"]))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
