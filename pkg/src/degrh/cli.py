"""Command line front end: ``degrh inspect|indices|solve --config cfg.json``.

Exit codes: 0 success, 1 numeric failure, 2 invalid input, 3 nonzero
closed-orbit period.  Every output file is written to a temporary name and
renamed once the whole command has succeeded.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import builtins
from .assemble import (
    AssemblyError,
    ClosedOrbit,
    PeriodError,
    Problem,
    _exclusion_mask,
    check_periods,
    prepare,
    residual_report,
    solve_full,
    solve_homogeneous,
    solve_rh,
)
from .conformal import ConformalError
from .diskrh import DiskError
from .expr import Expression, ExpressionError
from .field import FieldError, VectorField, check_condition_P, check_orbit
from .geometry import DomainSpec, GeometryError, OrbitArc, decompose
from .indexcalc import BoundaryData, IndexError_, compute_indices

log = logging.getLogger("degrh")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT, EXIT_PERIOD = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# configuration


def load_schema():
    return json.loads(resources.files("degrh").joinpath("config.schema.json").read_text())


def load_config(path):
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"schema violation at {where}: {e.message}") from e
    cfg["_base"] = str(path.resolve().parent)
    return cfg


def _file(cfg, name):
    p = Path(name)
    if not p.is_absolute():
        p = Path(cfg["_base"]) / p
    if not p.exists():
        raise ConfigError(f"referenced file does not exist: {p}")
    return p


def _expr(text, variables, what):
    try:
        return Expression(text, variables)
    except ExpressionError as e:
        raise ConfigError(f"{what}: {e}") from e


def _xy_callable(text, what):
    e = _expr(text, ("x", "y"), what)
    return lambda x, y: np.asarray(e(np.asarray(x, float), np.asarray(y, float)), dtype=complex)


def _theta_callable(text, what):
    e = _expr(text, ("theta",), what)
    return lambda t: np.asarray(e(np.asarray(t, float)), dtype=complex)


def build_problem(cfg):
    """Problem and bookkeeping from a validated config."""
    fld = cfg["field"]
    is31 = fld == "example31"
    if isinstance(fld, str):
        field = builtins.BUILTIN_FIELDS[fld]()
    else:
        field = VectorField(_xy_callable(fld["A"], "field.A"), _xy_callable(fld["B"], "field.B"))

    if "first_integral" in cfg:
        F = _xy_callable(cfg["first_integral"], "first_integral")
    elif is31:
        F = builtins.example31_first_integral
    else:
        F = None

    dom = cfg.get("domain", "example31" if is31 else None)
    if dom is None:
        raise ConfigError("a domain is required unless the field is example31")
    if dom == "example31":
        domain = builtins.example31_domain()
    elif "circle" in dom:
        c = dom["circle"]
        domain = DomainSpec.circle(tuple(c["center"]), float(c["radius"]), t0=dom.get("t0", 0.0))
    else:
        domain = DomainSpec.from_samples(np.loadtxt(_file(cfg, dom["file"])), t0=dom.get("t0", 0.0))

    orb = cfg.get("orbits", "example31" if is31 else [])
    if orb == "example31":
        orbits = builtins.example31_orbits()
    else:
        orbits = []
        for o in orb:
            if "segment" in o:
                orbits.append(OrbitArc.segment(o["id"], *o["segment"]))
            elif "points" in o:
                orbits.append(OrbitArc.from_polyline(o["id"], o["points"]))
            else:
                orbits.append(OrbitArc.from_polyline(o["id"], np.loadtxt(_file(cfg, o["file"]))))

    closed = []
    for k, co in enumerate(cfg.get("closed_orbits", [])):
        ex = _expr(co["x"], ("s",), f"closed_orbits[{k}].x")
        ey = _expr(co["y"], ("s",), f"closed_orbits[{k}].y")

        def curve(s, ex=ex, ey=ey):
            s = np.asarray(s, float)
            return np.stack([np.real(ex(s)), np.real(ey(s))])

        closed.append(ClosedOrbit(curve, tuple(co.get("s_range", (0.0, 2 * math.pi))), co.get("id", k)))

    lam = _theta_callable(cfg.get("Lambda", "1"), "Lambda")
    phi = _theta_callable(cfg["phi"], "phi") if "phi" in cfg else None
    f = _xy_callable(cfg["f"], "f") if "f" in cfg else None
    num = cfg.get("numerics", {})
    norm = {int(k): v for k, v in num.get("normalization", {}).items()} or None
    return Problem(
        field, F, domain, orbits, lam, phi, f,
        closed_orbits=closed,
        normalization=norm,
        n_nodes=int(num.get("M", 4096)),
        pompeiu_theta=int(num.get("pompeiu_theta", 64)),
        pompeiu_depth=int(num.get("pompeiu_depth", 6)),
    )


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return "%.12e" % x


def to_json(obj, indent=0):
    """JSON text with fixed key order (as given) and %.12e floats."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return to_json({"re": float(np.real(obj)), "im": float(np.imag(obj))}, indent)
    if isinstance(obj, (float, np.floating)):
        return _fmt(obj)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


class Outputs:
    """Collects files in a temporary directory and moves them in place on commit."""

    def __init__(self, out_dir):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=".degrh-", dir=self.dir))
        self.names = []

    def write(self, name, text):
        (self.tmp / name).write_text(text)
        self.names.append(name)

    def commit(self):
        for n in self.names:
            os.replace(self.tmp / n, self.dir / n)
        self.discard()

    def discard(self):
        for p in self.tmp.iterdir():
            p.unlink()
        self.tmp.rmdir()


# ---------------------------------------------------------------------------
# commands


def _decomposition(problem):
    return decompose(problem.domain, problem.orbits)


def _condition_P(problem, dec):
    samples = {c.id: dec.sample_interior(c.id, n=40) for c in dec.components}
    return check_condition_P(problem.field, samples)


def cmd_inspect(cfg, out):
    pr = build_problem(cfg)
    dec = _decomposition(pr)
    orbit_rows = []
    for o in dec.orbits:
        rep = check_orbit(pr.field, lambda s, a=o.arc: a.point(s).T)
        orbit_rows.append({"id": o.arc.id, "t_start": o.arc.t_start, "t_end": o.arc.t_end,
                           "components": list(o.components), **rep.to_dict()})
    condP = _condition_P(pr, dec)
    report = {
        "command": "inspect",
        "field": getattr(pr.field, "name", "L"),
        "domain": {"kind": pr.domain.kind, "diameter": pr.domain.diameter, "t0": pr.domain.t0},
        "components": [
            {"id": c.id, "orientation": c.orientation, "orbits": [dec.orbits[r.orbit].arc.id for r in c.orbit_refs]}
            for c in dec.components
        ],
        "orbits": orbit_rows,
        "orbits_verified": all(r["pass"] for r in orbit_rows),
        "condition_P": condP.to_dict(),
        "euler_characteristic": dec.euler_characteristic(),
    }
    out.write("inspect.json", to_json(report) + "\n")
    return report


def _require_P(pr, dec):
    rep = _condition_P(pr, dec)
    if not rep.verdict:
        raise ConfigError("condition (P) fails: theta changes sign inside a component")


def cmd_indices(cfg, out):
    pr = build_problem(cfg)
    dec = _decomposition(pr)
    _require_P(pr, dec)
    idx = compute_indices(dec, BoundaryData(pr.Lambda, pr.phi))
    report = {"command": "indices", **idx.to_dict()}
    out.write("indices.json", to_json(report) + "\n")
    return report


def _grid(cfg, ctx, sols, out, stem):
    g = cfg.get("numerics", {}).get("grid", {})
    nx, ny = int(g.get("nx", 41)), int(g.get("ny", 41))
    dom = ctx.dec.domain
    lo, hi = dom.samples.min(0), dom.samples.max(0)
    X, Y = np.meshgrid(np.linspace(lo[0], hi[0], nx), np.linspace(lo[1], hi[1], ny))
    pts = np.stack([X.ravel(), Y.ravel()], -1)
    inside = dom.contains(pts)
    names = []
    for k, sol in enumerate(sols):
        # mask: 0 usable, 1 outside the domain, 2 inside an orbit or pole exclusion zone
        mask = np.where(inside, 0, 1)
        keep = _exclusion_mask(ctx, pts, sol)
        mask = np.where(inside & ~keep, 2, mask)
        u = np.full(len(pts), complex(np.nan, np.nan))
        if np.any(inside):
            u[inside] = sol.evaluate(pts[inside, 0], pts[inside, 1])
        lines = ["x,y,re_u,im_u,mask"]
        for (x, y), val, m in zip(pts, u, mask):
            lines.append(f"{_fmt(x)},{_fmt(y)},{_fmt(val.real)},{_fmt(val.imag)},{int(m)}".replace("null", "nan"))
        name = f"{stem}_{k + 1}.csv" if len(sols) > 1 or stem == "basis" else f"{stem}.csv"
        out.write(name, "\n".join(lines) + "\n")
        names.append(name)
    return names


def _orbit_rows(sol):
    rows = []
    for r in sol.orbit_values:
        row = {"orbit": r["orbit"], "alpha": r["alpha"], "q": r["q"], "value": r["value"],
               "glue_error": r["glue_error"]}
        if "closed_form" in r:
            row.update(closed_form=r["closed_form"], sign=r["sign"], sign_predicted=r["sign_predicted"],
                       closed_form_error=r["closed_form_error"])
        row["limits"] = [{"component": s["component"], "limit": s["limit"], "radial": s["radial"]} for s in r["sides"]]
        rows.append(row)
    return rows


def cmd_solve(cfg, out, mode):
    pr = build_problem(cfg)
    num = cfg.get("numerics", {})
    n_grid = int(num.get("residual_grid", 21))
    n_bdry = int(num.get("residual_boundary", 360))
    if mode == "full":
        periods = check_periods(pr)  # raises PeriodError
    else:
        periods = []
    if pr.F is None:
        raise ConfigError("a first_integral expression is required for solving")
    dec = _decomposition(pr)
    _require_P(pr, dec)
    ctx = prepare(pr)
    report = {"command": "solve", "mode": mode, "M": pr.n_nodes, "indices": ctx.indices.to_dict()}
    if mode == "homogeneous":
        basis = solve_homogeneous(ctx)
        report["solution_count"] = len(basis)
        report["solution_count_predicted"] = ctx.indices.r_homogeneous
        report["basis"] = []
        for b in basis:
            res = residual_report(b, n_grid=n_grid, n_boundary=n_bdry)
            report["basis"].append({"label": b.label, "residuals": res})
        report["grids"] = _grid(cfg, ctx, basis, out, "basis")
    else:
        sol = solve_rh(ctx) if mode == "rh" else solve_full(ctx)
        report["periods"] = periods
        report["orbit_values"] = _orbit_rows(sol)
        report["poles"] = sol.poles
        report["moment_residuals"] = {str(k): list(np.atleast_1d(v)) for k, v in sol.moments.items()}
        report["free_parameters"] = {str(k): (list(v) if v is not None else []) for k, v in sol.params.items()}
        if mode == "full":
            report["density"] = {str(k): v for k, v in getattr(sol, "density_stats", {}).items()}
        report["residuals"] = residual_report(sol, n_grid=n_grid, n_boundary=n_bdry)
        report["grids"] = _grid(cfg, ctx, [sol], out, "solution")
    out.write("solve.json", to_json(report) + "\n")
    return report


# ---------------------------------------------------------------------------
# entry point

INPUT_ERRORS = (ConfigError, ExpressionError, GeometryError, FieldError, IndexError_, jsonschema.ValidationError)
NUMERIC_ERRORS = (AssemblyError, DiskError, ConformalError, FloatingPointError, np.linalg.LinAlgError)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="degrh", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["inspect", "indices", "solve"])
    ap.add_argument("--config", required=True)
    ap.add_argument("--mode", choices=["homogeneous", "rh", "full"], default="rh")
    ap.add_argument("--out", default=None)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"degrh: {e}", file=sys.stderr)
        return EXIT_INPUT
    out_dir = args.out or cfg.get("outputs", {}).get("dir") or "."
    out = Outputs(out_dir)
    try:
        if args.command == "inspect":
            cmd_inspect(cfg, out)
        elif args.command == "indices":
            cmd_indices(cfg, out)
        else:
            cmd_solve(cfg, out, args.mode)
    except PeriodError as e:
        out.discard()
        print(f"degrh: {e} (the zero-period condition is required for Lu = f to be solvable)", file=sys.stderr)
        return EXIT_PERIOD
    except INPUT_ERRORS as e:
        out.discard()
        print(f"degrh: invalid input: {e}", file=sys.stderr)
        return EXIT_INPUT
    except NUMERIC_ERRORS as e:
        out.discard()
        print(f"degrh: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception:
        out.discard()
        raise
    out.commit()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
