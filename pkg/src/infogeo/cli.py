"""Command line experiment runner.

One job per invocation::

    infogeo project --config job.json
    infogeo fisher --config job.json --grid theta=0.1:0.9:9 --format csv
    infogeo check constancy --config curved.json --threshold 1e-5

Exit codes: 0 success, 2 invalid configuration, 3 numeric or solver failure
(a partial report is still written).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import json
import os
import sys
import tempfile
import time
import warnings

import jsonschema
import numpy as np

from . import __version__
from .catalog import BUILTIN_CONFIGS
from .core import MANIFOLD_KINDS, BuiltinManifoldSpec, Distribution, make_manifold
from .divergences import generator_names, get_generator
from .errors import ConfigError, ContractError, InfogeoError, NumericError
from .expfam import (CONSTANCY_THRESHOLD, PYTHAGOREAN_TOL, RANK_TOL, SECOND_DERIV_TOL,
                     check_affine_logmap, check_fiber_constancy, check_pythagorean,
                     check_second_derivative_criterion)
from .fibers import DEFAULT_RADIUS, fiber_description, sample_fiber
from .fisher import fisher_bregman, fisher_numeric, identity_reparam, linear_reparam, logit_reparam
from .projection import DEFAULT_SEED, SolverOptions, model_divergence, project

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["generator", "manifold"],
    "additionalProperties": False,
    "properties": {
        "generator": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {"kind": {"type": "string"}, "q": {"type": "number", "minimum": 0}},
        },
        "manifold": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": list(MANIFOLD_KINDS)},
                "n": {"type": "integer", "minimum": 2},
                "questions": _matrix,
                "q": {"type": "number", "minimum": 0},
                "coefficients": _matrix,
                "lower": _vector,
                "upper": _vector,
            },
        },
        "x": _vector,
        "theta": _vector,
        "eta": {"oneOf": [_vector, _matrix]},
        "grid": {"oneOf": [{"type": "integer", "minimum": 1}, _matrix, {"type": "string"}]},
        "cross_check": {"type": "boolean"},
        "reparam": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {"kind": {"enum": ["identity", "linear", "logit"]},
                           "matrix": _matrix, "offset": _vector},
        },
        "pairs": {"type": "array", "items": {"type": "array", "items": {"type": "integer"},
                                             "minItems": 2, "maxItems": 2}},
        "seed": {"type": "integer", "minimum": 0},
        "sampler": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n_samples": {"type": "integer", "minimum": 1},
                           "radius": {"type": "number", "exclusiveMinimum": 0},
                           "seed": {"type": "integer", "minimum": 0}},
        },
        "solver": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"tol_grad": {"type": "number", "exclusiveMinimum": 0},
                           "max_iter": {"type": "integer", "minimum": 1},
                           "n_starts": {"type": "integer", "minimum": 1},
                           "seed": {"type": "integer", "minimum": 0},
                           "agree_tol": {"type": "number", "exclusiveMinimum": 0},
                           "method": {"enum": ["newton", "gradient"]},
                           "armijo": {"type": "number"},
                           "shrink": {"type": "number"},
                           "max_backtrack": {"type": "integer", "minimum": 1}},
        },
        "thresholds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0}
                           for k in ("constancy", "pythagorean", "rank_tol", "second_deriv")},
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string"}, "format": {"enum": ["json", "csv"]}},
        },
    },
}

COMMANDS = ["project", "fisher", "model-div", "fiber-sample", "check constancy", "check pythagorean",
            "check affine", "check second-deriv", "catalog"]
_THRESHOLD_KEY = {"check constancy": "constancy", "check pythagorean": "pythagorean",
                  "check affine": "rank_tol", "check second-deriv": "second_deriv"}


class _PartialFailure(Exception):
    def __init__(self, error, partial):
        super().__init__(str(error))
        self.error = error
        self.partial = partial


# configuration -----------------------------------------------------------------

def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def validate_config(cfg: dict) -> None:
    errors = sorted(jsonschema.Draft202012Validator(CONFIG_SCHEMA).iter_errors(cfg), key=lambda e: list(e.path))
    if errors:
        lines = [f"  at {'/'.join(map(str, e.path)) or '<root>'}: {e.message}" for e in errors]
        raise ConfigError("invalid configuration:\n" + "\n".join(lines))


def parse_grid(text: str) -> np.ndarray:
    """``theta=a:b:n[,c:d:m]`` -> cartesian product of linspace ranges."""
    _, _, spec = text.partition("=") if "=" in text else ("", "", text)
    axes = []
    for part in spec.split(","):
        try:
            a, b, n = part.split(":")
            axes.append(np.linspace(float(a), float(b), int(n)))
        except ValueError:
            raise ConfigError(f"grid {text!r}: expected name=start:stop:count[,start:stop:count]") from None
    return np.array(list(itertools.product(*axes)))


def resolve_config(cfg: dict, command: str, args) -> dict:
    """Apply command-line overrides and fill every default into a copy of ``cfg``."""
    validate_config(cfg)
    cfg = copy.deepcopy(cfg)
    if getattr(args, "seed", None) is not None:
        cfg["seed"] = args.seed
        for block in ("sampler", "solver"):
            cfg.setdefault(block, {})["seed"] = args.seed
    seed = cfg.setdefault("seed", DEFAULT_SEED)
    sampler = cfg.setdefault("sampler", {})
    sampler.setdefault("n_samples", 100)
    sampler.setdefault("radius", DEFAULT_RADIUS)
    sampler.setdefault("seed", seed)
    solver = SolverOptions.from_dict({"seed": seed, **cfg.get("solver", {})})
    cfg["solver"] = solver.to_dict()
    th = cfg.setdefault("thresholds", {})
    th.setdefault("constancy", CONSTANCY_THRESHOLD)
    th.setdefault("pythagorean", PYTHAGOREAN_TOL)
    th.setdefault("rank_tol", RANK_TOL)
    th.setdefault("second_deriv", SECOND_DERIV_TOL)
    if getattr(args, "threshold", None) is not None and command in _THRESHOLD_KEY:
        th[_THRESHOLD_KEY[command]] = args.threshold
    if getattr(args, "grid", None) is not None:
        g = args.grid
        cfg["grid"] = int(g) if g.isdigit() else parse_grid(g).tolist()
    elif isinstance(cfg.get("grid"), str):
        cfg["grid"] = parse_grid(cfg["grid"]).tolist()
    if command == "check affine":
        cfg.setdefault("grid", 12)
    out = cfg.setdefault("output", {})
    if getattr(args, "out", None):
        out["path"] = args.out
    if getattr(args, "format", None):
        out["format"] = args.format
    out.setdefault("format", "json")
    validate_config(cfg)
    return cfg


def build_objects(cfg: dict):
    g = cfg["generator"]
    try:
        gen = get_generator(g["kind"], g.get("q"))
        manifold = make_manifold(BuiltinManifoldSpec.from_dict(cfg["manifold"]))
    except ContractError as exc:
        raise ConfigError(str(exc)) from None
    n, d = manifold.n, manifold.param_dim
    if cfg["manifold"].get("n") is None:
        cfg["manifold"]["n"] = n
    if "x" in cfg and len(cfg["x"]) != n:
        raise ConfigError(f"x has {len(cfg['x'])} entries, alphabet has {n}")
    for key in ("theta", "eta"):
        if key in cfg:
            vals = np.atleast_2d(cfg[key])
            if vals.shape[1] != d:
                raise ConfigError(f"{key} has {vals.shape[1]} entries, parameter dimension is {d}")
            for v in vals:
                if not manifold.contains(v):
                    raise ConfigError(f"{key}={v.tolist()} lies outside the parameter box "
                                      f"{manifold.lower.tolist()} .. {manifold.upper.tolist()}")
    grid = cfg.get("grid")
    if isinstance(grid, list) and np.atleast_2d(grid).shape[1] != d:
        raise ConfigError(f"grid points have {np.atleast_2d(grid).shape[1]} coordinates, expected {d}")
    return gen, manifold


def _require(cfg, *keys):
    missing = [k for k in keys if k not in cfg]
    if missing:
        raise ConfigError(f"this command needs config field(s): {', '.join(missing)}")


def _distribution(values):
    try:
        return Distribution(values)
    except ContractError as exc:
        raise ConfigError(f"x: {exc}") from None


def _reparam(cfg, d):
    spec = cfg.get("reparam", {"kind": "identity"})
    if spec["kind"] == "identity":
        return identity_reparam(d)
    if spec["kind"] == "logit":
        if d != 1:
            raise ConfigError("logit reparametrization needs d = 1")
        return logit_reparam()
    if "matrix" not in spec:
        raise ConfigError("linear reparametrization needs a matrix")
    return linear_reparam(spec["matrix"], spec.get("offset"))


# commands ------------------------------------------------------------------------

def _fisher_row(gen, manifold, theta):
    x = manifold.forward(theta)
    num = fisher_numeric(gen, manifold, x, theta)
    closed = fisher_bregman(gen, manifold, theta)
    rel = float(np.linalg.norm(num.matrix - closed.matrix) / np.linalg.norm(closed.matrix))
    return {"theta": list(map(float, theta)), "numeric": num.matrix.tolist(),
            "bregman": closed.matrix.tolist(), "relative_difference": rel}


def run_command(command: str, cfg: dict) -> dict:
    gen, manifold = build_objects(cfg)
    solver = SolverOptions.from_dict(cfg["solver"])
    sampler = cfg["sampler"]
    th = cfg["thresholds"]

    if command == "project":
        _require(cfg, "x")
        return project(gen, manifold, _distribution(cfg["x"]), solver).to_dict()

    if command == "fisher":
        if "grid" in cfg:
            grid = cfg["grid"]
            pts = np.atleast_2d(grid) if isinstance(grid, list) else _affine_grid(manifold, grid, cfg)
            rows = []
            for t in pts:
                try:
                    rows.append(_fisher_row(gen, manifold, t))
                except NumericError as exc:
                    raise _PartialFailure(exc, {"rows": rows}) from None
            return {"rows": rows}
        if "x" in cfg:
            res = project(gen, manifold, _distribution(cfg["x"]), solver)
            out = _fisher_row(gen, manifold, res.theta_star)
            num = fisher_numeric(gen, manifold, _distribution(cfg["x"]), res.theta_star)
            out["numeric"] = num.matrix.tolist()
            out["eigenvalues"] = num.eigenvalues.tolist()
            out["projection"] = res.to_dict()
            return out
        _require(cfg, "theta")
        return _fisher_row(gen, manifold, np.asarray(cfg["theta"], dtype=np.float64))

    if command == "model-div":
        _require(cfg, "theta", "eta")
        etas = np.atleast_2d(cfg["eta"])
        values = [model_divergence(gen, manifold, cfg["theta"], e, cross_check=cfg.get("cross_check", False),
                                   n_samples=sampler["n_samples"], radius=sampler["radius"],
                                   seed=sampler["seed"]) for e in etas]
        return {"theta": cfg["theta"], "eta": etas.tolist(), "divergence": values,
                "cross_checked": bool(cfg.get("cross_check", False))}

    if command == "fiber-sample":
        _require(cfg, "theta")
        desc = fiber_description(gen, manifold, cfg["theta"])
        sample = sample_fiber(desc, gen, manifold, sampler["n_samples"], sampler["radius"], sampler["seed"], solver)
        return {"description": desc.to_dict(), "sample": sample.to_dict()}

    if command == "check constancy":
        _require(cfg, "theta")
        return check_fiber_constancy(gen, manifold, cfg["theta"], sampler["n_samples"], sampler["radius"],
                                     sampler["seed"], th["constancy"], solver).to_dict()

    if command == "check pythagorean":
        _require(cfg, "theta", "eta")
        etas = np.atleast_2d(cfg["eta"])
        if "x" in cfg:
            xs = [_distribution(cfg["x"])]
        else:
            desc = fiber_description(gen, manifold, cfg["theta"])
            xs = sample_fiber(desc, gen, manifold, sampler["n_samples"], sampler["radius"], sampler["seed"],
                              solver).verified_points
        reports = [check_pythagorean(gen, manifold, x, cfg["theta"], e, solver, verify="x" in cfg)
                   for x in xs for e in etas]
        worst = max(abs(r.residual) for r in reports)
        return {"reports": [r.to_dict() for r in reports], "max_abs_residual": worst,
                "tolerance": th["pythagorean"],
                "verdict": "holds" if worst <= th["pythagorean"] else "violated"}

    if command == "check affine":
        grid = cfg["grid"]
        pts = np.atleast_2d(grid) if isinstance(grid, list) else int(grid)
        return check_affine_logmap(gen, manifold, pts, th["rank_tol"], cfg["seed"]).to_dict()

    if command == "check second-deriv":
        _require(cfg, "theta")
        rep = _reparam(cfg, manifold.param_dim)
        return check_second_derivative_criterion(gen, manifold, rep, cfg["theta"], cfg.get("pairs"),
                                                 th["second_deriv"]).to_dict()

    raise ConfigError(f"unknown command {command!r}")


def _affine_grid(manifold, count, cfg):
    from .expfam import parameter_grid

    return parameter_grid(manifold, int(count), cfg["seed"])


def catalog() -> dict:
    return {
        "generators": generator_names(),
        "manifold_kinds": list(MANIFOLD_KINDS),
        "configurations": {name: {"generator": g, "manifold": m} for name, (g, m) in BUILTIN_CONFIGS.items()},
        "commands": COMMANDS,
    }


# output ------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, bool) or v is None:
        return json.dumps(v)
    return str(v)


def _flatten(prefix, value, out):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _flatten(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, value))


def to_csv(result: dict) -> str:
    """Grid sweeps become one row per grid point; anything else a key/value table."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if "rows" in result:
        flat_rows = []
        for row in result["rows"]:
            flat = []
            _flatten("", row, flat)
            flat_rows.append(flat)
        if flat_rows:
            writer.writerow([k for k, _ in flat_rows[0]])
        for flat in flat_rows:
            writer.writerow([_fmt(v) for _, v in flat])
    else:
        flat = []
        _flatten("", result, flat)
        writer.writerow(["key", "value"])
        for k, v in flat:
            writer.writerow([k, _fmt(v)])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".infogeo-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(report: dict, cfg: dict) -> None:
    out = cfg.get("output", {}) if cfg else {}
    fmt = out.get("format", "json")
    if fmt == "csv" and "result" in report and report.get("error") is None:
        text = to_csv(report["result"])
    else:
        text = json.dumps(report, indent=2) + "\n"
    path = out.get("path")
    if path:
        write_atomic(path, text)
    else:
        sys.stdout.write(text)


def _to_builtin(obj):
    if isinstance(obj, dict):
        return {k: _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_builtin(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="infogeo", description="Generalized divergences, projections, "
                                     "Fisher information and exponential-family criteria on finite alphabets.")
    parser.add_argument("--version", action="version", version=f"infogeo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def job(p, grid=False, threshold=False):
        p.add_argument("--config", required=True, help="JSON job description")
        p.add_argument("--out", help="write the report here (atomically) instead of stdout")
        p.add_argument("--format", choices=["json", "csv"])
        p.add_argument("--seed", type=int, help="override every seed in the config")
        p.add_argument("--reproducible", action="store_true",
                       help="report duration_ms as 0 so identical jobs give identical bytes")
        if grid:
            p.add_argument("--grid", help="parameter grid, e.g. theta=0.1:0.9:9, or a point count")
        if threshold:
            p.add_argument("--threshold", type=float, help="override the verdict threshold of this check")

    job(sub.add_parser("project", help="project a data point onto the manifold"))
    job(sub.add_parser("fisher", help="generalized Fisher information"), grid=True)
    job(sub.add_parser("model-div", help="divergence between model points"))
    job(sub.add_parser("fiber-sample", help="sample and verify fiber points"))
    check = sub.add_parser("check", help="exponential-family criteria")
    csub = check.add_subparsers(dest="check", required=True)
    job(csub.add_parser("constancy", help="Fisher matrix constant along the fiber"), threshold=True)
    job(csub.add_parser("pythagorean", help="Pythagorean relation on fiber points"), threshold=True)
    job(csub.add_parser("affine", help="rank test of the logarithmic map"), grid=True, threshold=True)
    job(csub.add_parser("second-deriv", help="symbol-independence of log-map second derivatives"),
        threshold=True)
    cat = sub.add_parser("catalog", help="list builtin generators, manifolds and configurations")
    cat.add_argument("--out")
    cat.add_argument("--format", choices=["json"])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command if args.command != "check" else f"check {args.check}"
    if command == "catalog":
        _emit({"result": catalog(), "version": __version__}, {"output": {"path": args.out}})
        return EXIT_OK

    start = time.perf_counter()
    cfg = None
    try:
        cfg = resolve_config(load_config(args.config), command, args)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = run_command(command, cfg)
        status, error = EXIT_OK, None
        if caught:
            result["warnings"] = sorted({str(w.message) for w in caught})
    except ConfigError as exc:
        print(f"infogeo: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _PartialFailure as exc:
        result, status = exc.partial, EXIT_NUMERIC
        error = {"type": type(exc.error).__name__, "message": str(exc.error)}
    except InfogeoError as exc:
        result, status = None, EXIT_NUMERIC
        error = {"type": type(exc).__name__, "message": str(exc)}

    duration = 0.0 if args.reproducible else round((time.perf_counter() - start) * 1000.0, 3)
    report = {"config": cfg, "result": _to_builtin(result), "version": __version__, "duration_ms": duration}
    if error is not None:
        report["error"] = error
        print(f"infogeo: {error['type']}: {error['message']}", file=sys.stderr)
    _emit(report, cfg)
    return status


if __name__ == "__main__":
    sys.exit(main())
