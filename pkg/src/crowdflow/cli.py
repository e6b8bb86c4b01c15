"""``crowdflow`` command-line interface.

Every subcommand builds a JSON-style config dictionary, validates it with
:func:`validate_config` and hands it to :func:`run`.  ``solve2d`` reads the
config from a file; the other modes take flags mirroring the config keys.

Exit status: 0 on success (converged), 2 when a solve did not converge,
1 on usage or validation errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import analysis, analytic1d
from .dg import PenaltyConfig, solve_stationary
from .io import write_csv, write_profile_csv, write_vtk
from .mesh import DEFAULT_DOORS, Door, GeometrySpec, build_interval_mesh, build_mesh, write_mesh
from .model import BoundarySegment, ModelParams, VelocitySpec
from .velocity import divergence_residual, resolve_velocity

log = logging.getLogger("crowdflow")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2

MODES = ("solve1d", "solve2d", "phase", "analytic", "mesh")

_rate = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["mode"],
    "properties": {
        "mode": {"enum": list(MODES)},
        "epsilon": _pos,
        "alpha": _rate,
        "beta": _rate,
        "cells": _posint,
        "tau": _pos,
        "initial_density": {"type": "number", "minimum": 0, "maximum": 1},
        "eta": _pos,
        "tol": _pos,
        "max_iter": _posint,
        "geometry": {"enum": ["interval", "corridor", "obstacle"]},
        "nx": {"type": "integer", "minimum": 2},
        "ny": {"type": "integer", "minimum": 2},
        "doors": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["tag", "side", "lo", "hi"],
                "properties": {
                    "tag": {"type": "string", "minLength": 1},
                    "side": {"enum": ["left", "right"]},
                    "lo": {"type": "number"},
                    "hi": {"type": "number"},
                },
            },
        },
        "rates": {"type": "object", "additionalProperties": _rate},
        "obstacle": {
            "type": "object",
            "additionalProperties": False,
            "required": ["center", "radius"],
            "properties": {
                "center": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                "radius": _pos,
            },
        },
        "velocity": {"enum": ["harmonic", "linear", "constant"]},
        "velocity_method": {"enum": ["mixed", "p1"]},
        "velocity_vector": {"type": "array", "items": {"type": "number"}, "minItems": 1, "maxItems": 2},
        "step": {"type": "number", "exclusiveMinimum": 0, "maximum": 0.5},
        "jobs": _posint,
        "warm_start": {"type": "boolean"},
        "n_samples": {"type": "integer", "minimum": 2},
        "out": {"type": "string", "minLength": 1},
    },
    "allOf": [
        {"if": {"properties": {"mode": {"const": "solve1d"}}},
         "then": {"required": ["epsilon", "alpha", "beta"]}},
        {"if": {"properties": {"mode": {"const": "solve2d"}}},
         "then": {"required": ["epsilon", "rates"]}},
        {"if": {"properties": {"mode": {"const": "phase"}}}, "then": {"required": ["epsilon"]}},
        {"if": {"properties": {"mode": {"const": "analytic"}}}, "then": {"required": ["epsilon"]}},
    ],
}

DEFAULTS: dict[str, Any] = {
    "cells": 200,
    "tau": 0.01,
    "initial_density": 0.5,
    "eta": 10.0,
    "tol": 1e-8,
    "max_iter": 1_000_000,
    "nx": 80,
    "ny": 40,
    "velocity": "harmonic",
    "velocity_method": "mixed",
    "step": 0.01,
    "jobs": 1,
    "warm_start": True,
    "n_samples": 101,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    mode: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key: str):
        return self.values[key]

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def model_params(self) -> ModelParams:
        v = self.values
        kw = {"tau": v["tau"], "initial_density": v["initial_density"]}
        if self.mode == "solve1d":
            return ModelParams.one_dimensional(v["epsilon"], v["alpha"], v["beta"], **kw)
        return ModelParams(v["epsilon"], self.velocity_spec(), self.segments(), **kw)

    def velocity_spec(self) -> VelocitySpec:
        kind = self.values["velocity"]
        if kind == "harmonic":
            return VelocitySpec.harmonic(self.values["velocity_method"])
        vec = tuple(self.values.get("velocity_vector", (1.0, 0.0)))
        if kind == "linear":
            return VelocitySpec.linear_potential(*vec)
        return VelocitySpec.constant(*vec)

    def doors(self) -> tuple[Door, ...]:
        if "doors" not in self.values:
            return DEFAULT_DOORS
        return tuple(Door(d["tag"], d["side"], d["lo"], d["hi"]) for d in self.values["doors"])

    def segments(self) -> tuple[BoundarySegment, ...]:
        rates = self.values["rates"]
        segs = []
        for d in self.doors():
            if d.side == "left":
                segs.append(BoundarySegment.inflow(d.tag, rates[d.tag]))
            else:
                segs.append(BoundarySegment.outflow(d.tag, rates[d.tag]))
        segs.append(BoundarySegment.wall("wall"))
        return tuple(segs)

    def geometry(self) -> GeometrySpec:
        v = self.values
        kind = v.get("geometry", "corridor" if self.mode != "solve1d" else "interval")
        if kind == "interval":
            return GeometrySpec.interval(v["cells"])
        if kind == "corridor":
            return GeometrySpec.corridor(v["nx"], v["ny"], self.doors())
        ob = v.get("obstacle", {"center": [1.7, 0.5], "radius": 0.2})
        return GeometrySpec.obstacle(v["nx"], v["ny"], tuple(ob["center"]), ob["radius"], self.doors())


def _path(err: jsonschema.ValidationError) -> str:
    return "/".join(str(p) for p in err.absolute_path) or "<root>"


def validate_config(data: Any) -> RunConfig:
    """Validate a decoded config and fill defaults."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = [f"{_path(e)}: {e.message}" for e in errors]
        raise ConfigError("invalid config:\n  " + "\n  ".join(msgs))
    values = {**DEFAULTS, **data}
    bad = [f"{k}: {values[k]} is outside the admissible rate range 0 <= rate <= 1"
           for k in ("alpha", "beta") if k in values and not 0.0 <= values[k] <= 1.0]
    bad += [f"rates/{k}: {r} is outside the admissible rate range 0 <= rate <= 1"
            for k, r in values.get("rates", {}).items() if not 0.0 <= r <= 1.0]
    if bad:
        raise ConfigError("invalid config:\n  " + "\n  ".join(bad))
    cfg = RunConfig(values["mode"], values)
    if cfg.mode == "solve2d":
        tags = {d.tag for d in cfg.doors()}
        missing = sorted(tags - set(values["rates"]))
        extra = sorted(set(values["rates"]) - tags)
        if missing or extra:
            raise ConfigError(f"invalid config:\n  rates: missing {missing}, unknown {extra}")
    return cfg


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(data)


# runners ----------------------------------------------------------------------


def _out(cfg: RunConfig, default: str) -> Path:
    return Path(cfg.get("out", default))


def _finite(o):
    """Replace NaN/inf by None so the output is strict JSON."""
    if isinstance(o, dict):
        return {k: _finite(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite(v) for v in o]
    if isinstance(o, (float, np.floating)) and not np.isfinite(o):
        return None
    return o


def _write_json(path: Path, data: dict) -> None:
    text = json.dumps(_finite(data), indent=2, sort_keys=True, default=_json_default, allow_nan=False)
    path.write_text(text + "\n")


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o))


def _estimates_dict(rep: analysis.EstimateReport) -> dict:
    def c(x):
        return "not-applicable" if x is None else {"lhs": x.lhs, "bound": x.bound, "passed": x.passed}
    return {"energy": c(rep.energy), "maximal_current": c(rep.maximal_current), "maximal_current_flux": c(rep.maximal_current_flux),
            "plateau": c(rep.plateau), "bounds": c(rep.bounds),
            "bounds_min": rep.bounds_min, "bounds_max": rep.bounds_max}


def _run_solve1d(cfg: RunConfig) -> int:
    params = cfg.model_params()
    mesh = build_interval_mesh(cfg["cells"])
    velocity = resolve_velocity(mesh, params.velocity, params.segments)
    rho, rep = solve_stationary(params, mesh, velocity, tol=cfg["tol"], max_iter=cfg["max_iter"],
                                penalty=PenaltyConfig(cfg["eta"]))
    out = _out(cfg, "profile.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    j = analysis.cell_fluxes(rho, params.epsilon, velocity)[:, 0]
    write_profile_csv(out, rho, j)
    est = analysis.check_phase_estimates(rho, params, rep.flux_summary.mean_flux)
    summary = {"config": cfg.values, "report": rep.as_dict(), "estimates": _estimates_dict(est),
               "phase": analysis.classify(rep.flux_summary.mean_flux, params.alpha, params.beta).value}
    _write_json(out.with_suffix(".json"), summary)
    log.info("j = %.10g after %d iterations (converged: %s)", rep.flux_summary.mean_flux,
             rep.iterations, rep.converged)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def _run_solve2d(cfg: RunConfig) -> int:
    params = cfg.model_params()
    mesh = build_mesh(cfg.geometry())
    velocity = resolve_velocity(mesh, params.velocity, params.segments)
    rho, rep = solve_stationary(params, mesh, velocity, tol=cfg["tol"], max_iter=cfg["max_iter"],
                                penalty=PenaltyConfig(cfg["eta"]))
    out = _out(cfg, "solve2d")
    out.mkdir(parents=True, exist_ok=True)
    write_vtk(out / "solution.vtk", rho, velocity)
    harmonic = cfg["velocity"] == "harmonic"
    bounds = analysis.check_bounds(rho, params) if harmonic else None
    summary = {
        "config": cfg.values,
        "report": rep.as_dict(),
        "mesh": {"cells": mesh.n_cells, "dofs": mesh.n_dofs},
        "velocity": {"method": velocity.method,
                     "divergence_residual": divergence_residual(velocity, mesh)},
        "density_range": [float(rho.vector.min()), float(rho.vector.max())],
        "bounds": "not-applicable" if bounds is None
        else {"violation": bounds.lhs, "slack": bounds.bound, "passed": bounds.passed,
              "range": list(analysis.rate_bounds(params))},
    }
    _write_json(out / "report.json", summary)
    log.info("2D solve: %d iterations, converged %s", rep.iterations, rep.converged)
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def _run_phase(cfg: RunConfig) -> int:
    vals = analysis.grid_values(cfg["step"])
    scan_cfg = analysis.ScanConfig(n_cells=cfg["cells"], tau=cfg["tau"], tol=cfg["tol"],
                                   max_iter=cfg["max_iter"], eta=cfg["eta"],
                                   warm_start=cfg["warm_start"], jobs=cfg["jobs"])
    grid = analysis.scan_phase_diagram(cfg["epsilon"], vals, vals, scan_cfg)
    out = _out(cfg, "phase")
    out.mkdir(parents=True, exist_ok=True)
    grid.write_csv(out / "phase.csv")
    analysis.write_contour_csv(analysis.extract_quarter_contour(grid), out / "contour.csv")
    _write_curve(out / "phase_boundary.csv", cfg["epsilon"], cfg["n_samples"])
    return EXIT_OK if grid.converged.all() else EXIT_NOT_CONVERGED


def _write_curve(path: Path, epsilon: float, n: int) -> None:
    curve = analytic1d.phase_boundary_curve(epsilon, n)
    write_csv(path, ["alpha", "beta", "side"], ((s.alpha, s.beta, s.side.value) for s in curve))


def _run_analytic(cfg: RunConfig) -> int:
    eps = cfg["epsilon"]
    out = _out(cfg, "analytic")
    out.mkdir(parents=True, exist_ok=True)
    _write_curve(out / "phase_boundary.csv", eps, cfg["n_samples"])
    if "alpha" in cfg.values or "beta" in cfg.values:
        if "alpha" not in cfg.values or "beta" not in cfg.values:
            raise ConfigError("analytic profiles need both alpha and beta")
        a, b = cfg["alpha"], cfg["beta"]
        sol = analytic1d.solve_explicit(eps, a, b)
        x = np.linspace(0.0, 1.0, cfg["cells"] + 1)
        rho = np.asarray(analytic1d.eval_explicit(sol, x))
        write_csv(out / "profile.csv", ["x", "rho"], zip(x.tolist(), rho.tolist()))
        info = {"kind": type(sol).__name__, "j": sol.j,
                "bc_residuals": list(analytic1d.bc_residuals(sol, a, b))}
        if hasattr(sol, "c"):
            info["c"] = sol.c
        if hasattr(sol, "branch"):
            info["branch"] = sol.branch
        _write_json(out / "solution.json", info)
    return EXIT_OK


def _run_mesh(cfg: RunConfig) -> int:
    mesh = build_mesh(cfg.geometry())
    out = _out(cfg, "mesh.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_mesh(mesh, out)
    log.info("wrote %r to %s", mesh, out)
    return EXIT_OK


_RUNNERS = {"solve1d": _run_solve1d, "solve2d": _run_solve2d, "phase": _run_phase,
            "analytic": _run_analytic, "mesh": _run_mesh}


def run(config: RunConfig) -> int:
    return _RUNNERS[config.mode](config)


# argument parsing ---------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit with status 1
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="crowdflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="mode", required=True, parser_class=_Parser)

    p = sub.add_parser("solve1d", help="DG solve on the unit interval")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--cells", type=int)
    _solver_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("solve2d", help="DG solve in the corridor, configured by a JSON file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("phase", help="(alpha, beta) phase-diagram scan")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--step", type=float)
    p.add_argument("--cells", type=int)
    p.add_argument("--jobs", type=int)
    _solver_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("analytic", help="closed-form profiles and the j = 1/4 curve")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--n-samples", dest="n_samples", type=int)
    p.add_argument("--out", required=True)

    p = sub.add_parser("mesh", help="write a corridor or obstacle mesh")
    p.add_argument("--geometry", choices=["corridor", "obstacle"], required=True)
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--obstacle", help="cx,cy,r")
    p.add_argument("--out", required=True)
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    if args.mode == "solve2d":
        try:
            text = Path(args.config).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        data = json.loads(text) if text.strip() else {}
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        data.setdefault("mode", "solve2d")
        if data["mode"] != "solve2d":
            raise ConfigError(f"config mode {data['mode']!r} does not match solve2d")
        data["out"] = args.out
        return validate_config(data)
    data = {k: v for k, v in vars(args).items()
            if v is not None and k not in ("verbose", "config", "obstacle")}
    if getattr(args, "obstacle", None):
        try:
            cx, cy, r = (float(t) for t in args.obstacle.split(","))
        except ValueError as exc:
            raise ConfigError("--obstacle expects cx,cy,r") from exc
        data["obstacle"] = {"center": [cx, cy], "radius": r}
    return validate_config(data)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        return run(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"crowdflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
