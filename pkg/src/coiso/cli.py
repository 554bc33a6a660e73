"""Batch front end: ``coiso run``, ``coiso check``, ``coiso list-problems``.

Configs are TOML documents (JSON is accepted as an alternative encoding).
Outputs are RFC-4180 CSV files with one header line, plus a ``report.json``
with keys {config_echo, structure_report, summary_stats, error}.  All
numeric output uses 17 significant digits so values round-trip.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .constraints import structure_report
from .errors import CoisoError, StepFailed
from .phase import PhasePoint
from .problems import PROBLEM_NAMES, builtin_problem, benchmark_initial_conditions
from .shake_rattle import integrate
from .underlying import NewtonConfig, method_by_name, method_names
from .verify import energy_drift, estimate_order, fiber_criticality_scan, hopf_map, stereographic

EMIT_KINDS = (
    "trajectory",
    "energy",
    "residuals",
    "hopf",
    "fibre-scan",
    "structure-report",
    "convergence",
)

_FMT = "%.17g"


def _num(x) -> str:
    return _FMT % float(x)


class ConfigError(CoisoError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class RunConfig:
    problem: str
    mode: str
    initial: object  # str name or list of floats
    problem_params: dict = field(default_factory=dict)
    underlying: str = "implicit-midpoint"
    h: float = 0.1
    steps: int = 1000
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    emit: tuple = ("trajectory",)
    convergence: dict | None = None
    output_dir: str = "."
    seed: int = 0

    def echo(self) -> dict:
        return {
            "problem": self.problem,
            "problem_params": self.problem_params,
            "mode": self.mode,
            "underlying": self.underlying,
            "h": self.h,
            "steps": self.steps,
            "initial": self.initial if isinstance(self.initial, str) else list(self.initial),
            "newton": {"tol": self.newton.tol, "max_iter": self.newton.max_iter,
                       "damping": self.newton.damping},
            "emit": list(self.emit),
            "convergence": self.convergence,
            "output_dir": self.output_dir,
            "seed": self.seed,
        }


def parse_config(text: str) -> RunConfig:
    """Parse and validate a config document (TOML, or JSON as fallback)."""
    doc = None
    errors = []
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        try:
            doc = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"config is neither valid TOML nor JSON: {exc}"])
    if not isinstance(doc, dict):
        raise ConfigError(["config root must be a table/object"])

    problem = doc.get("problem")
    params = {}
    if isinstance(problem, dict):
        params = {k: v for k, v in problem.items() if k != "name"}
        problem = problem.get("name")
    if problem not in PROBLEM_NAMES:
        errors.append(f"problem must be one of {list(PROBLEM_NAMES)}, got {problem!r}")

    mode = doc.get("mode")
    if mode not in ("shake", "rattle"):
        errors.append(f"mode must be 'shake' or 'rattle', got {mode!r}")

    underlying = doc.get("underlying", "implicit-midpoint")
    if underlying not in method_names():
        errors.append(f"underlying must be one of {method_names()}, got {underlying!r}")

    h = doc.get("h", 0.1)
    if not isinstance(h, (int, float)) or h <= 0:
        errors.append(f"h must be a positive number, got {h!r}")

    steps = doc.get("steps", 1000)
    if not isinstance(steps, int) or steps < 0:
        errors.append(f"steps must be a nonnegative integer, got {steps!r}")

    initial = doc.get("initial")
    if isinstance(initial, str):
        if initial not in ("z_a", "z_b", "z_c"):
            errors.append(f"named initial must be z_a, z_b or z_c, got {initial!r}")
    elif isinstance(initial, (list, tuple)):
        try:
            vec = [float(x) for x in initial]
            if len(vec) % 2 != 0 or not vec:
                errors.append("explicit initial must have even, positive length (q then p)")
            initial = vec
        except (TypeError, ValueError):
            errors.append("explicit initial must be a list of numbers")
    else:
        errors.append("initial is required (z_a|z_b|z_c or an explicit [q..., p...] vector)")

    emit = doc.get("emit", [])
    if not isinstance(emit, (list, tuple)) or not emit:
        errors.append("emit must be a nonempty list")
    else:
        bad = [e for e in emit if e not in EMIT_KINDS]
        if bad:
            errors.append(f"unknown emit kinds {bad}; valid: {list(EMIT_KINDS)}")

    newton_doc = doc.get("newton", {})
    try:
        newton = NewtonConfig(
            tol=float(newton_doc.get("tol", 1e-11)),
            max_iter=int(newton_doc.get("max_iter", 50)),
            damping=float(newton_doc.get("damping", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        errors.append(f"invalid newton table: {exc}")
        newton = NewtonConfig()

    convergence = doc.get("convergence")
    if convergence is not None:
        if (not isinstance(convergence, dict)
                or "h_list" not in convergence or "T" not in convergence):
            errors.append("convergence table needs h_list and T")
    elif "convergence" in (emit or []):
        errors.append("emit includes 'convergence' but no convergence table is given")

    if errors:
        raise ConfigError(errors)
    return RunConfig(
        problem=problem,
        problem_params=params,
        mode=mode,
        underlying=underlying,
        h=float(h),
        steps=steps,
        initial=initial,
        newton=newton,
        emit=tuple(emit),
        convergence=convergence,
        output_dir=str(doc.get("output_dir", ".")),
        seed=int(doc.get("seed", 0)),
    )


def _resolve_initial(cfg: RunConfig, d: int) -> PhasePoint:
    if isinstance(cfg.initial, str):
        return benchmark_initial_conditions()[cfg.initial]
    vec = np.asarray(cfg.initial, dtype=float)
    if vec.size != 2 * d:
        raise ConfigError([f"explicit initial has length {vec.size}, problem needs {2 * d}"])
    return PhasePoint.from_z(vec)


def _write_csv(path: Path, header: list[str], rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def run(cfg: RunConfig) -> int:
    """Execute a run config; returns the process exit status."""
    out = Path(cfg.output_dir)
    report = {"config_echo": cfg.echo(), "structure_report": None,
              "summary_stats": {}, "error": None}
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"coiso: cannot create output dir: {exc}", file=sys.stderr)
        return 3

    problem = builtin_problem(cfg.problem, cfg.problem_params)
    method = method_by_name(cfg.underlying)
    z0 = _resolve_initial(cfg, problem.d)

    if "structure-report" in cfg.emit:
        reject = 1e-3 if cfg.problem == "hopf-gravity" else None
        rep = structure_report(problem.system, problem.constraints, problem.d,
                               seed=cfg.seed, reject_singular_below=reject)
        report["structure_report"] = rep.as_dict()
        (out / "structure.txt").write_text(rep.as_text() + "\n")

    try:
        traj = integrate(problem.system, problem.constraints, method, cfg.mode,
                         cfg.h, cfg.steps, z0, cfg.newton)
    except StepFailed as exc:
        report["error"] = {"step": exc.index, "cause": type(exc.cause).__name__,
                           "message": str(exc.cause)}
        _write_report(out, report)
        return 2
    except CoisoError as exc:
        report["error"] = {"step": None, "cause": type(exc).__name__, "message": str(exc)}
        _write_report(out, report)
        return 2

    try:
        _emit_files(out, cfg, problem, traj, report)
    except OSError as exc:
        print(f"coiso: filesystem error: {exc}", file=sys.stderr)
        return 3
    _write_report(out, report)
    return 0


def _emit_files(out: Path, cfg: RunConfig, problem, traj, report):
    d = problem.d
    if "trajectory" in cfg.emit:
        header = (["step"] + [f"q{i}" for i in range(d)] + [f"p{i}" for i in range(d)]
                  + ["gmax", "rhomax", "energy"])
        rows = [
            [r.index] + [_num(x) for x in r.point.z]
            + [_num(r.g_residual), _num(r.rho_residual), _num(r.energy)]
            for r in traj.records
        ]
        _write_csv(out / "trajectory.csv", header, rows)
    if "energy" in cfg.emit:
        _write_csv(out / "energy.csv", ["step", "energy"],
                   [[r.index, _num(r.energy)] for r in traj.records])
        stats = energy_drift(traj)
        report["summary_stats"]["energy"] = {
            "max_deviation": stats.max_deviation,
            "slope": stats.slope,
            "slope_stderr": stats.slope_stderr,
        }
    if "residuals" in cfg.emit:
        _write_csv(out / "residuals.csv", ["step", "gmax", "rhomax"],
                   [[r.index, _num(r.g_residual), _num(r.rho_residual)]
                    for r in traj.records])
        report["summary_stats"]["residuals"] = {
            "max_g": max(r.g_residual for r in traj.records),
            "max_rho": max(r.rho_residual for r in traj.records),
        }
    if "hopf" in cfg.emit:
        rows = []
        for r in traj.records:
            zeta, rr = hopf_map(r.point)
            w = stereographic(zeta, rr)
            rows.append([r.index, _num(w.real), _num(w.imag)])
        _write_csv(out / "hopf.csv", ["step", "re", "im"], rows)
    if "fibre-scan" in cfg.emit:
        rows = []
        for r in traj.records:
            _, _, crossings = fiber_criticality_scan(problem, r.point)
            rows.append([r.index, crossings])
        _write_csv(out / "fibre_scan.csv", ["step", "crossings"], rows)
    if "convergence" in cfg.emit and cfg.convergence:
        h_list = [float(h) for h in cfg.convergence["h_list"]]
        T = float(cfg.convergence["T"])
        z0 = _resolve_initial(cfg, problem.d)
        est = estimate_order(problem, cfg.mode, method_by_name(cfg.underlying),
                             h_list, T, z0, cfg.newton)
        rows = [[_num(h), _num(e), ""] for h, e in zip(est.h_values, est.errors)]
        if rows:
            rows[-1][2] = _num(est.slope) if not est.saturated else "saturated"
        _write_csv(out / "convergence.csv", ["h", "error", "slope"], rows)
        report["summary_stats"]["convergence"] = {
            "slope": None if est.saturated else est.slope,
            "saturated": est.saturated,
        }


def _write_report(out: Path, report: dict):
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def check(cfg: RunConfig) -> int:
    """Run only the structure report for the configured problem."""
    problem = builtin_problem(cfg.problem, cfg.problem_params)
    reject = 1e-3 if cfg.problem == "hopf-gravity" else None
    rep = structure_report(problem.system, problem.constraints, problem.d,
                           seed=cfg.seed, reject_singular_below=reject)
    print(rep.as_text())
    return 0 if (rep.verdict_coisotropy and rep.verdict_nondegeneracy) else 2


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="coiso")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a run config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--output-dir", type=Path, default=None)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--emit", type=str, default=None,
                       help="comma-separated emission list (overrides config)")

    p_check = sub.add_parser("check", help="run only the structure report")
    p_check.add_argument("config", type=Path)
    p_check.add_argument("--seed", type=int, default=None)

    sub.add_parser("list-problems", help="list built-in problem names")

    args = parser.parse_args(argv)

    if args.command == "list-problems":
        for name in PROBLEM_NAMES:
            print(name)
        return 0

    try:
        text = args.config.read_text()
    except OSError as exc:
        print(f"coiso: cannot read config: {exc}", file=sys.stderr)
        return 3
    try:
        cfg = parse_config(text)
        if getattr(args, "output_dir", None) is not None:
            cfg.output_dir = str(args.output_dir)
        if getattr(args, "seed", None) is not None:
            cfg.seed = args.seed
        if getattr(args, "emit", None):
            emit = tuple(e.strip() for e in args.emit.split(",") if e.strip())
            bad = [e for e in emit if e not in EMIT_KINDS]
            if bad or not emit:
                raise ConfigError([f"unknown emit kinds {bad}"])
            cfg.emit = emit
    except ConfigError as exc:
        for msg in exc.problems:
            print(f"coiso: config error: {msg}", file=sys.stderr)
        return 1

    if args.command == "run":
        return run(cfg)
    return check(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
