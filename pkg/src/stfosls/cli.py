"""Command-line front end: configure a run, execute it, emit tables and meshes.

Usage:
    stfosls run CONFIG [--out DIR] [--seed N]
    stfosls verify [--seed N]

Configs are flat ``key = value`` text files; ``#`` starts a comment.  Exit
codes: 0 success, 1 failed verification, 2 invalid configuration, 3 solver
failure, 4 internal invariant violation.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .driver import (
    MarkingPropertyError,
    SolverFailure,
    StopCriteria,
    adaptive_run,
    uniform_run,
    write_runlog_csv,
)
from .marking import MarkingConfig, MarkStrategy
from .mesh import uniform_initial_mesh, write_mesh
from .problem import BUILTIN_CASES, ConvectionForm, exact_error_data, make_problem
from .system import parabolic_system, poisson_sine_case

__all__ = ["RunConfig", "parse_config", "cmd_run", "cmd_verify", "main", "entry"]


class ConfigError(ValueError):
    pass


_DEFAULTS = {
    "system": "parabolic",
    "case": "heat-smooth",
    "form": "flux",
    "degree": "1",
    "mode": "adaptive",
    "marking": "doerfler",
    "theta": "0.5",
    "levels": "5",
    "max_iterations": "25",
    "max_dofs": "",
    "estimator_tolerance": "",
    "nt": "2",
    "nx": "2",
    "t_end": "1.0",
    "x_lo": "0.0",
    "x_hi": "1.0",
    "write_mesh": "false",
    "out": "",
}


@dataclass(frozen=True)
class RunConfig:
    system: str
    case: str
    form: ConvectionForm
    degree: int
    mode: str
    marking: MarkingConfig
    levels: int
    stop: StopCriteria
    nt: int
    nx: int
    t_end: float
    x_lo: float
    x_hi: float
    write_mesh: bool
    out: Optional[str]


def parse_config(text: str) -> RunConfig:
    """Parse and validate a flat key = value configuration."""
    values = dict(_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = value.strip()

    def _int(key, minimum=None):
        try:
            out = int(values[key])
        except ValueError as exc:
            raise ConfigError(f"{key} must be an integer, got {values[key]!r}") from exc
        if minimum is not None and out < minimum:
            raise ConfigError(f"{key} must be >= {minimum}, got {out}")
        return out

    def _float(key):
        try:
            return float(values[key])
        except ValueError as exc:
            raise ConfigError(f"{key} must be a number, got {values[key]!r}") from exc

    system = values["system"]
    if system not in ("parabolic", "poisson"):
        raise ConfigError(f"system must be 'parabolic' or 'poisson', got {system!r}")
    case = values["case"]
    if system == "parabolic" and case not in BUILTIN_CASES:
        raise ConfigError(f"unknown parabolic case {case!r}; available: {', '.join(BUILTIN_CASES)}")
    if system == "poisson":
        if case in BUILTIN_CASES:
            case = "poisson-sine"
        elif case != "poisson-sine":
            raise ConfigError(f"unknown poisson case {case!r}; available: poisson-sine")

    try:
        form = ConvectionForm(values["form"])
    except ValueError as exc:
        raise ConfigError(f"form must be 'flux' or 'gradient', got {values['form']!r}") from exc

    degree = _int("degree")
    if degree not in (1, 2):
        raise ConfigError(f"degree must be 1 or 2, got {degree}")

    mode = values["mode"]
    if mode not in ("adaptive", "uniform"):
        raise ConfigError(f"mode must be 'adaptive' or 'uniform', got {mode!r}")

    try:
        strategy = MarkStrategy(values["marking"])
    except ValueError as exc:
        raise ConfigError(f"marking must be 'doerfler' or 'maximum', got {values['marking']!r}") from exc
    try:
        marking = MarkingConfig(strategy=strategy, theta=_float("theta"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    max_iterations = _int("max_iterations", minimum=0) if values["max_iterations"] else None
    max_dofs = _int("max_dofs", minimum=1) if values["max_dofs"] else None
    tol = _float("estimator_tolerance") if values["estimator_tolerance"] else None
    try:
        stop = StopCriteria(
            max_iterations=max_iterations, max_dofs=max_dofs, estimator_tolerance=tol
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    t_end = _float("t_end")
    x_lo, x_hi = _float("x_lo"), _float("x_hi")
    if not t_end > 0:
        raise ConfigError(f"t_end must be positive, got {t_end}")
    if not x_lo < x_hi:
        raise ConfigError(f"need x_lo < x_hi, got ({x_lo}, {x_hi})")

    flag = values["write_mesh"].lower()
    if flag not in ("true", "false", "0", "1", "yes", "no"):
        raise ConfigError(f"write_mesh must be boolean, got {values['write_mesh']!r}")

    return RunConfig(
        system=system,
        case=case,
        form=form,
        degree=degree,
        mode=mode,
        marking=marking,
        levels=_int("levels", minimum=1),
        stop=stop,
        nt=_int("nt", minimum=1),
        nx=_int("nx", minimum=1),
        t_end=t_end,
        x_lo=x_lo,
        x_hi=x_hi,
        write_mesh=flag in ("true", "1", "yes"),
        out=values["out"] or None,
    )


def _build_run(config: RunConfig):
    mesh0 = uniform_initial_mesh(config.t_end, (config.x_lo, config.x_hi), config.nt, config.nx)
    if config.system == "poisson":
        system, exact = poisson_sine_case()
    else:
        problem, case = make_problem(config.case, config.form)
        system = parabolic_system(problem)
        exact = exact_error_data(case) if case is not None else None
    return mesh0, system, exact


def cmd_run(config_path, out_dir=None) -> int:
    """Execute one configured run; writes runlog.csv, summary.txt, optional mesh dump."""
    try:
        text = Path(config_path).read_text()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text)
    except ConfigError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return 2

    out = Path(out_dir) if out_dir is not None else Path(config.out or ".")
    out.mkdir(parents=True, exist_ok=True)

    mesh0, system, exact = _build_run(config)
    try:
        if config.mode == "uniform":
            log = uniform_run(system, mesh0, config.degree, config.levels, exact=exact)
        else:
            log = adaptive_run(
                system, mesh0, config.degree, config.marking, config.stop, exact=exact
            )
    except SolverFailure as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return 3
    except MarkingPropertyError as exc:
        print(f"error: internal invariant violation: {exc}", file=sys.stderr)
        return 4

    write_runlog_csv(log, out / "runlog.csv")
    if config.write_mesh and log.final_mesh is not None:
        write_mesh(log.final_mesh, out / "mesh_final.txt")
    summary = [
        f"system = {config.system}",
        f"case = {config.case}",
        f"mode = {config.mode}",
        f"degree = {config.degree}",
        f"levels = {len(log.records)}",
        f"reason = {log.reason}",
        f"initial estimator = {log.records[0].estimator!r}",
        f"final estimator = {log.records[-1].estimator!r}",
        f"final dofs = {log.records[-1].dofs}",
    ]
    (out / "summary.txt").write_text("\n".join(summary) + "\n")
    return 0


def cmd_verify(seed: int = 0) -> int:
    """Run the built-in oracle suite, printing one pass/fail line per check."""
    from .verify import run_checks

    results = run_checks(seed=seed)
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {res.name}: {res.detail}")
    if all(r.passed for r in results):
        print(f"all {len(results)} checks passed")
        return 0
    return 1


def main(argv=None) -> int:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory (overrides config)")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized property trials")
    parser = argparse.ArgumentParser(
        prog="stfosls",
        description="Adaptive space-time least-squares finite element runs",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_parser = sub.add_parser("run", help="execute a configured run", parents=[common])
    run_parser.add_argument("config", help="path to a key = value config file")
    sub.add_parser("verify", help="run the built-in oracle suite", parents=[common])

    args = parser.parse_args(argv)
    if args.command == "verify":
        return cmd_verify(seed=args.seed)
    return cmd_run(args.config, out_dir=args.out)


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
