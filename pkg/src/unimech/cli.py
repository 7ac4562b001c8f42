"""Command-line front end: parse, analyze, run constraints, simulate, report.

Exit codes: 0 ok, 2 parse or validation error, 3 inconsistent constraints,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .constraints import Policy, Status, run_algorithm
from .dynamics import IntegrationError, integrate, ledger_field, on_surface_initial, project_trajectory
from .surface import SamplingFailure
from .jetcalc import LagrangianSystem
from .symbolic import symbols as S
from .symbolic.chart import NumericPoint
from .symbolic.parser import ParseError, parse_lagrangian
from .symbolic.zero import DEFAULT_SEED, Sampler
from .unified import analyze_regular, build_unified, solve_coefficients, tangency_system

EXIT_OK, EXIT_INPUT, EXIT_INCONSISTENT, EXIT_NUMERIC = 0, 2, 3, 4
COMMANDS = ("analyze", "momenta", "eom", "unified", "constraints", "simulate")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    input: str
    command: str
    seed: int = DEFAULT_SEED
    tol: float = 1e-9
    samples: int = 32
    h: float = 1e-3
    t_end: float = 1.0
    init: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    semispray1: bool = False
    space: str = "lagrangian"
    format: str = "json"
    out: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise CliError(f"unknown command {self.command!r}", EXIT_INPUT)
        if not self.tol > 0:
            raise CliError("--tol must be positive", EXIT_INPUT)
        if self.samples < 1:
            raise CliError("--samples must be positive", EXIT_INPUT)
        if not self.h > 0:
            raise CliError("--h must be positive", EXIT_INPUT)

    def sampler(self) -> Sampler:
        return Sampler(seed=self.seed, samples=self.samples, tol=self.tol)

    def to_json(self) -> dict:
        return asdict(self)


def _pairs(text: str, flag: str) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        key, sep, val = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise CliError(f"{flag} expects k=v pairs, got {item!r}", EXIT_INPUT)
        try:
            out[key] = float(val)
        except ValueError:
            raise CliError(f"{flag}: {val!r} is not a number", EXIT_INPUT) from None
    return out


def _int(text: str) -> int:
    return int(text, 0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unimech", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"unimech {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("input", help="Lagrangian source file (.lag)")
        sp.add_argument("--seed", type=_int, default=DEFAULT_SEED)
        sp.add_argument("--tol", type=float, default=1e-9, help="zero-test tolerance")
        sp.add_argument("--samples", type=int, default=32, help="zero-test sample count")
        sp.add_argument("--h", type=float, default=1e-3, help="integrator step")
        sp.add_argument("--t-end", type=float, default=1.0, dest="t_end")
        sp.add_argument("--init", default="", help="initial values k=v,...")
        sp.add_argument("--param", default="", help="parameter values k=v,...")
        sp.add_argument("--semispray1", action="store_true",
                        help="require the solution to be a semispray of type 1")
        sp.add_argument("--space", choices=("lagrangian", "unified", "hamiltonian"), default="lagrangian",
                        help="phase space of the simulated trajectory")
        sp.add_argument("--format", choices=("json", "csv"), default=None)
        sp.add_argument("--out", default=None, help="output path (default stdout)")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    fmt = ns.format or ("csv" if ns.command == "simulate" else "json")
    return RunConfig(ns.input, ns.command, ns.seed, ns.tol, ns.samples, ns.h, ns.t_end,
                     _pairs(ns.init, "--init"), _pairs(ns.param, "--param"), ns.semispray1,
                     ns.space, fmt, ns.out)


# ----------------------------------------------------------------------
def _load(cfg: RunConfig):
    try:
        with open(cfg.input, encoding="utf-8") as fh:
            source = fh.read()
    except OSError as exc:
        raise CliError(f"cannot read {cfg.input}: {exc.strerror}", EXIT_INPUT) from None
    try:
        chart, lag = parse_lagrangian(source)
    except ParseError as exc:
        where = f"{cfg.input}:{exc.line}:{exc.col}: " if exc.line else f"{cfg.input}: "
        raise CliError(f"{where}{exc.kind} error: {exc.message}", EXIT_INPUT) from None
    unknown = set(cfg.params) - set(chart.params)
    if unknown:
        raise CliError(f"--param names undeclared parameters: {', '.join(sorted(unknown))}", EXIT_INPUT)
    chart = chart.with_bindings(cfg.params)
    return LagrangianSystem(chart, lag, cfg.sampler())


def _fields(x) -> dict:
    return {s.name: str(c) for s, c in x.sorted_items()} if x is not None else None


def cmd_momenta(cfg, sys_) -> dict:
    return {"momenta": sys_.report()["momenta"]}


def cmd_analyze(cfg, sys_) -> dict:
    out = sys_.report()
    out["energy_form"] = {"omega_L": sys_.omega.to_json()}
    if sys_.hessian.is_regular:
        ra = analyze_regular(sys_)
        out["regular"] = {
            "X": _fields(ra.field),
            "X_L": _fields(ra.lagrangian_field),
            "X_h": _fields(ra.hamiltonian_field),
            "hamiltonian": str(ra.hamiltonian) if ra.hamiltonian is not None else None,
            "notes": ra.notes,
        }
    else:
        out["regular"] = None
    return out


def cmd_eom(cfg, sys_) -> dict:
    out = {"euler_lagrange": sys_.report()["euler_lagrange"], "hessian": sys_.hessian.to_json()}
    if sys_.hessian.is_regular:
        out["X_L"] = _fields(analyze_regular(sys_).lagrangian_field)
    return out


def cmd_unified(cfg, sys_) -> dict:
    U = build_unified(sys_)
    sol = solve_coefficients(U, cfg.sampler())
    out = {
        "C": str(U.C),
        "H": str(U.H),
        "Omega": U.Omega.to_json(),
        "coefficients": sol.to_json(),
        "graph": {S.p(r, a).name: str(e) for (r, a), e in sorted(U.graph.items())},
        "tangency": {S.p(r, a).name: str(e) for (r, a), e in sorted(tangency_system(U, sol.field).items())},
    }
    if sys_.hessian.is_regular:
        ra = analyze_regular(sys_)
        out["X"] = _fields(ra.field)
        out["X_L"] = _fields(ra.lagrangian_field)
        out["X_h"] = _fields(ra.hamiltonian_field)
    return out


def _ledger(cfg, sys_):
    U = build_unified(sys_)
    led = run_algorithm(U, Policy(semispray1=cfg.semispray1, sampler=cfg.sampler()))
    return U, led


def cmd_constraints(cfg, sys_) -> dict:
    _, led = _ledger(cfg, sys_)
    out = {"hessian": sys_.hessian.to_json(), "ledger": led.to_json(), "X": _fields(led.field())}
    if led.status == Status.INCONSISTENT:
        raise _Report(out, EXIT_INCONSISTENT)
    if led.status != Status.STABILIZED:
        raise _Report(out, EXIT_NUMERIC)
    return out


class _Report(Exception):
    """Carries a report that must still be written before a non-zero exit."""

    def __init__(self, payload, code: int):
        super().__init__(code)
        self.payload = payload
        self.code = code


def _initial(cfg, chart, coords, seeds_required: bool) -> NumericPoint:
    names = {s.name for s in coords}
    unknown = set(cfg.init) - names
    if unknown:
        raise CliError(f"--init names unknown coordinates: {', '.join(sorted(unknown))}", EXIT_INPUT)
    missing_params = [p for p in chart.params if p not in chart.binding_map()]
    if missing_params:
        raise CliError(f"simulate needs --param values for {', '.join(missing_params)}", EXIT_INPUT)
    values = {}
    missing = []
    rng = np.random.default_rng(cfg.seed)
    for s in coords:
        if s.name in cfg.init:
            values[s] = cfg.init[s.name]
        elif seeds_required:
            missing.append(s.name)
        else:
            values[s] = float(rng.uniform(-1.0, 1.0))
    if missing:
        raise CliError(f"--init lacks values for {', '.join(missing)}", EXIT_INPUT)
    return NumericPoint(values, chart.binding_map())


def cmd_simulate(cfg, sys_):
    chart = sys_.chart
    try:
        if sys_.hessian.is_regular:
            ra = analyze_regular(sys_)
            lag_coords = chart.lagrangian_coordinates()
            x0 = _initial(cfg, chart, lag_coords, True)
            if cfg.space == "unified":
                fl = sys_.legendre_map()
                pvals = {p: fl.images[p].eval(x0) for p in chart.p_coordinates()}
                traj = integrate(ra.field, x0.with_coords(pvals), cfg.t_end, cfg.h,
                                 chart.w_coordinates(), space="unified")
            else:
                traj = integrate(ra.lagrangian_field, x0, cfg.t_end, cfg.h, lag_coords)
                if cfg.space == "hamiltonian":
                    traj = project_trajectory(traj, sys_.legendre_map())
        else:
            if cfg.space != "unified":
                raise CliError("singular Lagrangian: only --space unified is available", EXIT_INPUT)
            U, led = _ledger(cfg, sys_)
            if led.status == Status.INCONSISTENT:
                raise CliError("constraint algorithm found an inconsistent system", EXIT_INCONSISTENT)
            if led.status != Status.STABILIZED:
                raise CliError(f"constraint algorithm stopped with status {led.status.value}", EXIT_NUMERIC)
            coords = chart.w_coordinates()
            seed = _initial(cfg, chart, coords, False)
            eqs = list(U.graph.values()) + [e.expr for e in led.constraints()]
            x0 = on_surface_initial(eqs, seed, coords, cfg.sampler())
            traj = integrate(ledger_field(led, coords), x0, cfg.t_end, cfg.h, coords, space="unified")
    except IntegrationError as exc:
        raise CliError(str(exc), EXIT_INPUT) from None
    except SamplingFailure as exc:
        raise CliError(str(exc), EXIT_NUMERIC) from None
    if traj.truncated:
        raise _Report(traj, EXIT_NUMERIC)
    return traj


HANDLERS = {
    "analyze": cmd_analyze,
    "momenta": cmd_momenta,
    "eom": cmd_eom,
    "unified": cmd_unified,
    "constraints": cmd_constraints,
    "simulate": cmd_simulate,
}


# ----------------------------------------------------------------------
def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, obj


def render(cfg: RunConfig, payload) -> str:
    """Deterministic text for a report (a dict or a trajectory)."""
    header = {"tool": "unimech", "version": __version__, "config": cfg.to_json()}
    if cfg.format == "csv":
        if hasattr(payload, "to_csv"):
            return payload.to_csv()
        lines = ["key,value"]
        for k, v in _flatten({"provenance": header, "report": payload}):
            text = json.dumps(v) if not isinstance(v, str) else v
            lines.append(f"{k},\"{text}\"" if "," in text else f"{k},{text}")
        return "\n".join(lines) + "\n"
    body = payload.to_json() if hasattr(payload, "to_json") else payload
    return json.dumps({"provenance": header, "report": body}, sort_keys=True, indent=2) + "\n"


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.out:
        try:
            with open(cfg.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise CliError(f"cannot write {cfg.out}: {exc.strerror}", EXIT_INPUT) from None
    else:
        sys.stdout.write(text)


def run(cfg: RunConfig) -> int:
    try:
        sys_ = _load(cfg)
        try:
            payload = HANDLERS[cfg.command](cfg, sys_)
            code = EXIT_OK
        except _Report as rep:
            payload, code = rep.payload, rep.code
        _emit(cfg, render(cfg, payload))
        if code != EXIT_OK:
            diag = getattr(payload, "diagnostics", None) or ["constraint algorithm did not stabilize"]
            print(f"unimech: {'; '.join(diag)}", file=sys.stderr)
        return code
    except CliError as exc:
        print(f"unimech: {exc}", file=sys.stderr)
        return exc.code
    except (ValueError, KeyError) as exc:
        print(f"unimech: validation error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"unimech: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except CliError as exc:
        print(f"unimech: {exc}", file=sys.stderr)
        return exc.code
    return run(cfg)


if __name__ == "__main__":
    raise SystemExit(main())
