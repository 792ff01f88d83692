"""Command-line front end.

    python -m slowosc <command> [options] [--config FILE] [--out DIR]

Commands: simulate, sop, ky, tau-curve, multiscale, scenario, validate.
A config file holds ``key = value`` lines (``#`` starts a comment); keys are
the long option names, and options given on the command line win. The
effective configuration is echoed to ``<out>/config.txt``.

Exit status: 0 success, 1 a check failed, 2 usage or configuration error,
3 numerical failure (no convergence, conservation breach).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import io
from .dde import DEFAULT_HORIZON, DEFAULT_N, NumericalError, Segment, integrate
from .feedback import (FeedbackConstructionError, HppParams, build_hpp_feedback,
                       build_multiscale, validate_params)
from .kaplan_yorke import (ConservationError, find_ky_amplitude, integrate_planar,
                           scan_tau_brackets, tau)
from .return_map import ConvergedToZero, NonConvergence, iterate_to_fixed_point
from .scenarios import SCENARIOS, run_scenario, scenario_multiscale

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

COMMANDS = ("simulate", "sop", "ky", "tau-curve", "multiscale", "scenario", "validate")


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 2:
        raise argparse.ArgumentTypeError(f"grid resolution must be >= 2, got {v}")
    return v


def _positive(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _number(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None


# option name -> (type, help); every option defaults to None so that file
# values can be told apart from explicit flags
OPTIONS: dict[str, tuple[Any, str]] = {
    "a": (_positive, "plateau start a"),
    "c": (_positive, "transition width c"),
    "delta": (_positive, "tail level delta"),
    "gamma": (_positive, "plateau height gamma"),
    "slope0": (_number, "slope of f at 0 (negative)"),
    "gammas": (_floats, "multiscale plateau heights, e.g. 5,1"),
    "feedback": (str, "breakpoint file written by this tool"),
    "seed-ramp": (_number, "seed phi(s) = A*(s+1)"),
    "seed-constant": (_number, "seed phi = L (not in the cone; simulate only)"),
    "seed-file": (str, "seed segment file"),
    "seeds": (_floats, "ramp amplitudes for multiscale, one per scale"),
    "n": (_positive_int, f"grid points per delay (default {DEFAULT_N})"),
    "horizon": (_positive, f"integration horizon (default {DEFAULT_HORIZON:g})"),
    "tol": (_positive, "fixed-point / root tolerance"),
    "max-iter": (_positive_int, "return-map iteration cap (default 50)"),
    "t-max": (_positive, "planar integration time"),
    "step": (_positive, "planar step (default 1e-4)"),
    "bracket-lo": (_positive, "lower end of the tau = 1 bracket"),
    "bracket-hi": (_positive, "upper end of the tau = 1 bracket"),
    "u-min": (_positive, "smallest amplitude on the tau curve"),
    "u-max": (_positive, "largest amplitude on the tau curve"),
    "num": (_positive_int, "number of tau-curve points"),
    "name": (str, f"scenario name: {', '.join(SCENARIOS)}"),
}


@dataclass
class RunConfig:
    command: str
    values: dict[str, Any]
    out_dir: Path
    sources: dict[str, str] = field(default_factory=dict)

    def get(self, key: str, default=None):
        v = self.values.get(key)
        return default if v is None else v

    def echo(self) -> list[tuple[str, Any]]:
        items = [("command", self.command)]
        items += [(k, v) for k, v in self.values.items() if v is not None]
        items.append(("out", str(self.out_dir)))
        return items


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slowosc", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--out", help=f"output directory (default ${io.OUTPUT_ENV} or ./slowosc_out)")
    for name, (typ, help_) in OPTIONS.items():
        parser.add_argument(f"--{name}", type=typ, default=None, help=help_)
    return parser


def read_config_file(path) -> dict[str, str]:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"config file not found: {path}")
    out = {}
    for lineno, raw in enumerate(p.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("_", "-")] = val
    return out


def parse_config(argv=None) -> RunConfig:
    """Command line plus optional config file, flags taking precedence."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    values: dict[str, Any] = {}
    sources: dict[str, str] = {}
    file_out = None
    if ns.config:
        for key, raw in read_config_file(ns.config).items():
            if key == "out":
                file_out = raw
                continue
            if key not in OPTIONS:
                raise UsageError(f"unknown key {key!r} in {ns.config}")
            try:
                values[key] = OPTIONS[key][0](raw)
            except argparse.ArgumentTypeError as exc:
                raise UsageError(f"{ns.config}: {key}: {exc}") from None
            sources[key] = "file"
    for key in OPTIONS:
        v = getattr(ns, key.replace("-", "_"))
        if v is not None:
            values[key] = v
            sources[key] = "flag"
    for key in ("feedback", "seed-file"):
        if key in values and not Path(values[key]).is_file():
            raise UsageError(f"--{key}: file not found: {values[key]}")
    out = ns.out or file_out or str(io.default_output_dir())
    ordered = {k: values.get(k) for k in OPTIONS}
    return RunConfig(ns.command, ordered, Path(out), sources)


# -- building blocks -----------------------------------------------------------

def _hpp(cfg: RunConfig) -> HppParams | None:
    keys = ("a", "c", "delta", "gamma")
    given = [cfg.get(k) for k in keys]
    if all(v is None for v in given):
        return None
    missing = [k for k, v in zip(keys, given) if v is None]
    if missing:
        raise UsageError("missing " + ", ".join(f"--{k}" for k in missing))
    return HppParams(*given)


def feedback_from(cfg: RunConfig):
    kinds = [cfg.get("feedback") is not None, cfg.get("gammas") is not None, _hpp(cfg) is not None]
    if sum(kinds) != 1:
        raise UsageError("give exactly one feedback: --a/--c/--delta/--gamma/--slope0, --gammas, or --feedback")
    if cfg.get("feedback") is not None:
        return io.read_feedback(cfg.get("feedback"))
    if cfg.get("gammas") is not None:
        return build_multiscale(cfg.get("gammas"), cfg.get("slope0"))
    if cfg.get("slope0") is None:
        raise UsageError("--slope0 is required with --a/--c/--delta/--gamma")
    return build_hpp_feedback(_hpp(cfg), cfg.get("slope0"))


def seed_from(cfg: RunConfig, n: int) -> Segment:
    kinds = [k for k in ("seed-ramp", "seed-constant", "seed-file") if cfg.get(k) is not None]
    if len(kinds) != 1:
        raise UsageError("give exactly one of --seed-ramp, --seed-constant, --seed-file")
    if kinds[0] == "seed-ramp":
        return Segment.ramp(cfg.get("seed-ramp"), n)
    if kinds[0] == "seed-constant":
        return Segment.constant(cfg.get("seed-constant"), n)
    seg = io.read_segment(cfg.get("seed-file"))
    if seg.n != n and cfg.get("n") is not None:
        raise UsageError(f"seed file has n = {seg.n} but --n {n} was given")
    return seg


def _prepare_out(cfg: RunConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    io.write_config(cfg.out_dir, cfg.echo())
    return cfg.out_dir


# -- commands -----------------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> int:
    p = _hpp(cfg)
    if p is None:
        raise UsageError("validate needs --a, --c, --delta and --gamma")
    rep = validate_params(p)
    out = _prepare_out(cfg)
    lines = [f"condition ({c.name}): {'pass' if c.passed else 'FAIL'} margin {c.margin:.17g}"
             for c in rep.checks]
    lines.append(f"valid: {rep.valid}")
    text = "\n".join(lines) + "\n"
    (out / "validation.txt").write_bytes(text.encode("ascii"))
    sys.stdout.write(text)
    return EXIT_OK if rep.valid else EXIT_FAIL


def cmd_simulate(cfg: RunConfig) -> int:
    f = feedback_from(cfg)
    n = cfg.get("n", DEFAULT_N)
    phi = seed_from(cfg, n)
    tr = integrate(f, phi, cfg.get("horizon", DEFAULT_HORIZON))
    out = _prepare_out(cfg)
    io.write_feedback(out / "feedback.txt", f)
    io.emit_csv(out / "trace.csv", io.TRACE_HEADER, io.trace_rows(tr))
    io.emit_csv(out / "zeros.csv", io.ZEROS_HEADER, io.zeros_rows(tr))
    io.emit_csv(out / "phase.csv", io.PHASE_HEADER, io.phase_rows(tr))
    io.emit_svg_polyline(out / "trace.svg", [("x(t)", tr.times, tr.samples)], "t", "x(t)")
    print(f"zeros: {tr.zero_count}; diagnostics: {', '.join(tr.diagnostics) or 'none'}")
    return EXIT_OK


def cmd_sop(cfg: RunConfig) -> int:
    f = feedback_from(cfg)
    n = cfg.get("n", DEFAULT_N)
    phi = seed_from(cfg, n)
    out = _prepare_out(cfg)
    io.write_feedback(out / "feedback.txt", f)
    try:
        sop = iterate_to_fixed_point(f, phi, cfg.get("tol", 1e-6), cfg.get("max-iter", 50),
                                     cfg.get("horizon", DEFAULT_HORIZON))
    except ConvergedToZero as exc:
        print(f"no SOP: {exc}")
        return EXIT_FAIL
    io.write_sop_record(out, sop)
    io.emit_csv(out / "phase.csv", io.PHASE_HEADER, io.phase_rows(sop.trace))
    io.emit_svg_polyline(out / "sop.svg", [("SOP", sop.trace.times, sop.trace.samples)], "t", "x(t)")
    print(f"period {sop.period:.12g}  amplitude {sop.amplitude:.12g}  "
          f"iterations {sop.iterations}  residual {sop.residual:.3g}")
    return EXIT_OK


def cmd_ky(cfg: RunConfig) -> int:
    f = feedback_from(cfg)
    tol = cfg.get("tol", 1e-9)
    step = cfg.get("step", 1e-4)
    n = cfg.get("n", DEFAULT_N)
    ratio = round(1.0 / (n * step))
    if ratio < 1 or abs(ratio * n * step - 1.0) > 1e-9:
        raise UsageError(f"--step {step:g} must divide the delay grid step 1/{n}")
    lo, hi = cfg.get("bracket-lo"), cfg.get("bracket-hi")
    if (lo is None) != (hi is None):
        raise UsageError("give both --bracket-lo and --bracket-hi, or neither to scan")
    brackets = [(lo, hi)] if lo is not None else scan_tau_brackets(f, step=step)
    out = _prepare_out(cfg)
    if not brackets:
        print("no sign change of tau - 1 found")
        return EXIT_FAIL
    status = EXIT_OK
    for k, (blo, bhi) in enumerate(brackets, start=1):
        try:
            ky = find_ky_amplitude(f, blo, bhi, tol, step=step, n=n)
        except ValueError as exc:
            print(exc)
            status = EXIT_FAIL
            continue
        planar = integrate_planar(f, ky.u0, 4.0 * ky.tau, step)
        io.emit_csv(out / f"ky_{k}_planar.csv", io.PLANAR_HEADER, io.planar_rows(f, planar))
        io.emit_csv(out / f"ky_{k}_trace.csv", io.TRACE_HEADER, io.trace_rows(ky.trace))
        io.emit_csv(out / f"ky_{k}_phase.csv", io.PHASE_HEADER, io.phase_rows(ky.trace))
        print(f"u0 {ky.u0:.15g}  tau {ky.tau:.15g}  symmetry {ky.symmetry_residual:.3g}  "
              f"dde residual {ky.dde_residual:.3g}  H drift {planar.max_H_drift:.3g}")
        if not (abs(ky.tau - 1) < tol and ky.symmetry_residual < 1e-6 and ky.dde_residual < 1e-4):
            status = EXIT_FAIL
    return status


def cmd_tau_curve(cfg: RunConfig) -> int:
    f = feedback_from(cfg)
    u_min = cfg.get("u-min", 1e-3 * f.first_piece_width())
    u_max = cfg.get("u-max", 10 * f.x_max)
    if not u_min < u_max:
        raise UsageError("--u-min must be below --u-max")
    num = cfg.get("num", 100)
    step = cfg.get("step", 1e-4)
    us = np.geomspace(u_min, u_max, num)
    taus = np.array([tau(f, u, step).tau for u in us])
    out = _prepare_out(cfg)
    io.emit_csv(out / "tau.csv", io.TAU_HEADER, np.column_stack((us, taus)))
    io.emit_svg_polyline(out / "tau.svg", [("tau", us, taus), ("1", us, np.ones_like(us))],
                         "u0", "tau(u0)")
    print(f"tau from {taus[0]:.6g} to {taus[-1]:.6g} over u0 in [{u_min:.3g}, {u_max:.3g}]")
    return EXIT_OK


def cmd_multiscale(cfg: RunConfig) -> int:
    gammas = cfg.get("gammas")
    if gammas is None:
        raise UsageError("multiscale needs --gammas")
    out = _prepare_out(cfg)
    rep = scenario_multiscale(gammas, cfg.get("seeds"), cfg.get("slope0"),
                              n=cfg.get("n", DEFAULT_N), tol=cfg.get("tol", 1e-6), out_dir=out)
    (out / "report.txt").write_bytes(rep.to_text().encode("utf-8"))
    sys.stdout.write(rep.to_text())
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_scenario(cfg: RunConfig) -> int:
    name = cfg.get("name")
    if name is None:
        raise UsageError("scenario needs --name")
    if name not in SCENARIOS:
        raise UsageError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    out = _prepare_out(cfg)
    kw = {"n": cfg.get("n")} if cfg.get("n") is not None else {}
    rep = run_scenario(name, out_dir=out, **kw)
    (out / "report.txt").write_bytes(rep.to_text().encode("utf-8"))
    sys.stdout.write(rep.to_text())
    return EXIT_OK if rep.passed else EXIT_FAIL


HANDLERS = {
    "validate": cmd_validate, "simulate": cmd_simulate, "sop": cmd_sop, "ky": cmd_ky,
    "tau-curve": cmd_tau_curve, "multiscale": cmd_multiscale, "scenario": cmd_scenario,
}


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
        return HANDLERS[cfg.command](cfg)
    except SystemExit as exc:  # argparse usage errors
        return EXIT_USAGE if exc.code else EXIT_OK
    except (UsageError, FeedbackConstructionError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NonConvergence, ConservationError, NumericalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:  # rejected inputs (cone violations, bad brackets, ratios)
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
