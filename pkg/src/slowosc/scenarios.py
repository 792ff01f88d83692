"""End-to-end experiments: construct f, simulate, measure, assert.

Each runner returns a :class:`ScenarioReport` whose ``inputs`` echo every
knob used, so a report can be re-run from its own record. When ``out_dir``
is given the runner also writes its CSV/SVG artifacts there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import io
from .dde import (DEFAULT_N, Segment, dense_value, integrate, level_crossings,
                  value_at)
from .feedback import (HppParams, HprimeParams, Stability, build_hpp_feedback,
                       build_multiscale, build_plateau_feedback, check_condition2,
                       check_hprime, multiscale_params, stability_class,
                       validate_params)
from .kaplan_yorke import (find_ky_amplitude, integrate_planar, phase_plane,
                           polyline_crossings, scan_tau_brackets, tau)
from .return_map import (DECAY, ConvergedToZero, NonConvergence,
                         classify_orbit, edge_track, find_multiple_sops,
                         iterate_to_fixed_point, locate_unstable_sop,
                         verify_contraction_U)

__all__ = [
    "Assertion", "ScenarioReport", "scenario_prop42_timeline",
    "scenario_two_sops_stable_zero", "scenario_ky_coexistence",
    "scenario_multiscale", "SCENARIOS", "run_scenario",
]


@dataclass(frozen=True)
class Assertion:
    description: str
    expected: str
    observed: str
    passed: bool


@dataclass
class ScenarioReport:
    name: str
    inputs: dict[str, Any]
    assertions: list[Assertion] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)
    values: dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def check(self, description: str, passed, expected: str, observed) -> bool:
        if not isinstance(observed, str):
            observed = f"{observed:.12g}" if isinstance(observed, float) else str(observed)
        self.assertions.append(Assertion(description, expected, observed, bool(passed)))
        return bool(passed)

    def failed(self) -> list[Assertion]:
        return [a for a in self.assertions if not a.passed]

    def to_text(self) -> str:
        lines = [f"scenario: {self.name}", f"status: {'PASS' if self.passed else 'FAIL'}", "inputs:"]
        lines += [f"  {k} = {_show(v)}" for k, v in self.inputs.items()]
        lines.append("assertions:")
        for a in self.assertions:
            mark = "PASS" if a.passed else "FAIL"
            lines.append(f"  [{mark}] {a.description}: expected {a.expected}; observed {a.observed}")
        if self.artifacts:
            lines.append("artifacts:")
            lines += [f"  {p}" for p in self.artifacts]
        return "\n".join(lines) + "\n"


def _show(v) -> str:
    if isinstance(v, float):
        return "%.17g" % v
    if isinstance(v, (list, tuple)):
        return ",".join(_show(x) for x in v)
    return str(v)


def _out(out_dir) -> Path | None:
    if out_dir is None:
        return None
    p = Path(out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


# -- long-period construction: timeline of one half cycle --------------------

def scenario_prop42_timeline(p: HppParams, slope0: float = -2.0, *, n: int = DEFAULT_N,
                             tol: float = 1e-6, max_iter: int = 50, n_random: int = 3,
                             seed: int = 0, out_dir=None) -> ScenarioReport:
    """Integrate from phi = -2a and check the half-cycle timeline tau1, tau2, tau3.

    Also runs the return map from the ramp 3a*(s+1) and checks that the SOP
    it converges to is the one traced out from phi = -2a, and that a few
    random histories with values in [-gamma, -2a] settle on the same cycle.
    """
    a, c, d, g = p.a, p.c, p.delta, p.gamma
    rep = ScenarioReport("prop42_timeline", {
        "a": a, "c": c, "delta": d, "gamma": g, "slope0": slope0, "n": n,
        "tol": tol, "max_iter": max_iter, "n_random": n_random, "seed": seed})
    f = build_hpp_feedback(p, slope0)
    h = 1.0 / n
    bound = 2 + c / d + 3 * a / g + (g - 4 * a) / d
    T = 3 * bound + 10
    tr = integrate(f, Segment.constant(-2 * a, n), T)

    s = np.linspace(0.0, 1.0, n + 1)
    lin = float(np.max(np.abs(value_at(tr, s) - (-2 * a + d * s))))
    rep.check("x(t) = -2a + delta*t on [0, 1]", lin < 1e-10, "< 1e-10", lin)

    tau1 = float(level_crossings(tr, -a, after=1 + c / d, direction=1)[0])
    tau2 = float(level_crossings(tr, a, after=tau1, direction=1)[0])
    rep.check("tau2 - tau1 = 2a/gamma", abs(tau2 - tau1 - 2 * a / g) <= 2 * h,
              f"{2 * a / g:.12g} within 2h", tau2 - tau1)
    x_top = dense_value(f, tr, tau1 + 1.0)
    rep.check("x(tau1 + 1) = -a + gamma", abs(x_top - (-a + g)) < 1e-6,
              f"{-a + g:.12g} within 1e-6", x_top)
    tau3 = float(level_crossings(tr, 2 * a, after=tau2 + a / g + 1.0)[0])
    rep.check("tau3 exceeds 2 + c/delta + 3a/gamma + (gamma-4a)/delta", tau3 > bound,
              f"> {bound:.12g}", tau3)
    t_sym = np.arange(0, int(math.floor(min(tau3, tr.t_end - tau3) * n)) + 1) * h
    shifted = np.array([dense_value(f, tr, tau3 + t) for t in t_sym])
    anti = float(np.max(np.abs(shifted + value_at(tr, t_sym))))
    rep.check("x(tau3 + t) = -x(t) for t in [0, tau3]", anti < 1e-5, "< 1e-5", anti)
    rep.check("period 2*tau3 > 4", 2 * tau3 > 4, "> 4", 2 * tau3)

    try:
        sop = iterate_to_fixed_point(f, Segment.ramp(3 * a, n), tol, max_iter)
    except (ConvergedToZero, NonConvergence) as exc:
        rep.check("return map converges from the ramp 3a", False, "SOP", repr(exc))
        return rep
    rep.check("return map converges from the ramp 3a", sop.residual < tol,
              f"residual < {tol:g} in <= {max_iter} iterations",
              f"residual {sop.residual:.3g} after {sop.iterations}")
    rep.check("SOP period > 4", sop.period > 4, "> 4", sop.period)
    rep.check("SOP amplitude > 3a", sop.amplitude > 3 * a, f"> {3 * a:g}", sop.amplitude)
    rep.check("SOP period equals 2*tau3", abs(sop.period - 2 * tau3) < 1e-3 * sop.period,
              f"{2 * tau3:.12g} within 0.1%", sop.period)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_random):
        vals = rng.uniform(-g, -2 * a, n + 1)
        vals[-1] = -2 * a
        tr_r = integrate(f, Segment(n, vals), T)
        z = tr_r.zeros
        period = z[-1] - z[-3]
        k0 = int(round((z[-3] + 1.0) * n))
        amp = float(np.max(np.abs(tr_r.samples[k0:])))
        worst = max(worst, abs(period - sop.period) / sop.period, abs(amp - sop.amplitude) / sop.amplitude)
    if n_random:
        rep.check("random histories in [-gamma, -2a] reach the same cycle", worst < 1e-3,
                  "relative period/amplitude mismatch < 1e-3", worst)

    rep.values.update(tau1=tau1, tau2=tau2, tau3=tau3, bound=bound, sop=sop, trace=tr, f=f)
    out = _out(out_dir)
    if out is not None:
        rep.artifacts += [str(io.emit_csv(out / "trace.csv", io.TRACE_HEADER, io.trace_rows(tr))),
                          str(io.emit_csv(out / "zeros.csv", io.ZEROS_HEADER, io.zeros_rows(tr)))]
        rep.artifacts += [str(q) for q in io.write_sop_record(out, sop)]
        rep.artifacts.append(str(io.emit_svg_polyline(
            out / "trace.svg", [("x(t)", tr.times, tr.samples)], "t", "x(t)",
            "solution from phi = -2a")))
    return rep


# -- stable zero plus a stable SOP: two attractors and the boundary between ---

def _stable_zero_setup(variant: str, slope0: float, mu: float, sigma: float, beta: float,
                       p: HppParams):
    if variant == "plateau":
        hp = HprimeParams(mu, beta, sigma)
        f = build_plateau_feedback(hp, slope0)
        return f, beta / 10.0, {"hprime": check_hprime(f, hp), "two_sop": hp.admits_two_sops()}
    if variant == "hpp":
        f = build_hpp_feedback(p, slope0)
        return f, p.a / 10.0, {"conditions": validate_params(p).valid}
    raise ValueError(f"unknown variant {variant!r}; expected 'plateau' or 'hpp'")


def scenario_two_sops_stable_zero(variant: str = "plateau", *, slope0: float = -1.0,
                                  mu: float = 1.0, sigma: float = 1.0, beta: float = 0.1,
                                  p: HppParams = HppParams(1.0, 0.05, 2 / 3, 4.0),
                                  small_amplitudes: Sequence[float] = (0.01, 0.03),
                                  big_amplitude: float | None = None,
                                  family: tuple[float, float] | None = None,
                                  n: int = DEFAULT_N, T_classify: float = 150.0,
                                  n_bisect: int = 52, persistence_target: float = 50.0,
                                  edge_duration: float = 120.0, out_dir=None) -> ScenarioReport:
    """Zero is stable and a stable SOP exists; bisect the basin boundary between them.

    ``variant="plateau"`` uses f = slope0*x near 0 rising to the plateau -sigma
    at beta; ``variant="hpp"`` uses the long-period construction with a
    stable slope at 0. ``family`` gives the ramp amplitudes (decaying,
    SOP-bound) whose segment family is bisected.
    """
    if stability_class(slope0) is not Stability.STABLE:
        raise ValueError(f"slope0 = {slope0} does not make the zero solution stable")
    f, decay_level, pre = _stable_zero_setup(variant, slope0, mu, sigma, beta, p)
    if big_amplitude is None:
        big_amplitude = 0.5 if variant == "plateau" else 3 * p.a
    if family is None:
        family = (0.05, 0.08) if variant == "plateau" else (0.9, 1.2)
    inputs = {"variant": variant, "slope0": slope0, "n": n, "T_classify": T_classify,
              "n_bisect": n_bisect, "small_amplitudes": tuple(small_amplitudes),
              "big_amplitude": big_amplitude, "family": family,
              "persistence_target": persistence_target, "edge_duration": edge_duration,
              "decay_level": decay_level}
    if variant == "plateau":
        inputs.update(mu=mu, sigma=sigma, beta=beta)
    else:
        inputs.update(a=p.a, c=p.c, delta=p.delta, gamma=p.gamma)
    rep = ScenarioReport(f"two_sops_stable_zero[{variant}]", inputs)
    rep.check("zero solution is linearly stable", True, "STABLE", "STABLE")
    for k, ok in pre.items():
        rep.check(f"hypothesis check: {k}", ok, "True", str(ok))

    if abs(slope0) < 1:
        eps = 0.5 * f.first_piece_width()
        cr = verify_contraction_U(f, eps, 100, n=n)
        rep.check("||P(phi)|| < ||phi|| for small phi", cr.passed, "no failures",
                  f"max ratio {cr.max_ratio:.3g} over {cr.checked} images")
    try:
        sop = iterate_to_fixed_point(f, Segment.ramp(big_amplitude, n))
    except (ConvergedToZero, NonConvergence) as exc:
        rep.check("stable SOP from the large seed", False, "SOP", repr(exc))
        return rep
    rep.check("stable SOP from the large seed", True, "SOP",
              f"period {sop.period:.9g}, amplitude {sop.amplitude:.9g}")
    for amp in small_amplitudes:
        cls = classify_orbit(integrate(f, Segment.ramp(amp, n), T_classify), sop, decay_level)
        rep.check(f"ramp seed {amp:g} decays to 0", cls == DECAY, DECAY, cls)

    try:
        w = locate_unstable_sop(f, Segment.ramp(family[0], n), Segment.ramp(family[1], n),
                                T_classify, n_bisect, decay_level=decay_level, reference=sop)
    except ValueError as exc:
        rep.check("boundary bisection brackets a basin boundary", False, "DECAY/SOP endpoints", str(exc))
        return rep
    rep.check("boundary parameter s* in (0, 1)", 0 < w.s_star < 1, "(0, 1)", w.s_star)
    rep.check("bracket width < 2^-20", w.bracket_width < 2.0 ** -20, f"< {2.0 ** -20:.6g}", w.bracket_width)
    low, high = w.amplitude_band
    rep.check("boundary orbit peak strictly between the attractors",
              low < w.amplitude < high, f"({low:.3g}, {high:.6g})", w.amplitude)
    rep.check(f"boundary orbit stays in the band for >= {persistence_target:g} time units",
              w.persistence >= persistence_target, f">= {persistence_target:g}", w.persistence)
    et = edge_track(f, w, sop, edge_duration, decay_level=decay_level, T_classify=T_classify)
    rep.check(f"edge-tracked boundary orbit stays in the band for >= {persistence_target:g}",
              et.persistence >= persistence_target and et.max_jump < 1e-9,
              f">= {persistence_target:g} with restart jumps < 1e-9",
              f"{et.persistence:.6g} (max jump {et.max_jump:.3g})")
    rep.values.update(f=f, sop=sop, witness=w, edge=et)

    out = _out(out_dir)
    if out is not None:
        rep.artifacts += [str(q) for q in io.write_sop_record(out, sop)]
        wt = w.trace
        rep.artifacts.append(str(io.emit_csv(out / "boundary_trace.csv", io.TRACE_HEADER, io.trace_rows(wt))))
        rep.artifacts.append(str(io.emit_csv(out / "edge_track.csv", io.TRACE_HEADER,
                                             np.column_stack((et.times, et.samples)))))
        rep.artifacts.append(str(io.emit_svg_polyline(
            out / "boundary.svg", [("boundary orbit", wt.times, wt.samples),
                                   ("edge track", et.times, et.samples)],
            "t", "x(t)", "basin boundary between 0 and the stable SOP")))
    return rep


# -- long-period SOP and Kaplan-Yorke solution side by side -----------------

def _axis_crossings(pts: np.ndarray):
    """alpha2 = x where x(t-1) = 0 (x > 0), alpha1 = x(t-1) where x(t) = 0 (x(t-1) > 0)."""
    x, y = pts[:, 0], pts[:, 1]

    def interp(u, w):
        i = np.flatnonzero((u[:-1] < 0) & (u[1:] >= 0) | (u[:-1] > 0) & (u[1:] <= 0))
        lam = u[i] / (u[i] - u[i + 1])
        return w[i] + lam * (w[i + 1] - w[i])

    on_x = interp(y, x)
    on_y = interp(x, y)
    return float(np.max(on_y)), float(np.max(on_x))


def scenario_ky_coexistence(p: HppParams = HppParams(1.0, 0.05, 2 / 3, 4.0), slope0: float = -2.0, *,
                            n: int = DEFAULT_N, tol: float = 1e-9, out_dir=None) -> ScenarioReport:
    """The long-period SOP p and the period-4 Kaplan-Yorke solution q for one f.

    With slope0 < -pi/2, q is sought in (2a - c, 3a) and its phase-plane
    trace is compared with that of p. With a stable slope the tau = 1 scan
    must additionally find a second, smaller root.
    """
    a, c, d, g = p.a, p.c, p.delta, p.gamma
    rep = ScenarioReport("ky_coexistence", {"a": a, "c": c, "delta": d, "gamma": g,
                                            "slope0": slope0, "n": n, "tol": tol})
    f = build_hpp_feedback(p, slope0)
    ok2, lhs, rhs = check_condition2(f, p)
    rep.check("(1/gamma) * int_0^a |f| < a - c", ok2, f"< {rhs:.12g}", lhs)

    sop = iterate_to_fixed_point(f, Segment.ramp(3 * a, n))
    rep.check("SOP p: period > 4", sop.period > 4, "> 4", sop.period)
    rep.check("SOP p: amplitude > 3a", sop.amplitude > 3 * a, f"> {3 * a:g}", sop.amplitude)

    t3a = tau(f, 3 * a).tau
    rep.check("tau(3a) > 1 (orbit from (3a, 0) is slower than period 4)", t3a > 1, "> 1", t3a)
    if d <= a - c:
        pl = integrate_planar(f, 3 * a, 1.0)
        u1, v1 = float(pl.u[-1]), float(pl.v[-1])
        u_exp, v_exp = 3 * a + 0.5 * slope0 * d, d
        if u_exp >= 2 * a:
            err = max(abs(u1 - u_exp), abs(v1 - v_exp))
            rep.check("r(1; 3a) = (3a + slope0*delta/2, delta)", err < 1e-8,
                      f"({u_exp:.12g}, {v_exp:.12g}) within 1e-8", f"({u1:.15g}, {v1:.15g})")

    try:
        ky = find_ky_amplitude(f, 2 * a - c, 3 * a, tol)
    except ValueError as exc:
        rep.check("tau = 1 root in (2a - c, 3a)", False, "sign change", str(exc))
        return rep
    rep.check("KY amplitude alpha in (2a - c, 3a)", 2 * a - c < ky.u0 < 3 * a,
              f"({2 * a - c:g}, {3 * a:g})", ky.u0)
    rep.check("|tau(alpha) - 1| < tol", abs(ky.tau - 1) < tol, f"< {tol:g}", abs(ky.tau - 1))
    rep.check("KY period 4", abs(ky.period - 4) < 1e-6, "4 within 1e-6", ky.period)
    rep.check("KY symmetry x(t) = -x(t-2)", ky.symmetry_residual < 1e-6, "< 1e-6", ky.symmetry_residual)
    rep.check("KY delay-equation residual", ky.dde_residual < 1e-4, "< 1e-4", ky.dde_residual)

    pp = phase_plane(sop.trace, 0.0)
    pq = phase_plane(ky.trace, 0.0, 4.0)
    crossings = polyline_crossings(pp, pq)
    rep.check("phase-plane traces of p and q intersect", crossings >= 1, ">= 1 crossing", crossings)
    alpha1, alpha2 = _axis_crossings(pp)
    rep.check("alpha1 < alpha < alpha2", alpha1 < ky.u0 < alpha2,
              "ordered", f"{alpha1:.9g} < {ky.u0:.9g} < {alpha2:.9g}")

    if stability_class(slope0) is Stability.STABLE:
        brackets = scan_tau_brackets(f)
        roots = [find_ky_amplitude(f, lo, hi, tol).u0 for lo, hi in brackets]
        small = [r for r in roots if r < 2 * a - c]
        rep.check("second KY root below 2a - c", len(small) >= 1, ">= 1 root",
                  ",".join(f"{r:.9g}" for r in roots))
        rep.values["ky_roots"] = roots
    rep.values.update(f=f, sop=sop, ky=ky, alpha1=alpha1, alpha2=alpha2, crossings=crossings)

    out = _out(out_dir)
    if out is not None:
        # time series over [0, 8] for both solutions
        rep.artifacts += [str(q) for q in io.write_sop_record(out, sop, "sop_p")]
        rep.artifacts.append(str(io.emit_csv(out / "ky_q_trace.csv", io.TRACE_HEADER, io.trace_rows(ky.trace))))
        rep.artifacts.append(str(io.emit_csv(out / "phase_p.csv", io.PHASE_HEADER,
                                             io.phase_rows(sop.trace, 0.0))))
        rep.artifacts.append(str(io.emit_csv(out / "phase_q.csv", io.PHASE_HEADER,
                                             io.phase_rows(ky.trace, 0.0, 4.0))))
        k_p = sop.trace.samples.size
        rep.artifacts.append(str(io.emit_svg_polyline(
            out / "time_series.svg",
            [("p", sop.trace.times[:k_p], sop.trace.samples[:k_p]),
             ("q", ky.trace.times, ky.trace.samples)], "t", "x(t)", "p and q")))
        rep.artifacts.append(str(io.emit_svg_polyline(
            out / "phase_plane.svg", [("p", pp[:, 0], pp[:, 1]), ("q", pq[:, 0], pq[:, 1])],
            "x(t)", "x(t-1)", "traces in the (x(t), x(t-1)) plane")))
    return rep


# -- several scales, one SOP each --------------------------------------------

def scenario_multiscale(gammas: Sequence[float] = (5.0, 1.0), seeds: Sequence[float] | None = None,
                        slope0: float | None = None, *, n: int = DEFAULT_N, tol: float = 1e-6,
                        out_dir=None) -> ScenarioReport:
    """One ramp seed per scale (default 3.5*a_n); expect one distinct SOP per scale.

    SOP number n must have amplitude in (3a_n, gamma_n) and period > 4.
    """
    gammas = [float(x) for x in gammas]
    scales = multiscale_params(gammas)
    if seeds is None:
        seeds = [3.5 * s.a for s in scales]
    seeds = [float(x) for x in seeds]
    f = build_multiscale(gammas, slope0)
    rep = ScenarioReport("multiscale", {"gammas": tuple(gammas), "seeds": tuple(seeds),
                                        "slope0": f.slope0, "n": n, "tol": tol})
    sops = find_multiple_sops(f, [Segment.ramp(s, n) for s in seeds], tol)
    rep.check("number of distinct SOPs equals number of scales", len(sops) == len(scales),
              str(len(scales)), len(sops))
    for k, sc in enumerate(scales, start=1):
        hit = [r for r in sops if 3 * sc.a < r.amplitude < sc.gamma]
        if not hit:
            rep.check(f"scale {k}: SOP with amplitude in (3a, gamma)", False,
                      f"({3 * sc.a:g}, {sc.gamma:g})", "none found")
            continue
        r = hit[0]
        rep.check(f"scale {k}: SOP with amplitude in (3a, gamma)", True,
                  f"({3 * sc.a:g}, {sc.gamma:g})", r.amplitude)
        rep.check(f"scale {k}: period > 4", r.period > 4, "> 4", r.period)
    rep.values.update(f=f, sops=sops)

    out = _out(out_dir)
    if out is not None:
        io.write_feedback(out / "feedback.txt", f)
        rep.artifacts.append(str(out / "feedback.txt"))
        series = []
        for k, r in enumerate(sops, start=1):
            rep.artifacts += [str(q) for q in io.write_sop_record(out, r, f"sop_{k}")]
            series.append((f"SOP {k}", r.trace.times, r.trace.samples))
        if series:
            rep.artifacts.append(str(io.emit_svg_polyline(out / "sops.svg", series, "t", "x(t)",
                                                           "one SOP per scale")))
    return rep


SCENARIOS = {
    "prop42_timeline": lambda **kw: scenario_prop42_timeline(HppParams(1.0, 0.05, 2 / 3, 4.0), -2.0, **kw),
    "long_period": lambda **kw: scenario_prop42_timeline(HppParams(1.0, 0.004, 0.05, 4.5), -2.0, **kw),
    "two_sops_stable_zero": lambda **kw: scenario_two_sops_stable_zero("plateau", **kw),
    "two_sops_hpp": lambda **kw: scenario_two_sops_stable_zero("hpp", **kw),
    "ky_coexistence": lambda **kw: scenario_ky_coexistence(**kw),
    "ky_stable_zero": lambda **kw: scenario_ky_coexistence(slope0=-1.0, **kw),
    "multiscale": lambda **kw: scenario_multiscale(**kw),
}


def run_scenario(name: str, **kw) -> ScenarioReport:
    try:
        runner = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}") from None
    return runner(**kw)
