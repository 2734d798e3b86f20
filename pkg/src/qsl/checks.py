"""Acceptance checks, shared by ``qsl selftest`` and the acceptance test module.

Each check returns a :class:`CheckResult`. ``fast=True`` shrinks sample counts so
the whole subset runs in well under a minute; the slow optimizer check is
skipped in that mode.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from qsl.bounds import cumulative_variance_integral, speed_limit_bounds, standard_qsl
from qsl.core import fidelity_angles
from qsl.models import grover as gm
from qsl.models import periodic as pm
from qsl.models import twisted_lz as lzm
from qsl.optimizer import optimize_bounds
from qsl.propagation import TimeDependentGenerator, TimeGrid, counterdiabatic_term, propagate, propagate_converged
from qsl import scenarios

SANDWICH_TOL = 2e-6
LZ_SLICE_V = 2.0
LZ_SLICE_DELTA_TAU = 0.1
GROVER_TU = 1.2490457723982544  # (pi - atan(3/4)) / 2, high-precision oracle


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    skipped: bool = False

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        return f"[{status}] {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name, fn, *args, **kwargs) -> CheckResult:
    start = time.perf_counter()
    passed, detail = fn(*args, **kwargs)
    return CheckResult(name, bool(passed), detail, time.perf_counter() - start)


# 1 ---------------------------------------------------------------------------------


def _lz_formula(fast: bool):
    worst, parts = 0.0, []
    for v in (0.5, 1.0, 2.0, 4.0):
        res = scenarios.run_twisted_lz(lzm.TwistedLZParams(1.0, v, 1.0, "none"))
        err = abs(res.manifest["reference_final_overlap"] - lzm.lz_overlap(1.0, v))
        worst = max(worst, err)
        parts.append(f"v={v:g}:{err:.1e}")
    return worst <= 1e-3, f"max |overlap - exp(-pi/2v)| = {worst:.2e} <= 1e-3 ({', '.join(parts)})"


def check_lz_formula(fast: bool = False) -> CheckResult:
    return _timed("1 Landau-Zener formula", _lz_formula, fast)


# 2 ---------------------------------------------------------------------------------


def lz_slices(points: int):
    """The four twisted-LZ slices: both protocols along fixed v and fixed delta tau."""
    out = []
    for kind in ("tanh_step", "gaussian"):
        out.append((kind, "v", [(LZ_SLICE_DELTA_TAU, v) for v in scenarios.uniform_axis(4.0, points)]))
        out.append((kind, "delta_tau", [(dt, LZ_SLICE_V) for dt in scenarios.uniform_axis(1.0, points)]))
    return out


def random_hermitian(rng, dim: int) -> np.ndarray:
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


def random_state(rng, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def random_terms(rng, dim: int, n_terms: int):
    terms = []
    for _ in range(n_terms):
        coeff = str(rng.choice(["1", "t", "cos", "sin"]))
        terms.append((random_hermitian(rng, dim) / np.sqrt(dim), coeff, float(rng.uniform(0.5, 4.0))))
    return terms


def random_scenario(rng):
    dim = int(rng.integers(2, 5))
    ham = random_terms(rng, dim, int(rng.integers(1, 4)))
    ref = random_terms(rng, dim, int(rng.integers(0, 3)))
    grid = TimeGrid(0.0, float(rng.uniform(0.5, 4.0)), 2001)
    return ham, ref, random_state(rng, dim), random_state(rng, dim), grid


def _sandwich(fast: bool):
    points = 5 if fast else 20
    n_random = 20 if fast else 200
    worst, count = -np.inf, 0
    for kind, axis, pairs in lz_slices(points):
        for dt, v in pairs:
            res = scenarios.run_twisted_lz(lzm.TwistedLZParams(1.0, v, dt, kind))
            worst = max(worst, res.trace.sandwich_violation())
            count += 1
    worst_lz = worst
    rng = np.random.default_rng(20240601)
    for _ in range(n_random):
        ham, ref, psi0, target, grid = random_scenario(rng)
        res = scenarios.run_custom(ham, ref, psi0, target, grid)
        worst = max(worst, res.trace.sandwich_violation())
    return worst <= SANDWICH_TOL, (
        f"max violation {worst:.2e} <= {SANDWICH_TOL:g} over {count} twisted-LZ runs "
        f"(worst {worst_lz:.2e}) and {n_random} random scenarios"
    )


def check_sandwich(fast: bool = False) -> CheckResult:
    return _timed("2 bound sandwich", _sandwich, fast)


# 3 ---------------------------------------------------------------------------------


def majorant_grid():
    return [(dt, v) for dt in (0.1, 0.3, 0.5, 0.7, 1.0) for v in (0.5, 2.0)]


def _majorant(fast: bool):
    pairs = majorant_grid()[::3] if fast else majorant_grid()
    worst = -np.inf
    for kind in ("tanh_step", "gaussian"):
        for dt, v in pairs:
            p = lzm.TwistedLZParams(1.0, v, dt, kind)
            res = scenarios.run_twisted_lz(p)
            slack = res.trace.integral.final - res.manifest["variance_majorant"]
            worst = max(worst, slack)
    return worst <= 1e-8, f"max (integral - majorant) = {worst:.2e} <= 1e-8 over {2 * len(pairs)} runs"


def check_majorant(fast: bool = False) -> CheckResult:
    return _timed("3 variance majorant", _majorant, fast)


# 4 ---------------------------------------------------------------------------------


@lru_cache(maxsize=None)
def grover_run(kind: str, k: float) -> scenarios.ScenarioResult:
    """Cached N = 10, A(0) t_f = 20 run; several checks share these."""
    return scenarios.run_grover(gm.GroverParams(10, 1.0, 20.0, k, kind))


def _grover_closed_forms(fast: bool):
    ks = (1.0, 10.0) if fast else (1.0, 10.0, 20.0)
    worst = 0.0
    for kind in ("protocol1", "protocol2"):
        for k in ks:
            res = grover_run(kind, k)
            worst = max(worst, res.manifest["max_dev_theta_u_vs_analytic"], res.manifest["max_dev_theta_l_vs_analytic"])
    p = gm.GroverParams(10, 1.0, 20.0, 1.0, "protocol1")
    tu = gm.grover_analytic_bounds(p, 0.0)[1]
    tu_err = abs(tu - GROVER_TU)
    t_f = 20.0
    tmin = gm.grover_min_time(gm.GroverParams(10, 1.0, t_f, 1.0, "linear"))
    tmin_err = abs(tmin - 0.5 * t_f) / t_f
    ok = worst <= 1e-4 and tu_err <= 1e-4 and tmin_err <= 1e-6
    return ok, (
        f"max pointwise deviation {worst:.2e} <= 1e-4; theta_u = {tu:.6f} (err {tu_err:.1e}); "
        f"linear t_min/t_f = {tmin / t_f:.9f} (err {tmin_err:.1e} <= 1e-6)"
    )


def check_grover_closed_forms(fast: bool = False) -> CheckResult:
    return _timed("4 Grover closed forms", _grover_closed_forms, fast)


# 5 ---------------------------------------------------------------------------------


def _path_independence(fast: bool):
    ks = (1.0, 10.0) if fast else (1.0, 5.0, 10.0, 20.0)
    worst, finals = 0.0, []
    for k in ks:
        pair = [grover_run(kind, k).trace.integral.final for kind in ("protocol1", "protocol2")]
        finals.extend(pair)
        worst = max(worst, abs(pair[0] - pair[1]))
    spread = max(finals) - min(finals)
    return worst <= 1e-4 and spread <= 1e-4, (
        f"max |I1 - I2| = {worst:.2e}, spread over k = {spread:.2e} (both <= 1e-4)"
    )


def check_path_independence(fast: bool = False) -> CheckResult:
    return _timed("5 path independence", _path_independence, fast)


# 6 ---------------------------------------------------------------------------------


def _cd_oracle(fast: bool):
    worst = 0.0
    cases = [("protocol1", 1.0), ("protocol2", 20.0)] if fast else [("protocol1", 1.0), ("protocol1", 20.0),
                                                                      ("protocol2", 1.0), ("protocol2", 20.0)]
    for kind, k in cases:
        p = gm.GroverParams(10, 1.0, 20.0, k, kind)
        gen = gm.grover_generator(p)
        for t in np.linspace(0.05, 0.95, 20) * p.t_f:
            numeric = np.array(counterdiabatic_term(gen, t).entries)
            exact = np.array(gm.grover_cd_term(10, gm.grover_theta_rate(p, t)).entries)
            worst = max(worst, float(np.linalg.norm(numeric - exact, 2)))
    return worst <= 1e-5, f"max operator-norm error {worst:.2e} <= 1e-5 at 20 interior times x {len(cases)} schedules"


def check_cd_oracle(fast: bool = False) -> CheckResult:
    return _timed("6 counterdiabatic oracle", _cd_oracle, fast)


# 7 ---------------------------------------------------------------------------------


def _floquet_magnus(fast: bool):
    dr, hr = pm.floquet_magnus_coefficients(pm.PeriodicParams(1.0, 0.2, 20.0))
    coeff_err = max(abs(dr - 0.9989), abs(hr + 0.01049))
    worst = -np.inf
    for h in (0.2, 0.8):
        for target in ("initial", "y"):
            res = scenarios.run_periodic(pm.PeriodicParams(1.0, h, 20.0), target=target, periods=5.0)
            worst = max(worst, res.trace.sandwich_violation())
    ok = coeff_err <= 1e-6 and worst <= SANDWICH_TOL
    return ok, (
        f"coefficients ({dr:.6f}, {hr:.6f}) err {coeff_err:.1e} <= 1e-6; "
        f"max sandwich violation over 5 periods {worst:.2e} <= {SANDWICH_TOL:g}"
    )


def check_floquet_magnus(fast: bool = False) -> CheckResult:
    return _timed("7 Floquet-Magnus reference", _floquet_magnus, fast)


# 8 ---------------------------------------------------------------------------------


def optimizer_case(h: float, n_points: int = 200, periods: float = 10.0):
    p = pm.PeriodicParams(1.0, h, 20.0)
    psi0 = pm.initial_state(p)
    grid = TimeGrid(0.0, periods * p.period, n_points)
    return p, psi0, grid, optimize_bounds(p, psi0, psi0, grid)


def _optimizer(fast: bool):
    parts, ok = [], True
    for h in (0.2, 0.8):
        p, psi0, grid, opt = optimizer_case(h)
        dom_u = float(np.max(opt.theta_u_opt - opt.seed_theta_u))
        dom_l = float(np.max(opt.seed_theta_l - opt.theta_l_opt))
        later = grid.points > 0  # at t = 0 both bounds equal the rounding-level angle of psi0 with itself
        opt_pos = float(np.max(opt.theta_l_opt[later]))
        seed_max = float(np.max(opt.seed_theta_l[later]))
        case_ok = dom_u <= 0 and dom_l <= 0 and opt_pos > 0 and seed_max < 0
        ok &= case_ok
        parts.append(
            f"h={h:g}: dominance slack u {dom_u:.1e} l {dom_l:.1e}; max opt theta_l {opt_pos:.3e} > 0; "
            f"max seed theta_l {seed_max:.3e} < 0 [{'ok' if case_ok else 'violated'}]"
        )
    return ok, "; ".join(parts)


def check_optimizer(fast: bool = False) -> CheckResult:
    if fast:
        return CheckResult("8 optimizer dominance", True, "slow check, not part of the fast subset", skipped=True)
    return _timed("8 optimizer dominance", _optimizer, fast)


# 9 ---------------------------------------------------------------------------------


def zero_reference_bounds(gen: TimeDependentGenerator, evolved):
    """Bounds with target psi(0), H_ref = 0 and the dispersion taken in the evolved state."""
    zero = TimeDependentGenerator.zero(gen.dim)
    ref = propagate(zero, evolved.states[0], evolved.grid, check=False)
    integral = cumulative_variance_integral(gen, zero, ref, use_evolved=True, evolved_traj=evolved)
    return speed_limit_bounds(evolved.states[0], ref, integral, evolved)


def _standard_qsl(fast: bool):
    runs = [
        scenarios.run_twisted_lz(lzm.TwistedLZParams(1.0, 2.0, 0.1, "gaussian")),
        grover_run("protocol1", 1.0),
        scenarios.run_periodic(pm.PeriodicParams(1.0, 0.2, 20.0), target="initial", periods=5.0),
        scenarios.run_periodic(pm.PeriodicParams(1.0, 0.8, 20.0), target="initial", periods=5.0),
    ]
    rng = np.random.default_rng(7)
    evolveds = [(r.extras["generator"], r.extras["evolved"]) for r in runs]
    for _ in range(5 if fast else 20):
        ham, _, psi0, _, grid = random_scenario(rng)
        gen = scenarios.term_generator(ham, psi0.size, "random")
        evolveds.append((gen, propagate_converged(gen, psi0, grid)))
    reduce_err, dominance = 0.0, -np.inf
    for gen, evolved in evolveds:
        std = standard_qsl(gen, evolved)
        bt = zero_reference_bounds(gen, evolved)
        reduce_err = max(reduce_err, float(np.max(np.abs(bt.theta_u_raw - std))))
        theta = fidelity_angles(evolved.states[0], evolved.states)
        dominance = max(dominance, float(np.max(theta - std)))

    per = runs[2]
    t = per.trace.t
    std_p = per.extras["std_qsl"]
    std_max = float(np.max(std_p))
    ref_u_max = float(np.max(per.trace.theta_u_raw))
    ok = reduce_err <= 1e-6 and dominance <= 1e-6 and std_max > np.pi / 2 and ref_u_max <= np.pi / 2
    return ok, (
        f"|theta_u(H_ref=0) - standard| {reduce_err:.1e} <= 1e-6; max(theta - standard) {dominance:.1e} <= 1e-6; "
        f"periodic h=0.2 over 5 periods (t <= {t[-1]:.4f}): max standard bound {std_max:.4f} "
        f"{'>' if std_max > np.pi / 2 else 'does not exceed'} pi/2, max reference theta_u {ref_u_max:.4f} "
        f"{'<=' if ref_u_max <= np.pi / 2 else '>'} pi/2"
    )


def check_standard_qsl(fast: bool = False) -> CheckResult:
    return _timed("9 standard QSL consistency", _standard_qsl, fast)


# 10 --------------------------------------------------------------------------------


def _hygiene(fast: bool):
    from qsl.cli import main

    runs = [
        scenarios.run_twisted_lz(lzm.TwistedLZParams(1.0, 2.0, 0.1, "gaussian")),
        scenarios.run_grover(gm.GroverParams(10, 1.0, 20.0, 1.0, "protocol1")),
        scenarios.run_periodic(pm.PeriodicParams(1.0, 0.2, 20.0), target="y", periods=5.0),
    ]
    drift, halving = 0.0, 0.0
    for r in runs:
        for traj in (r.extras["evolved"], r.extras["reference"]):
            drift = max(drift, traj.norm_drift())
        evolved = r.extras["evolved"]
        gen = r.extras["generator"]
        target = r.extras.get("target", evolved.states[-1])
        if r.scenario == "grover":
            target = gm.basis_states(10)[0]
        coarse = evolved.states[-1]
        g = evolved.grid
        fine = propagate(gen, evolved.states[0], TimeGrid(g.t_start, g.t_end, 2 * g.n_steps - 1),
                         substeps=evolved.diagnostics["substeps"], check=False).states[-1]
        halving = max(halving, abs(abs(np.vdot(target, coarse)) - abs(np.vdot(target, fine))))

    identical = True
    with tempfile.TemporaryDirectory() as tmp:
        from qsl.config import EXAMPLE_CONFIGS

        cfg = Path(tmp) / "grover.yaml"
        cfg.write_text(EXAMPLE_CONFIGS["grover.yaml"])
        outputs = []
        for i in range(2):
            out = Path(tmp) / f"run{i}"
            if main(["run", str(cfg), "--out", str(out)]) != 0:
                return False, "CLI run failed"
            outputs.append((out / "grover.csv").read_bytes())
        identical = outputs[0] == outputs[1]
    ok = drift <= 1e-9 and halving <= 1e-6 and identical
    return ok, (
        f"norm drift {drift:.1e} <= 1e-9; grid-halving overlap drift {halving:.1e} <= 1e-6; "
        f"repeated CSVs {'byte-identical' if identical else 'differ'}"
    )


def check_hygiene(fast: bool = False) -> CheckResult:
    return _timed("10 numerics hygiene", _hygiene, fast)


ALL_CHECKS = (
    check_lz_formula,
    check_sandwich,
    check_majorant,
    check_grover_closed_forms,
    check_path_independence,
    check_cd_oracle,
    check_floquet_magnus,
    check_optimizer,
    check_standard_qsl,
    check_hygiene,
)


def run_checks(fast: bool = False):
    return [check(fast=fast) for check in ALL_CHECKS]
