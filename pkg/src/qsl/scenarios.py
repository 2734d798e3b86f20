"""End-to-end scenario runs producing bound traces plus a record of every resolved number."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from qsl import _kernels
from qsl.bounds import BoundTrace, cumulative_variance_integral, speed_limit_bounds, standard_qsl
from qsl.core import HermitianOperator, fidelity_angles
from qsl.errors import ConvergenceError
from qsl.models import grover as grover_model
from qsl.models import periodic as periodic_model
from qsl.models import twisted_lz as lz_model
from qsl.optimizer import optimize_bounds
from qsl.propagation import (
    TimeDependentGenerator,
    TimeGrid,
    adiabatic_state,
    counterdiabatic_generator,
    propagate_converged,
)

CSV_COLUMNS = ("t", "theta", "theta_l_raw", "theta_l", "theta_u_raw", "theta_u", "std_qsl", "variance_integral")


@dataclass
class ScenarioResult:
    scenario: str
    columns: dict
    manifest: dict
    trace: Optional[BoundTrace] = None
    extras: dict = field(default_factory=dict)

    @property
    def final(self) -> dict:
        return {k: (None if v is None else float(v[-1])) for k, v in self.columns.items()}


def _same_ray(a, b) -> bool:
    return abs(np.vdot(a, b)) > 1.0 - 1e-12


def _columns_from_trace(trace: BoundTrace, std: Optional[np.ndarray] = None) -> dict:
    return {
        "t": trace.t,
        "theta": trace.theta,
        "theta_l_raw": trace.theta_l_raw,
        "theta_l": trace.theta_l,
        "theta_u_raw": trace.theta_u_raw,
        "theta_u": trace.theta_u,
        "std_qsl": std,
        "variance_integral": trace.integral.values,
    }


# --- twisted Landau-Zener ------------------------------------------------------------


def lz_default_steps(p: lz_model.TwistedLZParams, half_window: float) -> int:
    h = min(0.05 / (p.v * half_window + p.delta), p.tau / 20.0)
    return max(2001, int(math.ceil(2.0 * half_window / h)) + 1)


def run_twisted_lz(
    p: lz_model.TwistedLZParams,
    *,
    endpoint: str = "adiabatic",
    window_tol: float = 1e-4,
    max_doublings: int = 8,
    steps: Optional[int] = None,
    half_window: Optional[float] = None,
) -> ScenarioResult:
    """Bounds on the survival angle after a full twisted sweep.

    The window ``[-T, T]`` starts at ``T0 = 10 max(delta/v, 1/sqrt(v), tau)`` and
    is doubled until both the reference and the twisted overlaps with the target
    change by less than ``window_tol``. A fixed ``half_window`` skips doubling.
    """
    gen = lz_model.twisted_lz_generator(p)
    ref_gen = lz_model.lz_reference_generator(p.delta, p.v)
    T = lz_model.initial_half_window(p) if half_window is None else float(half_window)
    history = []
    prev = None
    for doubling in range(max_doublings + 1):
        n = steps if steps is not None else lz_default_steps(p, T)
        grid = TimeGrid(-T, T, n)
        psi0, target = lz_model.endpoint_states(p.delta, p.v, T, endpoint)
        ref = propagate_converged(ref_gen, psi0, grid)
        evolved = propagate_converged(gen, psi0, grid)
        cur = (float(np.abs(np.vdot(target, ref.states[-1]))), float(np.abs(np.vdot(target, evolved.states[-1]))))
        history.append((T, n, cur[0], cur[1], ref.diagnostics["substeps"], evolved.diagnostics["substeps"]))
        if half_window is not None:
            break
        if prev is not None and max(abs(cur[0] - prev[0]), abs(cur[1] - prev[1])) < window_tol:
            break
        prev = cur
        if doubling == max_doublings:
            raise ConvergenceError(
                f"twisted LZ window not converged after {max_doublings} doublings (T={T})", estimates=(prev, cur)
            )
        T *= 2.0

    integral = cumulative_variance_integral(gen, ref_gen, ref)
    trace = speed_limit_bounds(target, ref, integral, evolved)
    majorant = lz_model.twist_variance_majorant(p, grid)
    manifest = {
        "scenario": "twisted_lz",
        "delta": p.delta,
        "v": p.v,
        "tau": p.tau,
        "protocol": p.protocol_kind,
        "endpoint": endpoint,
        "window_tol": window_tol,
        "half_window": T,
        "n_steps": grid.n_steps,
        "substeps_reference": ref.diagnostics["substeps"],
        "substeps_evolved": evolved.diagnostics["substeps"],
        "refinement_change_reference": ref.diagnostics["refinement_change"],
        "refinement_change_evolved": evolved.diagnostics["refinement_change"],
        "window_history": history,
        "lz_formula_overlap": lz_model.lz_overlap(p.delta, p.v),
        "reference_final_overlap": history[-1][2],
        "variance_majorant": majorant,
        "backend": _kernels.BACKEND,
    }
    return ScenarioResult(
        "twisted_lz",
        _columns_from_trace(trace),
        manifest,
        trace,
        {"reference": ref, "evolved": evolved, "generator": gen, "ref_generator": ref_gen, "target": target},
    )


# --- Grover --------------------------------------------------------------------------


def grover_default_steps(gen: TimeDependentGenerator, t_f: float) -> int:
    # steep schedules put sharp peaks in the dispersion; 200 points per time scale resolve them
    return max(2001, int(math.ceil(200.0 * t_f / gen.time_scale)) + 1)


def run_grover(p: grover_model.GroverParams, *, steps: Optional[int] = None) -> ScenarioResult:
    gen = grover_model.grover_generator(p)
    zero, plus = grover_model.basis_states(p.n_items)
    n = steps if steps is not None else grover_default_steps(gen, p.t_f)
    grid = TimeGrid(0.0, p.t_f, n)
    evolved = propagate_converged(gen, plus, grid)
    ref = adiabatic_state(gen, plus, grid)
    ref_gen = gen + counterdiabatic_generator(gen)
    integral = cumulative_variance_integral(gen, ref_gen, ref)
    trace = speed_limit_bounds(zero, ref, integral, evolved)
    lower, upper = grover_model.grover_analytic_bounds(p, grid.points)
    manifest = {
        "scenario": "grover",
        "n_items": p.n_items,
        "a0": p.a0,
        "t_f": p.t_f,
        "k": p.k,
        "protocol": p.protocol_kind,
        "n_steps": n,
        "dt_fd": 1e-4 * gen.time_scale,
        "substeps_evolved": evolved.diagnostics["substeps"],
        "refinement_change_evolved": evolved.diagnostics["refinement_change"],
        "adiabatic_method": ref.diagnostics["method"],
        "adiabatic_eigenspace_deviation": ref.diagnostics["eigenspace_deviation"],
        "analytic_theta_u": float(upper[0]),
        "max_dev_theta_u_vs_analytic": float(np.max(np.abs(trace.theta_u_raw - upper))),
        "max_dev_theta_l_vs_analytic": float(np.max(np.abs(trace.theta_l_raw - lower))),
        "backend": _kernels.BACKEND,
    }
    return ScenarioResult(
        "grover",
        _columns_from_trace(trace),
        manifest,
        trace,
        {"reference": ref, "evolved": evolved, "analytic": (lower, upper), "generator": gen},
    )


# --- periodic drive ------------------------------------------------------------------


def periodic_target(p: periodic_model.PeriodicParams, which: str) -> np.ndarray:
    if which in ("initial", "psi0"):
        return periodic_model.initial_state(p)
    if which in ("y", "sigma_y", "plus_i"):
        return periodic_model.Y_TARGET.copy()
    raise ValueError(f"unknown periodic target {which!r}")


def run_periodic(
    p: periodic_model.PeriodicParams,
    *,
    target: str = "initial",
    periods: float = 5.0,
    steps: Optional[int] = None,
    reference: Optional[tuple] = None,
) -> ScenarioResult:
    """Bounds with a constant reference; the Floquet-Magnus one unless ``reference`` is given."""
    psi0 = periodic_model.initial_state(p)
    tgt = periodic_target(p, target)
    dr, hr = periodic_model.floquet_magnus_coefficients(p) if reference is None else reference
    n = steps if steps is not None else int(200 * periods) + 1
    grid = TimeGrid(0.0, periods * p.period, n)
    gen = periodic_model.periodic_generator(p)
    ref_gen = periodic_model.constant_reference_generator(dr, hr)
    evolved = propagate_converged(gen, psi0, grid)
    ref = periodic_model.constant_reference_trajectory(dr, hr, psi0, grid)
    integral = cumulative_variance_integral(gen, ref_gen, ref)
    std = standard_qsl(gen, evolved)
    trace = speed_limit_bounds(tgt, ref, integral, evolved, std_qsl=std)
    manifest = {
        "scenario": "periodic",
        "delta": p.delta,
        "h": p.h,
        "omega": p.omega,
        "target": target,
        "periods": periods,
        "t_end": grid.t_end,
        "n_steps": n,
        "delta_ref": dr,
        "h_ref": hr,
        "substeps_evolved": evolved.diagnostics["substeps"],
        "refinement_change_evolved": evolved.diagnostics["refinement_change"],
        "backend": _kernels.BACKEND,
    }
    # the standard bound concerns the angle to psi(0) only
    std_col = std if _same_ray(tgt, psi0) else None
    return ScenarioResult(
        "periodic",
        _columns_from_trace(trace, std_col),
        manifest,
        trace,
        {"reference": ref, "evolved": evolved, "std_qsl": std, "generator": gen, "target": tgt},
    )


def run_periodic_optimized(
    p: periodic_model.PeriodicParams,
    *,
    target: str = "initial",
    periods: float = 10.0,
    steps: Optional[int] = None,
    substeps: int = 32,
) -> ScenarioResult:
    psi0 = periodic_model.initial_state(p)
    tgt = periodic_target(p, target)
    n = steps if steps is not None else 201
    grid = TimeGrid(0.0, periods * p.period, n)
    gen = periodic_model.periodic_generator(p)
    evolved = propagate_converged(gen, psi0, grid)
    theta = fidelity_angles(tgt, evolved.states)
    opt = optimize_bounds(p, tgt, psi0, grid, substeps=substeps)
    std = standard_qsl(gen, evolved) if _same_ray(tgt, psi0) else None
    columns = {
        "t": grid.points,
        "theta": theta,
        "theta_l_raw": opt.theta_l_opt,
        "theta_l": np.maximum(opt.theta_l_opt, 0.0),
        "theta_u_raw": opt.theta_u_opt,
        "theta_u": np.minimum(opt.theta_u_opt, 0.5 * np.pi),
        "std_qsl": std,
        "variance_integral": None,
    }
    manifest = {
        "scenario": "periodic_optimized",
        "delta": p.delta,
        "h": p.h,
        "omega": p.omega,
        "target": target,
        "periods": periods,
        "t_end": grid.t_end,
        "n_steps": n,
        "quadrature_substeps": substeps,
        "seed_delta_ref": opt.seed[0],
        "seed_h_ref": opt.seed[1],
        "total_evaluations": int(opt.evaluations.sum()),
        "max_evaluations_per_search": int(opt.evaluations.max()),
        "substeps_evolved": evolved.diagnostics["substeps"],
        "refinement_change_evolved": evolved.diagnostics["refinement_change"],
        "backend": _kernels.BACKEND,
    }
    return ScenarioResult("periodic_optimized", columns, manifest, None, {"optimized": opt, "evolved": evolved})


# --- custom --------------------------------------------------------------------------

_COEFFS = {
    "1": lambda t, w: np.ones_like(t),
    "t": lambda t, w: t,
    "cos": lambda t, w: np.cos(w * t),
    "sin": lambda t, w: np.sin(w * t),
}


def term_generator(terms, dim: int, label: str) -> TimeDependentGenerator:
    """``H(t) = sum_j f_j(t) M_j`` with ``f_j`` one of ``1``, ``t``, ``cos(w t)``, ``sin(w t)``.

    ``terms`` is a list of ``(matrix, coefficient, omega)``.
    """
    mats = [np.asarray(m, dtype=complex) for m, _, _ in terms]
    for m in mats:
        if m.shape != (dim, dim):
            raise ValueError(f"term matrix has shape {m.shape}, expected {(dim, dim)}")
        HermitianOperator(m)
    coeffs = []
    for _, c, w in terms:
        if str(c) not in _COEFFS:
            raise ValueError(f"unknown coefficient {c!r}; use one of {sorted(_COEFFS)}")
        coeffs.append((_COEFFS[str(c)], float(w)))

    def batch(ts):
        ts = np.asarray(ts, dtype=float)
        out = np.zeros(ts.shape + (dim, dim), dtype=complex)
        for m, (f, w) in zip(mats, coeffs):
            out += f(ts, w)[..., None, None] * m
        return out

    return TimeDependentGenerator(dim, lambda t: batch(np.array(t)), label, batch=batch)


def run_custom(
    hamiltonian_terms,
    reference_terms,
    psi0,
    target,
    grid: TimeGrid,
) -> ScenarioResult:
    psi0 = np.asarray(psi0, dtype=complex)
    dim = psi0.size
    gen = term_generator(hamiltonian_terms, dim, "custom")
    ref_gen = term_generator(reference_terms, dim, "custom_reference") if reference_terms else TimeDependentGenerator.zero(dim)
    evolved = propagate_converged(gen, psi0, grid)
    ref = propagate_converged(ref_gen, psi0, grid)
    integral = cumulative_variance_integral(gen, ref_gen, ref)
    std = standard_qsl(gen, evolved)
    trace = speed_limit_bounds(target, ref, integral, evolved, std_qsl=std)
    std_col = std if _same_ray(target, psi0) else None
    manifest = {
        "scenario": "custom",
        "dim": dim,
        "t_start": grid.t_start,
        "t_end": grid.t_end,
        "n_steps": grid.n_steps,
        "substeps_evolved": evolved.diagnostics["substeps"],
        "substeps_reference": ref.diagnostics["substeps"],
        "refinement_change_evolved": evolved.diagnostics["refinement_change"],
        "refinement_change_reference": ref.diagnostics["refinement_change"],
        "backend": _kernels.BACKEND,
    }
    return ScenarioResult("custom", _columns_from_trace(trace, std_col), manifest, trace, {"reference": ref, "evolved": evolved})


# --- sweep ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("delta_tau", "v_over_delta2", "theta_final", "theta_l", "theta_u")


def sweep_point(args):
    protocol, delta_tau, v_ratio, endpoint = args
    res = run_twisted_lz(lz_model.TwistedLZParams(1.0, v_ratio, delta_tau, protocol), endpoint=endpoint)
    f = res.final
    return (delta_tau, v_ratio, f["theta"], f["theta_l"], f["theta_u"]), res.manifest


def uniform_axis(upper: float, count: int) -> np.ndarray:
    """``count`` evenly spaced points in ``(0, upper]``."""
    return upper * np.arange(1, count + 1) / count


def run_sweep(
    protocol: str,
    delta_tau_values,
    v_values,
    *,
    endpoint: str = "adiabatic",
    jobs: int = 1,
):
    """Twisted-LZ scatter over a parameter box, rows in row-major (delta_tau outer) order."""
    tasks = [(protocol, float(dt), float(v), endpoint) for dt in delta_tau_values for v in v_values]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(sweep_point, tasks))  # map preserves task order
    else:
        results = [sweep_point(t) for t in tasks]
    rows = [r for r, _ in results]
    manifests = [m for _, m in results]
    return rows, manifests
