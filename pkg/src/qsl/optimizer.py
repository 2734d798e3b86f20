"""Per-time tightening of the bounds over constant two-level references.

At each grid time the upper bound is minimized and the lower bound maximized
over ``(delta_ref, h_ref)`` with two independent Nelder-Mead searches. Each
search starts from the better of the previous grid point's optimum and the
Floquet-Magnus seed, so the result can never be worse than the seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from qsl import _kernels
from qsl.errors import NumericalError
from qsl.models.periodic import PeriodicParams, floquet_magnus_coefficients
from qsl.propagation import TimeGrid

SIMPLEX_OFFSET = 0.05
XATOL = 1e-6
MAX_EVALS = 500


@dataclass(frozen=True)
class OptimizedBoundTrace:
    grid: TimeGrid
    theta_u_opt: np.ndarray
    theta_l_opt: np.ndarray
    argmin_u: np.ndarray  # (n, 2) rows of (delta_ref, h_ref)
    argmax_l: np.ndarray
    evaluations: np.ndarray  # (n, 2) evaluations of the upper / lower search
    seed: tuple
    seed_theta_u: np.ndarray
    seed_theta_l: np.ndarray
    history: list = field(default_factory=list, repr=False, compare=False)


class ReferenceObjective:
    """Bounds for a constant reference ``(delta_ref, h_ref)`` at every grid time.

    The dispersion integral is accumulated on a grid refined ``substeps`` times.
    Results are cached per candidate, keyed by the parameters rounded to 1e-12.
    """

    def __init__(self, p: PeriodicParams, target, psi0, grid: TimeGrid, *, substeps: int = 32, record: bool = False):
        self.p = p
        self.target = np.ascontiguousarray(target, dtype=complex)
        self.psi0 = np.ascontiguousarray(psi0, dtype=complex)
        self.grid = grid
        self.substeps = int(substeps)
        if grid.t_start != 0:
            raise ValueError("the reference evolution starts at t = 0; grid must start there")
        self.t_fine = np.ascontiguousarray(grid.refined(self.substeps).points)
        self.cache: dict = {}
        self.n_computed = 0
        self.visited: Optional[list] = [] if record else None

    def trace(self, dr: float, hr: float):
        key = (round(float(dr), 12), round(float(hr), 12))
        hit = self.cache.get(key)
        if hit is None:
            theta, integral = _kernels.fixed_reference_trace(
                float(dr), float(hr), self.p.delta, self.p.h, self.p.omega,
                self.psi0, self.target, self.t_fine, self.substeps,
            )
            hit = (theta, integral)
            self.cache[key] = hit
            self.n_computed += 1
        return hit

    def bounds(self, x, j: int):
        theta, integral = self.trace(x[0], x[1])
        lower, upper = theta[j] - integral[j], theta[j] + integral[j]
        if self.visited is not None:
            self.visited.append((j, float(x[0]), float(x[1]), lower, upper))
        return lower, upper


def _search(fun, start: np.ndarray, scale: float):
    simplex = np.array([start, start + [SIMPLEX_OFFSET * scale, 0.0], start + [0.0, SIMPLEX_OFFSET * scale]])
    best_trace = []

    def safe(x):
        val = fun(x)
        return np.inf if not np.isfinite(val) else val

    res = minimize(
        safe,
        start,
        method="Nelder-Mead",
        callback=lambda xk: best_trace.append(safe(xk)),
        options={"initial_simplex": simplex, "xatol": XATOL * scale, "fatol": np.inf, "maxfev": MAX_EVALS},
    )
    return res, best_trace


def optimize_bounds(
    p: PeriodicParams,
    target,
    psi0,
    grid: TimeGrid,
    *,
    substeps: int = 32,
    seed: Optional[tuple] = None,
    record: bool = False,
) -> OptimizedBoundTrace:
    """Minimize the upper and maximize the lower bound independently at each grid time."""
    objective = ReferenceObjective(p, target, psi0, grid, substeps=substeps, record=record)
    seed = np.array(floquet_magnus_coefficients(p) if seed is None else seed, dtype=float)
    n = grid.n_steps
    u_opt, l_opt = np.empty(n), np.empty(n)
    arg_u, arg_l = np.empty((n, 2)), np.empty((n, 2))
    evals = np.zeros((n, 2), dtype=int)
    seed_theta, seed_int = objective.trace(*seed)
    seed_u, seed_l = seed_theta + seed_int, seed_theta - seed_int
    warm_u, warm_l = seed.copy(), seed.copy()
    history = []

    for j in range(n):
        f_u = lambda x, j=j: objective.bounds(x, j)[1]
        f_l = lambda x, j=j: -objective.bounds(x, j)[0]
        row = []
        for col, (fun, warm, seed_val) in enumerate(((f_u, warm_u, seed_u[j]), (f_l, warm_l, -seed_l[j]))):
            start = warm if fun(warm) <= seed_val else seed
            res, best_trace = _search(fun, np.array(start, dtype=float), p.delta)
            if not np.isfinite(res.fun):
                raise NumericalError(f"reference search failed at t={grid.points[j]!r}; seed was {tuple(seed)}")
            evals[j, col] = res.nfev
            row.append(res)
            if record:
                history.append((j, col, best_trace))
        res_u, res_l = row
        warm_u, warm_l = res_u.x, res_l.x
        u_opt[j], arg_u[j] = res_u.fun, res_u.x
        l_opt[j], arg_l[j] = -res_l.fun, res_l.x

    if record:
        history.append(("visited", objective.visited))
    for a in (u_opt, l_opt, arg_u, arg_l, evals, seed_u, seed_l):
        a.setflags(write=False)
    return OptimizedBoundTrace(grid, u_opt, l_opt, arg_u, arg_l, evals, tuple(seed), seed_u, seed_l, history)
