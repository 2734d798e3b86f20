"""Lower/upper speed-limit bounds from a reference evolution.

For a target state, a reference trajectory generated by ``H_ref`` and the
cumulative integral ``I(t)`` of the dispersion of ``H - H_ref`` in the
reference state,

    Theta(target, ref(t)) - I(t)  <=  Theta(target, psi(t))  <=  Theta(target, ref(t)) + I(t).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from qsl.core import as_state, dispersions, fidelity_angles
from qsl.errors import DimensionError
from qsl.propagation import TimeDependentGenerator, TimeGrid, Trajectory

HALF_PI = 0.5 * np.pi
_CHUNK = 4096


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _same_grid(a: TimeGrid, b: TimeGrid) -> None:
    if a != b:
        raise DimensionError(f"grid mismatch: {a} vs {b}")


def cumulative_trapezoid(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values, dtype=float)
    out[1:] = np.cumsum(0.5 * np.diff(t) * (values[1:] + values[:-1]))
    return out


@dataclass(frozen=True)
class CumulativeIntegral:
    grid: TimeGrid
    values: np.ndarray
    integrand: Optional[np.ndarray] = None

    def __post_init__(self):
        values = _readonly(self.values)
        if values.shape != (self.grid.n_steps,):
            raise DimensionError("integral length does not match its grid")
        if values[0] != 0 or np.any(np.diff(values) < 0):
            raise ValueError("cumulative integral must start at 0 and be nondecreasing")
        object.__setattr__(self, "values", values)

    @property
    def final(self) -> float:
        return float(self.values[-1])


def cumulative_variance_integral(
    gen: TimeDependentGenerator,
    ref_gen: TimeDependentGenerator,
    ref_traj: Trajectory,
    use_evolved: bool = False,
    evolved_traj: Optional[Trajectory] = None,
) -> CumulativeIntegral:
    """Trapezoidal ``int_0^t dispersion[H - H_ref, state]`` on the reference grid.

    ``state`` is the reference state, or the evolved state when ``use_evolved``.
    """
    if gen.dim != ref_gen.dim or gen.dim != ref_traj.dim:
        raise DimensionError("generator / trajectory dimensions differ")
    states = ref_traj.states
    if use_evolved:
        if evolved_traj is None:
            raise ValueError("use_evolved requires evolved_traj")
        _same_grid(ref_traj.grid, evolved_traj.grid)
        states = evolved_traj.states
    t = ref_traj.grid.points
    sigma = np.empty(t.size)
    for start in range(0, t.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        sigma[sl] = dispersions(gen.evaluate_many(t[sl]) - ref_gen.evaluate_many(t[sl]), states[sl])
    return CumulativeIntegral(ref_traj.grid, cumulative_trapezoid(sigma, t), _readonly(sigma))


@dataclass(frozen=True)
class BoundTrace:
    """Per-time bounds. Raw values are kept; ``theta_l``/``theta_u`` are clamped to ``[0, pi/2]``."""

    grid: TimeGrid
    theta_ref: np.ndarray
    theta_l_raw: np.ndarray
    theta_u_raw: np.ndarray
    integral: CumulativeIntegral
    theta: Optional[np.ndarray] = None
    std_qsl: Optional[np.ndarray] = None

    @property
    def theta_l(self) -> np.ndarray:
        return np.maximum(self.theta_l_raw, 0.0)

    @property
    def theta_u(self) -> np.ndarray:
        return np.minimum(self.theta_u_raw, HALF_PI)

    @property
    def t(self) -> np.ndarray:
        return self.grid.points

    def sandwich_violation(self) -> float:
        """Largest amount by which theta leaves ``[theta_l_raw, theta_u_raw]`` (<= 0 if inside)."""
        if self.theta is None:
            raise ValueError("trace carries no evolved angle")
        return float(max(np.max(self.theta_l_raw - self.theta), np.max(self.theta - self.theta_u_raw)))


def speed_limit_bounds(
    target,
    ref_traj: Trajectory,
    integral: CumulativeIntegral,
    evolved_traj: Optional[Trajectory] = None,
    std_qsl: Optional[np.ndarray] = None,
) -> BoundTrace:
    target = as_state(target)
    if target.dim != ref_traj.dim:
        raise DimensionError("target and reference dimensions differ")
    _same_grid(ref_traj.grid, integral.grid)
    theta_ref = fidelity_angles(target.amplitudes, ref_traj.states)
    theta = None
    if evolved_traj is not None:
        _same_grid(ref_traj.grid, evolved_traj.grid)
        theta = _readonly(fidelity_angles(target.amplitudes, evolved_traj.states))
    return BoundTrace(
        ref_traj.grid,
        _readonly(theta_ref),
        _readonly(theta_ref - integral.values),
        _readonly(theta_ref + integral.values),
        integral,
        theta,
        None if std_qsl is None else _readonly(std_qsl),
    )


def standard_qsl(gen: TimeDependentGenerator, traj: Trajectory) -> np.ndarray:
    """``int_0^t dispersion[H, psi(t')]`` along the evolved trajectory."""
    zero = TimeDependentGenerator.zero(gen.dim)
    return cumulative_variance_integral(gen, zero, traj, use_evolved=True, evolved_traj=traj).values


def first_crossing_time(t: np.ndarray, values: np.ndarray, level: float) -> Optional[float]:
    """First time the piecewise-linear trace drops to ``level`` (None if never)."""
    below = np.flatnonzero(np.asarray(values) <= level)
    if below.size == 0:
        return None
    i = below[0]
    if i == 0:
        return float(t[0])
    lo, hi = float(t[i - 1]), float(t[i])
    f = lambda x: np.interp(x, t[i - 1 : i + 1], values[i - 1 : i + 1]) - level
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)
