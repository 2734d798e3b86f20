"""Time evolution, spectra and counterdiabatic driving for dense generators.

States are advanced with the fourth-order Magnus integrator at the two
Gauss-Legendre nodes of each step; every step is an exact unitary, so the
norm is conserved to rounding error irrespective of the step size.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from qsl import _kernels
from qsl.core import HermitianOperator, StateVector, as_state, fidelity_angle
from qsl.errors import ConvergenceError, DegeneracyError, DimensionError, NumericalError

NORM_DRIFT_TOL = 1e-9
REFINEMENT_TOL = 1e-6
CD_REFINEMENT_TOL = 1e-5
GAP_TOL = 1e-8

_GAUSS = (0.5 - np.sqrt(3.0) / 6.0, 0.5 + np.sqrt(3.0) / 6.0)
_CHUNK = 4096


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_steps`` points from ``t_start`` to ``t_end`` inclusive."""

    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.t_start) and np.isfinite(self.t_end)):
            raise ValueError("grid endpoints must be finite")
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValueError(f"n_steps must be an integer >= 2, got {self.n_steps}")

    @cached_property
    def points(self) -> np.ndarray:
        pts = np.linspace(self.t_start, self.t_end, self.n_steps)
        pts.setflags(write=False)
        return pts

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / (self.n_steps - 1)

    def refined(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t_start, self.t_end, (self.n_steps - 1) * factor + 1)

    def __len__(self):
        return self.n_steps


class TimeDependentGenerator:
    """A Hamiltonian-valued function of time.

    ``func(t)`` returns a ``(dim, dim)`` array; ``batch(ts)`` (optional) returns
    the stacked ``(len(ts), dim, dim)`` array and is used on hot paths.
    ``domain`` restricts where the generator may be queried (finite-difference
    stencils stay inside it) and ``time_scale`` sets the default derivative step.
    """

    def __init__(
        self,
        dim: int,
        func: Callable[[float], np.ndarray],
        label: str = "",
        *,
        batch: Optional[Callable[[np.ndarray], np.ndarray]] = None,
        domain: Optional[tuple] = None,
        time_scale: float = 1.0,
        metadata: Optional[dict] = None,
    ):
        self.dim = int(dim)
        self._func = func
        self._batch = batch
        self.label = label
        self.domain = domain
        self.time_scale = float(time_scale)
        self.metadata = dict(metadata or {})

    def evaluate(self, t: float) -> HermitianOperator:
        mat = np.asarray(self._func(float(t)), dtype=complex)
        if not np.all(np.isfinite(mat)):
            raise NumericalError(f"generator {self.label!r} returned NaN/Inf at t={t!r}")
        if mat.shape != (self.dim, self.dim):
            raise DimensionError(f"generator {self.label!r} returned shape {mat.shape}")
        return HermitianOperator(mat)

    def evaluate_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if self._batch is not None:
            mats = np.asarray(self._batch(ts), dtype=complex)
        else:
            mats = np.array([np.asarray(self._func(float(t)), dtype=complex) for t in ts])
            mats = mats.reshape(ts.shape + (self.dim, self.dim))
        if not np.all(np.isfinite(mats)):
            raise NumericalError(f"generator {self.label!r} returned NaN/Inf")
        return mats

    def __call__(self, t):
        return self.evaluate(t)

    def __add__(self, other: "TimeDependentGenerator") -> "TimeDependentGenerator":
        return _combine(self, other, 1.0)

    def __sub__(self, other: "TimeDependentGenerator") -> "TimeDependentGenerator":
        return _combine(self, other, -1.0)

    def __repr__(self):
        return f"TimeDependentGenerator(dim={self.dim}, label={self.label!r})"

    @classmethod
    def constant(cls, op, label: str = "constant") -> "TimeDependentGenerator":
        mat = np.array(HermitianOperator(op).entries)
        return cls(
            mat.shape[0],
            lambda t: mat,
            label,
            batch=lambda ts: np.broadcast_to(mat, np.shape(ts) + mat.shape),
            metadata={"constant": True},
        )

    @classmethod
    def zero(cls, dim: int) -> "TimeDependentGenerator":
        return cls.constant(np.zeros((dim, dim)), "zero")


def _intersect_domains(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return (max(a[0], b[0]), min(a[1], b[1]))


def _combine(a: TimeDependentGenerator, b: TimeDependentGenerator, sign: float):
    if a.dim != b.dim:
        raise DimensionError(f"cannot combine generators of dims {a.dim} and {b.dim}")
    op = "+" if sign > 0 else "-"
    return TimeDependentGenerator(
        a.dim,
        lambda t: np.asarray(a._func(t)) + sign * np.asarray(b._func(t)),
        f"({a.label}{op}{b.label})",
        batch=lambda ts: a.evaluate_many(ts) + sign * b.evaluate_many(ts),
        domain=_intersect_domains(a.domain, b.domain),
        time_scale=min(a.time_scale, b.time_scale),
    )


@dataclass(frozen=True)
class Trajectory:
    """States on a grid; ``states`` is a read-only ``(n_steps, dim)`` array."""

    grid: TimeGrid
    states: np.ndarray
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        states = np.array(self.states, dtype=complex)
        if states.ndim != 2 or states.shape[0] != self.grid.n_steps:
            raise DimensionError(f"expected {self.grid.n_steps} states, got array of shape {states.shape}")
        if not np.all(np.isfinite(states)):
            raise NumericalError("trajectory contains NaN or Inf amplitudes")
        drift = np.max(np.abs(np.linalg.norm(states, axis=1) - 1.0))
        if drift > NORM_DRIFT_TOL:
            raise NumericalError(f"trajectory norm drift {drift:.3e} exceeds {NORM_DRIFT_TOL}")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self):
        return self.states.shape[0]

    def __getitem__(self, i) -> StateVector:
        return StateVector(self.states[i])

    @property
    def final(self) -> StateVector:
        return self[-1]

    def norm_drift(self) -> float:
        return float(np.max(np.abs(np.linalg.norm(self.states, axis=1) - 1.0)))


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    vectors: np.ndarray  # columns are eigenvectors

    @property
    def eigenvectors(self) -> list:
        return [StateVector(self.vectors[:, i]) for i in range(self.vectors.shape[1])]


def _fix_phases(vecs: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of each column real positive (ties -> lowest index)."""
    mags = np.abs(vecs)
    top = mags.max(axis=-2, keepdims=True)
    idx = np.argmax(mags >= top - 1e-12, axis=-2)
    pivot = np.take_along_axis(vecs, idx[..., None, :], axis=-2)
    return vecs * (np.abs(pivot) / pivot)


def eigensystem(op) -> Spectrum:
    """Ascending eigenvalues and phase-fixed orthonormal eigenvectors."""
    mat = op.entries if isinstance(op, HermitianOperator) else HermitianOperator(op).entries
    try:
        w, v = np.linalg.eigh(mat)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolve failed: {exc}") from exc
    w.setflags(write=False)
    v = _fix_phases(v)
    v.setflags(write=False)
    return Spectrum(w, v)


# --- counterdiabatic driving -------------------------------------------------------
#
# The counterdiabatic term is written through the eigenprojectors of H(t),
#   H_cd = i sum_c (dP_c/dt) P_c ,
# which equals i sum_n (1 - |n><n|)|dn><n| for a non-degenerate spectrum but is
# gauge free and also valid when H(t) carries a persistent degenerate block (the
# Grover Hamiltonian does). Derivatives come from a finite-difference stencil in
# time; projector products at two stencil points are
#   sum_c P_c(a) P_c(b) = V_a (S o V_a^+ V_b) V_b^+
# where S marks eigenvalue pairs in the same cluster.

_CENTRAL = ((-1.0, 1.0), (-0.5, 0.5), (0.5, 0.5))
_FORWARD = ((1.0, 2.0, 3.0), (-2.5, 4.0, -1.5), (3.0, -3.0, 1.0))
_BACKWARD = ((-1.0, -2.0, -3.0), (2.5, -4.0, 1.5), (3.0, -3.0, 1.0))


def _cluster_labels(evals: np.ndarray, gap_tol: float) -> np.ndarray:
    scale = np.maximum(1.0, np.max(np.abs(evals), axis=-1, keepdims=True))
    gaps = np.diff(evals, axis=-1) > gap_tol * scale
    zero = np.zeros(evals.shape[:-1] + (1,), dtype=int)
    return np.concatenate([zero, np.cumsum(gaps, axis=-1)], axis=-1)


def _cd_stencil(gen: TimeDependentGenerator, ts: np.ndarray, dt: float, stencil, gap_tol: float):
    offsets, dweights, vweights = stencil
    vecs, labels = [], []
    for off in offsets:
        mats = gen.evaluate_many(ts + off * dt)
        w, v = np.linalg.eigh(mats)
        vecs.append(v)
        labels.append(_cluster_labels(w, gap_tol))
    for lab in labels[1:]:
        bad = np.any(lab != labels[0], axis=-1)
        if np.any(bad):
            t_bad = ts[np.argmax(bad)]
            raise DegeneracyError(f"eigenvalue clusters change near t={t_bad!r} (gap closure)")
    same = labels[0][:, :, None] == labels[0][:, None, :]
    d = gen.dim
    out = np.zeros((ts.size, d, d), dtype=complex)
    for i, a in enumerate(dweights):
        for j, b in enumerate(vweights):
            if i == j:
                prod = np.broadcast_to(np.eye(d), out.shape)
            else:
                va, vb = vecs[i], vecs[j]
                overlap = np.conj(np.swapaxes(va, -1, -2)) @ vb
                prod = va @ (same * overlap) @ np.conj(np.swapaxes(vb, -1, -2))
            out += (a * b) * prod
    out *= 1j / dt
    return 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))


def _cd_batch(gen: TimeDependentGenerator, ts, dt: float, gap_tol: float = GAP_TOL) -> np.ndarray:
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    out = np.empty((ts.size, gen.dim, gen.dim), dtype=complex)
    lo, hi = gen.domain if gen.domain is not None else (-np.inf, np.inf)
    eps = 1e-12 * max(1.0, abs(lo) if np.isfinite(lo) else 1.0, abs(hi) if np.isfinite(hi) else 1.0)
    fwd = ts - dt < lo - eps
    bwd = ~fwd & (ts + dt > hi + eps)
    mid = ~(fwd | bwd)
    for mask, stencil in ((mid, _CENTRAL), (fwd, _FORWARD), (bwd, _BACKWARD)):
        if np.any(mask):
            out[mask] = _cd_stencil(gen, ts[mask], dt, stencil, gap_tol)
    return out


def default_fd_step(gen: TimeDependentGenerator) -> float:
    return 1e-4 * gen.time_scale


def counterdiabatic_term(
    gen: TimeDependentGenerator, t: float, dt_fd: Optional[float] = None, *, check: bool = True
) -> HermitianOperator:
    """Counterdiabatic term of ``gen`` at time ``t`` by finite differences.

    With ``check`` the result is recomputed at half the step and a change above
    1e-5 (operator norm) raises :class:`ConvergenceError`.
    """
    dt = default_fd_step(gen) if dt_fd is None else float(dt_fd)
    if gen.metadata.get("constant"):
        return HermitianOperator.zeros(gen.dim)
    full = _cd_batch(gen, [t], dt)[0]
    if check:
        half = _cd_batch(gen, [t], 0.5 * dt)[0]
        change = np.linalg.norm(full - half, 2)
        if change > CD_REFINEMENT_TOL:
            raise ConvergenceError(
                f"counterdiabatic term at t={t!r} changed by {change:.3e} when dt_fd was halved",
                estimates=(full, half),
            )
    return HermitianOperator(full)


def counterdiabatic_generator(gen: TimeDependentGenerator, dt_fd: Optional[float] = None) -> TimeDependentGenerator:
    """The counterdiabatic term as a generator (batched, no per-point refinement check)."""
    dt = default_fd_step(gen) if dt_fd is None else float(dt_fd)
    if gen.metadata.get("constant"):
        zero = TimeDependentGenerator.zero(gen.dim)
        zero.label = f"cd[{gen.label}]"
        return zero
    return TimeDependentGenerator(
        gen.dim,
        lambda t: _cd_batch(gen, [t], dt)[0],
        f"cd[{gen.label}]",
        batch=lambda ts: _cd_batch(gen, np.ravel(ts), dt).reshape(np.shape(ts) + (gen.dim, gen.dim)),
        domain=gen.domain,
        time_scale=gen.time_scale,
        metadata={"dt_fd": dt},
    )


# --- propagation -------------------------------------------------------------------


def _exp_minus_i(K: np.ndarray) -> np.ndarray:
    """``exp(-i K)`` for a stack of Hermitian matrices."""
    if K.shape[-1] == 2:
        k0 = 0.5 * (K[:, 0, 0] + K[:, 1, 1]).real
        kz = 0.5 * (K[:, 0, 0] - K[:, 1, 1]).real
        kx, ky = K[:, 1, 0].real, K[:, 1, 0].imag
        norm = np.sqrt(kx * kx + ky * ky + kz * kz)
        c = np.cos(norm)
        s = np.sinc(norm / np.pi)  # sin(|k|)/|k|
        phase = np.exp(-1j * k0)
        U = np.empty_like(K)
        U[:, 0, 0] = phase * (c - 1j * s * kz)
        U[:, 1, 1] = phase * (c + 1j * s * kz)
        U[:, 0, 1] = phase * (-1j * s * (kx - 1j * ky))
        U[:, 1, 0] = phase * (-1j * s * (kx + 1j * ky))
        return U
    w, v = np.linalg.eigh(K)
    return (v * np.exp(-1j * w)[:, None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def _step_unitaries(gen: TimeDependentGenerator, t_left: np.ndarray, h: float) -> np.ndarray:
    nodes = np.concatenate([t_left + _GAUSS[0] * h, t_left + _GAUSS[1] * h])
    mats = gen.evaluate_many(nodes)
    h1, h2 = mats[: t_left.size], mats[t_left.size :]
    K = 0.5 * h * (h1 + h2) - 1j * (np.sqrt(3.0) / 12.0) * h * h * (h2 @ h1 - h1 @ h2)
    K = 0.5 * (K + np.conj(np.swapaxes(K, -1, -2)))
    return np.ascontiguousarray(_exp_minus_i(K))


def _evolve(gen: TimeDependentGenerator, psi0: np.ndarray, grid: TimeGrid, substeps: int) -> np.ndarray:
    n_intervals = grid.n_steps - 1
    total = n_intervals * substeps
    h = grid.dt / substeps
    out = np.empty((grid.n_steps, gen.dim), dtype=complex)
    out[0] = psi0
    cur = psi0
    per_chunk = max(1, _CHUNK // substeps) * substeps
    row = 1
    for start in range(0, total, per_chunk):
        stop = min(total, start + per_chunk)
        t_left = grid.t_start + np.arange(start, stop) * h
        U = _step_unitaries(gen, t_left, h)
        chunk_states = _kernels.apply_unitaries(U, np.ascontiguousarray(cur), substeps)
        k = chunk_states.shape[0] - 1
        out[row : row + k] = chunk_states[1:]
        row += k
        cur = chunk_states[-1]
    return out


def propagate(
    gen: TimeDependentGenerator,
    psi0,
    grid: TimeGrid,
    *,
    substeps: int = 1,
    check: bool = True,
    tol: float = REFINEMENT_TOL,
) -> Trajectory:
    """Solve ``i d/dt psi = H(t) psi`` and record the state at every grid point.

    Each grid interval is split into ``substeps`` Magnus steps. With ``check``
    the run is repeated at twice the resolution; if the final states differ by
    more than ``tol`` in Euclidean norm (which bounds the change of the overlap
    with any fixed state) a :class:`ConvergenceError` carrying both final states
    is raised.
    """
    psi0 = as_state(psi0)
    if psi0.dim != gen.dim:
        raise DimensionError(f"state dim {psi0.dim} != generator dim {gen.dim}")
    states = _evolve(gen, psi0.amplitudes, grid, substeps)
    diagnostics = {"substeps": substeps, "backend": _kernels.BACKEND}
    if check:
        fine = _evolve(gen, psi0.amplitudes, grid, 2 * substeps)
        change = float(np.linalg.norm(states[-1] - fine[-1]))
        diagnostics["refinement_change"] = change
        if change > tol:
            raise ConvergenceError(
                f"propagation of {gen.label!r} not converged: final state changed by {change:.3e} "
                f"(> {tol:g}) when the step was halved (n_steps={grid.n_steps}, substeps={substeps})",
                estimates=(states[-1], fine[-1]),
            )
    return Trajectory(grid, states, diagnostics)


def propagate_converged(
    gen: TimeDependentGenerator,
    psi0,
    grid: TimeGrid,
    *,
    substeps: int = 1,
    max_doublings: int = 12,
    tol: float = REFINEMENT_TOL,
) -> Trajectory:
    """:func:`propagate` with the number of substeps doubled until the check passes."""
    last = None
    for _ in range(max_doublings + 1):
        try:
            return propagate(gen, psi0, grid, substeps=substeps, tol=tol)
        except ConvergenceError as exc:
            last = exc
            substeps *= 2
    raise last


def _grid_eigh(gen: TimeDependentGenerator, ts: np.ndarray):
    """Chunked eigensolve of ``gen`` along ``ts``; yields ``(slice, w, v)``."""
    for start in range(0, ts.size, _CHUNK):
        sl = slice(start, min(ts.size, start + _CHUNK))
        w, v = np.linalg.eigh(gen.evaluate_many(ts[sl]))
        yield sl, w, v


def _tracked_cluster(gen: TimeDependentGenerator, psi0: StateVector, t0: float):
    w, v = np.linalg.eigh(gen.evaluate_many([t0])[0])
    labels = _cluster_labels(w, GAP_TOL)
    weights = np.abs(np.conj(v).T @ psi0.amplitudes) ** 2
    cluster_weight = np.bincount(labels, weights=weights)
    target_cluster = int(np.argmax(cluster_weight))
    if cluster_weight[target_cluster] < 1 - 1e-8:
        raise ValueError("initial state is not an eigenstate of the generator at t_start")
    members = np.flatnonzero(labels == target_cluster)
    return int(members[0]), members.size


def _is_real(gen: TimeDependentGenerator, ts: np.ndarray) -> bool:
    return all(
        not np.any(gen.evaluate_many(ts[i : i + _CHUNK]).imag) for i in range(0, ts.size, _CHUNK)
    )


def _transported(gen: TimeDependentGenerator, psi0: StateVector, grid: TimeGrid, index: int) -> np.ndarray:
    """Dynamical phase times the parallel-transported eigenvector of level ``index``."""
    ts = grid.points
    states = np.empty((ts.size, gen.dim), dtype=complex)
    energies = np.empty(ts.size)
    prev = None
    for sl, w, v in _grid_eigh(gen, ts):
        labels = _cluster_labels(w, GAP_TOL)
        alone = np.sum(labels == labels[:, [index]], axis=1) == 1
        if not np.all(alone):
            t_bad = ts[sl][np.argmin(alone)]
            raise DegeneracyError(f"tracked level {index} is degenerate near t={t_bad!r}; use method='cd'")
        vec = v[:, :, index]
        first = psi0.amplitudes if prev is None else prev
        links = np.empty(vec.shape[0], dtype=complex)
        links[0] = np.vdot(first, vec[0])
        links[1:] = np.einsum("ni,ni->n", np.conj(vec[:-1]), vec[1:])
        if np.min(np.abs(links)) < 0.5:
            t_bad = ts[sl][np.argmin(np.abs(links))]
            raise ConvergenceError(
                f"eigenvector of level {index} moved too far between grid points near t={t_bad!r}; refine the grid",
                estimates=float(np.min(np.abs(links))),
            )
        # align each vector to its (already aligned) predecessor so that <n|dn/dt> = 0
        angles = np.cumsum(np.angle(links))
        vec = vec * np.exp(-1j * angles)[:, None]
        states[sl] = vec
        energies[sl] = w[:, index]
        prev = vec[-1]
    # trapezoid plus the Euler-Maclaurin end correction, with dE/dt = <n|dH/dt|n>
    h = grid.dt
    rate = np.empty(ts.size)
    for start in range(0, ts.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        dh = _generator_rate(gen, ts[sl], default_fd_step(gen))
        rate[sl] = np.einsum("ni,nij,nj->n", np.conj(states[sl]), dh, states[sl]).real
    dyn = np.zeros(ts.size)
    dyn[1:] = np.cumsum(0.5 * h * (energies[1:] + energies[:-1])) - h * h / 12.0 * (rate[1:] - rate[0])
    return states * np.exp(-1j * dyn)[:, None]


def _generator_rate(gen: TimeDependentGenerator, ts: np.ndarray, dt: float) -> np.ndarray:
    """Second-order finite-difference ``dH/dt``, one-sided at the edges of the domain."""
    lo, hi = gen.domain if gen.domain is not None else (-np.inf, np.inf)
    out = np.empty((ts.size, gen.dim, gen.dim), dtype=complex)
    fwd = ts - dt < lo
    bwd = ~fwd & (ts + dt > hi)
    mid = ~(fwd | bwd)
    for mask, sign in ((fwd, 1.0), (bwd, -1.0)):
        if np.any(mask):
            t = ts[mask]
            out[mask] = sign * (-1.5 * gen.evaluate_many(t) + 2.0 * gen.evaluate_many(t + sign * dt)
                                - 0.5 * gen.evaluate_many(t + 2 * sign * dt)) / dt
    if np.any(mid):
        t = ts[mid]
        out[mid] = (gen.evaluate_many(t + dt) - gen.evaluate_many(t - dt)) / (2 * dt)
    return out


def adiabatic_state(
    gen: TimeDependentGenerator,
    psi0,
    grid: TimeGrid,
    *,
    method: str = "auto",
    dt_fd: Optional[float] = None,
    substeps: int = 1,
    tol: float = 1e-5,
) -> Trajectory:
    """Adiabatically-transported eigenstate.

    ``method="transport"`` multiplies the parallel-transported instantaneous
    eigenvector by its accumulated dynamical phase; it needs a non-degenerate
    tracked level. Its geometric phase is exact for real generators and only
    second-order accurate in the grid step otherwise. ``method="cd"`` evolves
    ``psi0`` under ``gen + H_cd`` and also handles a degenerate tracked
    eigenspace. ``method="auto"`` picks transport for a real generator with a
    non-degenerate tracked level and cd otherwise. ``psi0`` must be an eigenstate
    of ``gen`` at ``grid.t_start``; the result is checked to stay in the tracked
    eigenspace to within a fidelity angle of ``tol``.
    """
    psi0 = as_state(psi0)
    index, size = _tracked_cluster(gen, psi0, grid.t_start)
    if method == "auto":
        method = "transport" if size == 1 and _is_real(gen, grid.points) else "cd"
    if method == "transport":
        if size != 1:
            raise DegeneracyError("the initial eigenspace is degenerate; use method='cd'")
        traj = Trajectory(grid, _transported(gen, psi0, grid, index), {"method": "transport", "substeps": 0})
    elif method == "cd":
        driven = gen + counterdiabatic_generator(gen, dt_fd)
        driven.label = f"{gen.label}+cd"
        traj = propagate_converged(driven, psi0, grid, substeps=substeps)
        traj.diagnostics["method"] = "cd"
    else:
        raise ValueError(f"unknown method {method!r}")

    deviation = 0.0
    for sl, w, v in _grid_eigh(gen, grid.points):
        labels = _cluster_labels(w, GAP_TOL)
        in_cluster = labels == labels[:, [index]]
        amps = np.einsum("nji,nj->ni", np.conj(v), traj.states[sl])
        captured = np.sqrt(np.sum(np.abs(amps) ** 2 * in_cluster, axis=1))
        deviation = max(deviation, float(np.max(np.arccos(np.minimum(captured, 1.0)))))
    traj.diagnostics["eigenspace_deviation"] = deviation
    traj.diagnostics["eigen_index"] = index
    if deviation > tol:
        raise ConvergenceError(
            f"adiabatic state left its eigenspace by angle {deviation:.3e}", estimates=(deviation, tol)
        )
    return traj


def final_overlap(traj: Trajectory, target) -> float:
    return float(np.cos(fidelity_angle(target, traj.final)))
