"""Two-level system with a rotating transverse field and its Floquet-Magnus reference."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qsl.propagation import TimeDependentGenerator, TimeGrid, Trajectory


@dataclass(frozen=True)
class PeriodicParams:
    delta: float
    h: float
    omega: float

    def __post_init__(self):
        for name in ("delta", "h", "omega"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val!r}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.omega


def periodic_generator(p: PeriodicParams) -> TimeDependentGenerator:
    def batch(ts):
        ts = np.asarray(ts, dtype=float)
        off = 0.5 * p.h * np.exp(-1j * p.omega * ts)
        diag = np.full(ts.shape, 0.5 * p.delta, dtype=complex)
        top = np.stack([diag, off], axis=-1)
        bottom = np.stack([np.conj(off), -diag], axis=-1)
        return np.stack([top, bottom], axis=-2)

    return TimeDependentGenerator(
        2, lambda t: batch(np.array(t)), "periodic", batch=batch, time_scale=1.0 / p.omega, metadata={"params": p}
    )


def reference_matrix(delta_ref: float, h_ref: float) -> np.ndarray:
    return 0.5 * np.array([[delta_ref, h_ref], [h_ref, -delta_ref]], dtype=complex)


def constant_reference_generator(delta_ref: float, h_ref: float) -> TimeDependentGenerator:
    gen = TimeDependentGenerator.constant(reference_matrix(delta_ref, h_ref), "constant_reference")
    gen.metadata.update(delta_ref=delta_ref, h_ref=h_ref)
    return gen


@dataclass(frozen=True)
class FloquetMagnusReference:
    delta_ref: float
    h_ref: float
    generator: TimeDependentGenerator


def floquet_magnus_coefficients(p: PeriodicParams) -> tuple:
    d, h, w = p.delta, p.h, p.omega
    delta_ref = d - h**2 / (2 * w) - d * h**2 / w**2
    h_ref = -d * h / w - d**2 * h / w**2 + h**3 / (2 * w**2)
    return delta_ref, h_ref


def floquet_magnus_reference(p: PeriodicParams) -> FloquetMagnusReference:
    """Second-order high-frequency effective Hamiltonian."""
    dr, hr = floquet_magnus_coefficients(p)
    return FloquetMagnusReference(dr, hr, constant_reference_generator(dr, hr))


def initial_state(p: PeriodicParams) -> np.ndarray:
    """Eigenvector of H(0) with the positive eigenvalue."""
    w, v = np.linalg.eigh(reference_matrix(p.delta, p.h))
    vec = v[:, 1]
    return vec * (abs(vec[0]) / vec[0])


Y_TARGET = np.array([1.0, 1.0j]) / np.sqrt(2.0)


def constant_reference_trajectory(delta_ref: float, h_ref: float, psi0, grid: TimeGrid) -> Trajectory:
    """``exp(-i H_ref t) psi0`` in closed form (grid times measured from 0)."""
    t = grid.points
    r = 0.5 * np.hypot(delta_ref, h_ref)
    c = np.cos(r * t)
    s_over_r = t * np.sinc(r * t / np.pi)
    psi0 = np.asarray(psi0, dtype=complex)
    hpsi = reference_matrix(delta_ref, h_ref) @ psi0
    states = c[:, None] * psi0[None, :] - 1j * s_over_r[:, None] * hpsi[None, :]
    return Trajectory(grid, states, {"closed_form": True})
