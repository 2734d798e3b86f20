"""Pure-state primitives: states, Hermitian operators, fidelity angle, dispersion."""

from __future__ import annotations

import numpy as np

from qsl.errors import DimensionError, NonHermitianError, NormalizationError, NumericalError

NORM_TOL = 1e-6
HERMITIAN_TOL = 1e-12
IMAG_TOL = 1e-12


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class StateVector:
    """Normalized pure state. Amplitudes are stored as a read-only complex array."""

    __slots__ = ("amplitudes",)

    def __init__(self, amplitudes, *, normalize: bool = False, tol: float = NORM_TOL):
        amp = np.array(amplitudes, dtype=complex).reshape(-1)
        if amp.size < 2:
            raise DimensionError(f"state dimension must be >= 2, got {amp.size}")
        if not np.all(np.isfinite(amp)):
            raise NumericalError("state amplitudes contain NaN/Inf")
        norm = np.linalg.norm(amp)
        if normalize:
            if norm == 0:
                raise NormalizationError("cannot normalize the zero vector")
            amp = amp / norm
        elif abs(norm - 1.0) > tol:
            raise NormalizationError(f"state norm {norm!r} deviates from 1 by more than {tol}")
        self.amplitudes = _frozen(amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def __array__(self, dtype=None, copy=None):
        return self.amplitudes if dtype is None else self.amplitudes.astype(dtype)

    def __repr__(self):
        return f"StateVector({self.amplitudes.tolist()!r})"

    @classmethod
    def basis(cls, dim: int, index: int) -> "StateVector":
        amp = np.zeros(dim, dtype=complex)
        amp[index] = 1.0
        return cls(amp)

    @classmethod
    def uniform(cls, dim: int) -> "StateVector":
        return cls(np.full(dim, 1.0 / np.sqrt(dim), dtype=complex))


class HermitianOperator:
    """Dense Hermitian matrix, validated to 1e-12 and stored symmetrized."""

    __slots__ = ("entries",)

    def __init__(self, entries, *, tol: float = HERMITIAN_TOL):
        mat = np.array(entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionError(f"operator must be square, got shape {mat.shape}")
        if not np.all(np.isfinite(mat)):
            raise NumericalError("operator entries contain NaN/Inf")
        if mat.size and np.max(np.abs(mat - mat.conj().T)) > tol:
            raise NonHermitianError("operator is not Hermitian within tolerance")
        self.entries = _frozen(0.5 * (mat + mat.conj().T))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __add__(self, other):
        return HermitianOperator(self.entries + np.asarray(other))

    def __sub__(self, other):
        return HermitianOperator(self.entries - np.asarray(other))

    def __neg__(self):
        return HermitianOperator(-self.entries)

    def __mul__(self, c):
        return HermitianOperator(self.entries * float(c))

    __rmul__ = __mul__

    def __repr__(self):
        return f"HermitianOperator({self.entries.tolist()!r})"

    @classmethod
    def identity(cls, dim: int) -> "HermitianOperator":
        return cls(np.eye(dim))

    @classmethod
    def zeros(cls, dim: int) -> "HermitianOperator":
        return cls(np.zeros((dim, dim)))


def as_state(psi) -> StateVector:
    return psi if isinstance(psi, StateVector) else StateVector(psi)


def as_operator(op) -> HermitianOperator:
    return op if isinstance(op, HermitianOperator) else HermitianOperator(op)


def _check_dims(*dims: int) -> None:
    if len(set(dims)) != 1:
        raise DimensionError(f"dimension mismatch: {dims}")


def fidelity_angle(a, b) -> float:
    """Return ``arccos |<a|b>|`` in ``[0, pi/2]``.

    Evaluated as ``atan2(|b - <a|b> a|, |<a|b>|)``, which equals the arccos form
    but keeps full accuracy for nearly parallel states.
    """
    a, b = as_state(a), as_state(b)
    _check_dims(a.dim, b.dim)
    c = np.vdot(a.amplitudes, b.amplitudes)
    return float(np.arctan2(np.linalg.norm(b.amplitudes - c * a.amplitudes), abs(c)))


def expectation(op, psi) -> float:
    op, psi = as_operator(op), as_state(psi)
    _check_dims(op.dim, psi.dim)
    val = np.vdot(psi.amplitudes, op.entries @ psi.amplitudes)
    if abs(val.imag) > IMAG_TOL * max(1.0, abs(val.real)):
        raise NonHermitianError(f"imaginary expectation residue {val.imag!r}")
    return float(val.real)


def _second_moment(op: HermitianOperator, psi: StateVector) -> float:
    v = op.entries @ psi.amplitudes
    return float(np.vdot(v, v).real)


def variance(op, psi) -> float:
    """Energy dispersion ``sqrt(<O^2> - <O>^2)``.

    Despite the name this is the standard deviation, which is what the speed
    limits integrate.
    """
    op, psi = as_operator(op), as_state(psi)
    _check_dims(op.dim, psi.dim)
    mean = expectation(op, psi)
    # shift by the mean first: avoids cancellation when <O^2> ~ <O>^2
    shifted = op.entries @ psi.amplitudes - mean * psi.amplitudes
    val = float(np.vdot(shifted, shifted).real)
    scale = max(1.0, _second_moment(op, psi))
    if val < -1e-12 * scale:
        raise NumericalError(f"negative dispersion residue {val!r}")
    return float(np.sqrt(max(val, 0.0)))


def rms_bound(op, psi) -> float:
    """``sqrt(<O^2>)``, an upper bound on :func:`variance` needing no mean."""
    op, psi = as_operator(op), as_state(psi)
    _check_dims(op.dim, psi.dim)
    return float(np.sqrt(_second_moment(op, psi)))


def fidelity_angles(target: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Vectorized :func:`fidelity_angle` of one state against a stack ``(n, dim)``."""
    target = np.asarray(target)
    states = np.asarray(states)
    c = states @ np.conj(target)
    perp = np.linalg.norm(states - c[:, None] * target[None, :], axis=1)
    return np.arctan2(perp, np.abs(c))


def dispersions(ops: np.ndarray, states: np.ndarray) -> np.ndarray:
    """Vectorized :func:`variance` for operator stack ``(n, d, d)`` and states ``(n, d)``."""
    ops = np.asarray(ops)
    states = np.asarray(states)
    if ops.ndim == 2:
        ops = np.broadcast_to(ops, (states.shape[0],) + ops.shape)
    v = np.einsum("nij,nj->ni", ops, states)
    mean = np.einsum("ni,ni->n", states.conj(), v).real
    shifted = v - mean[:, None] * states
    val = np.einsum("ni,ni->n", shifted.conj(), shifted).real
    scale = np.maximum(1.0, np.einsum("ni,ni->n", v.conj(), v).real)
    if np.any(val < -1e-12 * scale):
        raise NumericalError("negative dispersion residue")
    return np.sqrt(np.maximum(val, 0.0))
