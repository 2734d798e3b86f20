"""Landau-Zener sweep with a time-dependent phase on the coupling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qsl.propagation import TimeDependentGenerator, TimeGrid

PROTOCOL_ALIASES = {
    "tanh_step": "tanh_step",
    "protocol1": "tanh_step",
    "1": "tanh_step",
    "gaussian": "gaussian",
    "protocol2": "gaussian",
    "2": "gaussian",
    "none": "none",
}


def _kind(kind) -> str:
    try:
        return PROTOCOL_ALIASES[str(kind).lower()]
    except KeyError:
        raise ValueError(f"unknown twist protocol {kind!r}") from None


@dataclass(frozen=True)
class TwistedLZParams:
    delta: float
    v: float
    tau: float
    protocol_kind: str = "tanh_step"

    def __post_init__(self):
        for name in ("delta", "v", "tau"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val!r}")
        object.__setattr__(self, "protocol_kind", _kind(self.protocol_kind))


def phi_protocol(kind, tau: float, t):
    """Twist phase: ``pi (1 + tanh(t/tau))`` or ``pi exp(-t^2/tau^2)``."""
    kind = _kind(kind)
    if tau <= 0:
        raise ValueError("tau must be positive")
    t = np.asarray(t, dtype=float)
    if kind == "tanh_step":
        out = np.pi * (1.0 + np.tanh(t / tau))
    elif kind == "gaussian":
        out = np.pi * np.exp(-((t / tau) ** 2))
    else:
        out = np.zeros_like(t)
    return out if out.ndim else float(out)


def phi_protocol_rate(kind, tau: float, t):
    kind = _kind(kind)
    t = np.asarray(t, dtype=float)
    if kind == "tanh_step":
        out = np.pi / tau / np.cosh(t / tau) ** 2
    elif kind == "gaussian":
        out = -2.0 * np.pi * t / tau**2 * np.exp(-((t / tau) ** 2))
    else:
        out = np.zeros_like(t)
    return out if out.ndim else float(out)


def _lz_stack(detuning, coupling):
    top = np.stack([detuning.astype(complex), coupling], axis=-1)
    bottom = np.stack([np.conj(coupling), -detuning.astype(complex)], axis=-1)
    return np.stack([top, bottom], axis=-2)


def lz_time_scale(delta: float, v: float, tau: float = 0.0) -> float:
    return max(delta / v, 1.0 / np.sqrt(v), tau)


def twisted_lz_generator(p: TwistedLZParams) -> TimeDependentGenerator:
    def batch(ts):
        ts = np.asarray(ts, dtype=float)
        return _lz_stack(p.v * ts, p.delta * np.exp(-1j * phi_protocol(p.protocol_kind, p.tau, ts)))

    return TimeDependentGenerator(
        2,
        lambda t: batch(np.array(t)),
        f"twisted_lz[{p.protocol_kind}]",
        batch=batch,
        time_scale=min(p.tau, lz_time_scale(p.delta, p.v)),
        metadata={"params": p},
    )


def lz_reference_generator(delta: float, v: float) -> TimeDependentGenerator:
    def batch(ts):
        ts = np.asarray(ts, dtype=float)
        return _lz_stack(v * ts, np.full(ts.shape, delta, dtype=complex))

    return TimeDependentGenerator(
        2, lambda t: batch(np.array(t)), "lz", batch=batch, time_scale=lz_time_scale(delta, v)
    )


def rotating_frame_generator(p: TwistedLZParams) -> TimeDependentGenerator:
    """Untwisted LZ with detuning ``v t - phi'(t)/2``; equivalent to the twisted model
    after the frame rotation ``exp(-i phi(t) Z / 2)``."""

    def batch(ts):
        ts = np.asarray(ts, dtype=float)
        det = p.v * ts - 0.5 * phi_protocol_rate(p.protocol_kind, p.tau, ts)
        return _lz_stack(det, np.full(ts.shape, p.delta, dtype=complex))

    return TimeDependentGenerator(2, lambda t: batch(np.array(t)), "lz_rotating", batch=batch)


def frame_rotation(p: TwistedLZParams, t) -> np.ndarray:
    """Stack of ``exp(-i phi(t) Z / 2)`` (diagonal entries only, shape ``(n, 2)``)."""
    phi = np.atleast_1d(phi_protocol(p.protocol_kind, p.tau, t))
    return np.stack([np.exp(-0.5j * phi), np.exp(0.5j * phi)], axis=-1)


def lz_overlap(delta: float, v: float) -> float:
    """Asymptotic survival amplitude ``exp(-pi delta^2 / (2 v))``."""
    if delta <= 0 or v <= 0:
        raise ValueError("delta and v must be positive")
    return float(np.exp(-np.pi * delta**2 / (2.0 * v)))


def twist_variance_majorant(p: TwistedLZParams, window: TimeGrid) -> float:
    """Trapezoidal ``2 delta * integral |sin(phi/2)|`` over the window."""
    t = window.points
    f = 2.0 * p.delta * np.abs(np.sin(0.5 * phi_protocol(p.protocol_kind, p.tau, t)))
    return float(np.sum(0.5 * np.diff(t) * (f[1:] + f[:-1])))


def initial_half_window(p: TwistedLZParams) -> float:
    return 10.0 * lz_time_scale(p.delta, p.v, p.tau)


def endpoint_states(delta: float, v: float, half_window: float, mode: str = "adiabatic"):
    """Initial state at ``-T`` and target at ``+T`` standing in for ``(1, 0)`` at -/+ infinity.

    ``adiabatic`` uses the instantaneous LZ eigenstates that tend to ``(1, 0)``
    (ground state at ``-T``, excited state at ``+T``); ``diabatic`` uses ``(1, 0)``
    itself, whose finite-window overlap carries ``O(delta / (v T))`` ripples.
    """
    if mode == "diabatic":
        e0 = np.array([1.0, 0.0], dtype=complex)
        return e0, e0.copy()
    if mode != "adiabatic":
        raise ValueError(f"unknown endpoint mode {mode!r}")
    states = []
    for t, col in ((-half_window, 0), (half_window, 1)):
        w, vecs = np.linalg.eigh(np.array([[v * t, delta], [delta, -v * t]]))
        vec = vecs[:, col].astype(complex)
        states.append(vec * np.sign(vec[0].real))
    return states[0], states[1]
