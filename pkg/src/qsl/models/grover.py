"""Adiabatic Grover search with the schedule A(t) = A0 (1 - s), B(t) = A0 s."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from qsl.core import HermitianOperator
from qsl.propagation import TimeDependentGenerator

_KINDS = {"protocol1": "protocol1", "1": "protocol1", "protocol2": "protocol2", "2": "protocol2", "linear": "linear"}


def _kind(kind) -> str:
    try:
        return _KINDS[str(kind).lower()]
    except KeyError:
        raise ValueError(f"unknown schedule kind {kind!r}") from None


@dataclass(frozen=True)
class GroverParams:
    n_items: int = 10
    a0: float = 1.0
    t_f: float = 20.0
    k: float = 1.0
    protocol_kind: str = "protocol1"

    def __post_init__(self):
        if int(self.n_items) != self.n_items or self.n_items < 2:
            raise ValueError(f"n_items must be an integer >= 2, got {self.n_items!r}")
        if not self.a0 > 0 or not self.t_f > 0:
            raise ValueError("a0 and t_f must be positive")
        if not self.k >= 1:
            raise ValueError(f"k must be >= 1, got {self.k!r}")
        object.__setattr__(self, "protocol_kind", _kind(self.protocol_kind))


def _check_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < -1e-12) or np.any(tau > 1 + 1e-12) or not np.all(np.isfinite(tau)):
        raise ValueError("normalized time must lie in [0, 1]")
    return np.clip(tau, 0.0, 1.0)


def s_protocol(kind, k: float, tau):
    """Schedule ``s(tau)`` with ``s(0) = 0`` and ``s(1) = 1``."""
    kind = _kind(kind)
    if not k >= 1:
        raise ValueError(f"k must be >= 1, got {k!r}")
    tau = _check_tau(tau)
    if kind == "protocol1":
        out = -np.expm1(-k * tau) / (-np.expm1(-k / 2) * (1.0 + np.exp(-k * (tau - 0.5))))
    elif kind == "protocol2":
        # 1 - b tau is formed as (1 - tau) + tau e^{-k/2} to keep s(1) = 1 for large k
        a = np.expm1(k / 2)
        out = (np.log1p(a * tau) - np.log((1.0 - tau) + tau * np.exp(-k / 2))) / k
    else:
        out = tau.copy()
    # rounding can leave s(1) a few ulp above 1, which would flip the sign of A
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


def s_protocol_rate(kind, k: float, tau):
    """``ds/dtau``."""
    kind = _kind(kind)
    tau = _check_tau(tau)
    if kind == "protocol1":
        e = np.exp(-k * (tau - 0.5))
        c = -np.expm1(-k / 2)
        out = k * (np.exp(-k * tau) * (1 + e) - np.expm1(-k * tau) * e) / (c * (1 + e) ** 2)
    elif kind == "protocol2":
        a, b = np.expm1(k / 2), -np.expm1(-k / 2)
        out = (a / (1 + a * tau) + b / ((1.0 - tau) + tau * np.exp(-k / 2))) / k
    else:
        out = np.ones_like(tau)
    return out if out.ndim else float(out)


def schedule(p: GroverParams, t):
    """``(A(t), B(t))``."""
    s = s_protocol(p.protocol_kind, p.k, np.asarray(t, dtype=float) / p.t_f)
    return p.a0 * (1.0 - s), p.a0 * s


def basis_states(n: int):
    zero = np.zeros(n, dtype=complex)
    zero[0] = 1.0
    plus = np.full(n, 1.0 / np.sqrt(n), dtype=complex)
    return zero, plus


def grover_generator(p: GroverParams) -> TimeDependentGenerator:
    n = p.n_items
    zero, plus = basis_states(n)
    mix = np.eye(n) - np.outer(plus, plus.conj())
    mark = np.eye(n) - np.outer(zero, zero.conj())

    def batch(ts):
        a, b = schedule(p, ts)
        a, b = np.asarray(a)[..., None, None], np.asarray(b)[..., None, None]
        return (a * mix + b * mark).astype(complex)

    dense = np.linspace(0.0, 1.0, 2001)
    fastest = float(np.max(s_protocol_rate(p.protocol_kind, p.k, dense)))
    return TimeDependentGenerator(
        n,
        lambda t: batch(np.array(t)),
        f"grover[{p.protocol_kind},k={p.k:g}]",
        batch=batch,
        domain=(0.0, p.t_f),
        time_scale=p.t_f / max(fastest, 1.0),
        metadata={"params": p},
    )


def grover_theta(n, a, b):
    """Mixing angle on the continuous branch in ``[0, pi]`` (two-argument arctangent)."""
    if n < 3:
        raise ValueError("the mixing-angle closed form needs n_items >= 3")
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any((a == 0) & (b == 0)):
        raise ValueError("mixing angle undefined at A = B = 0")
    num = np.sqrt(n - 1) / n * a
    den = 0.5 * ((1.0 - 2.0 / n) * a - b)
    out = np.arctan2(num, den)
    return out if out.ndim else float(out)


def grover_theta_of_t(p: GroverParams, t):
    a, b = schedule(p, t)
    return grover_theta(p.n_items, a, b)


def grover_theta_rate(p: GroverParams, t):
    """Closed-form ``d theta / dt`` along the schedule."""
    n = p.n_items
    a, b = schedule(p, t)
    sdot = s_protocol_rate(p.protocol_kind, p.k, np.asarray(t, dtype=float) / p.t_f) / p.t_f
    adot, bdot = -p.a0 * sdot, p.a0 * sdot
    y, x = np.sqrt(n - 1) / n * a, 0.5 * ((1 - 2 / n) * a - b)
    ydot, xdot = np.sqrt(n - 1) / n * adot, 0.5 * ((1 - 2 / n) * adot - bdot)
    return (x * ydot - y * xdot) / (x * x + y * y)


def grover_cd_term(n: int, theta_dot: float) -> HermitianOperator:
    """``(i/2) sqrt(N/(N-1)) theta_dot (|0><+| - |+><0|)``."""
    if n < 2:
        raise ValueError("n_items must be >= 2")
    zero, plus = basis_states(n)
    op = np.outer(zero, plus.conj()) - np.outer(plus, zero.conj())
    return HermitianOperator(0.5j * np.sqrt(n / (n - 1)) * float(theta_dot) * op)


def grover_analytic_bounds(p: GroverParams, t):
    """Closed-form ``(theta_l_raw, theta_u_raw)`` for the counterdiabatic reference."""
    theta0 = grover_theta(p.n_items, p.a0, 0.0)
    upper = 0.5 * (np.pi - theta0)
    lower = upper - (grover_theta_of_t(p, t) - theta0)
    upper = np.full_like(np.asarray(lower, dtype=float), upper)
    return (lower, upper) if np.ndim(lower) else (float(lower), float(upper))


def grover_min_time(p: GroverParams, rtol: float = 1e-9) -> float:
    """Earliest ``t`` with ``theta(t) = (pi + theta(0)) / 2``, by bisection."""
    theta0 = grover_theta(p.n_items, p.a0, 0.0)
    threshold = 0.5 * (np.pi + theta0)
    f = lambda t: grover_theta_of_t(p, t) - threshold
    lo, hi = 0.0, p.t_f
    if f(hi) < 0:
        raise ValueError("the schedule never reaches the minimum-time threshold")
    while hi - lo > rtol * p.t_f:
        mid = 0.5 * (lo + hi)
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
