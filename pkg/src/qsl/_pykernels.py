"""NumPy implementations of the hot loops; used when the extension is unavailable."""

import numpy as np


def apply_unitaries(U, psi0, stride):
    m, d = U.shape[0], U.shape[1]
    out = np.empty((m // stride + 1, d), dtype=np.complex128)
    cur = np.array(psi0, dtype=np.complex128)
    out[0] = cur
    row = 1
    for k in range(m):
        cur = U[k] @ cur
        if (k + 1) % stride == 0:
            out[row] = cur
            row += 1
    return out


def fixed_reference_trace(dr, hr, delta, h, omega, psi0, target, t_fine, stride):
    t = np.asarray(t_fine, dtype=float)
    r = 0.5 * np.hypot(dr, hr)
    x = r * t
    c = np.cos(x)
    # sin(rt)/r written via sinc so that r = 0 is regular
    s_over_r = t * np.sinc(x / np.pi)
    p1 = c * psi0[0] - 0.5j * s_over_r * (dr * psi0[0] + hr * psi0[1])
    p2 = c * psi0[1] - 0.5j * s_over_r * (hr * psi0[0] - dr * psi0[1])
    a = delta - dr
    coupling = h * np.exp(-1j * omega * t) - hr
    # dispersion of a traceless 2x2 operator b.sigma/2 in a pure state with Bloch
    # vector r is |b x r|/2; unlike <O^2> - <O>^2 this keeps accuracy as sigma -> 0
    p1n, p2n = np.abs(p1) ** 2, np.abs(p2) ** 2
    w = np.conj(p1) * p2
    rx, ry, rz = 2.0 * w.real, 2.0 * w.imag, p1n - p2n
    bx, by = coupling.real, -coupling.imag
    cx, cy, cz = by * rz - a * ry, a * rx - bx * rz, bx * ry - by * rx
    sig = 0.5 * np.sqrt(cx * cx + cy * cy + cz * cz) / (p1n + p2n)
    acc = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(t) * (sig[1:] + sig[:-1]))))
    q1, q2 = p1[::stride], p2[::stride]
    c = np.conj(target[0]) * q1 + np.conj(target[1]) * q2
    perp = np.hypot(np.abs(q1 - c * target[0]), np.abs(q2 - c * target[1]))
    return np.arctan2(perp, np.abs(c)), acc[::stride]
