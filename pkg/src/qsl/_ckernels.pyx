# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror qsl._pykernels exactly."""

import numpy as np

from libc.math cimport atan2, cos, sin, sqrt, fabs


def apply_unitaries(const double complex[:, :, ::1] U, const double complex[::1] psi0, Py_ssize_t stride):
    cdef Py_ssize_t m = U.shape[0], d = U.shape[1]
    cdef Py_ssize_t n_out = m // stride + 1
    out_arr = np.empty((n_out, d), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    cdef double complex[::1] cur = np.array(psi0, dtype=np.complex128)
    cdef double complex[::1] nxt = np.empty(d, dtype=np.complex128)
    cdef Py_ssize_t k, i, j, row = 1
    cdef double complex acc
    for i in range(d):
        out[0, i] = cur[i]
    for k in range(m):
        for i in range(d):
            acc = 0
            for j in range(d):
                acc = acc + U[k, i, j] * cur[j]
            nxt[i] = acc
        for i in range(d):
            cur[i] = nxt[i]
        if (k + 1) % stride == 0:
            for i in range(d):
                out[row, i] = cur[i]
            row += 1
    return out_arr


def fixed_reference_trace(double dr, double hr, double delta, double h, double omega,
                          const double complex[::1] psi0, const double complex[::1] target,
                          const double[::1] t_fine, Py_ssize_t stride):
    cdef Py_ssize_t nf = t_fine.shape[0]
    cdef Py_ssize_t ng = (nf - 1) // stride + 1
    theta_arr = np.empty(ng, dtype=np.float64)
    integral_arr = np.empty(ng, dtype=np.float64)
    cdef double[::1] theta = theta_arr
    cdef double[::1] integral = integral_arr
    cdef double r = 0.5 * sqrt(dr * dr + hr * hr)
    cdef double a = delta - dr
    cdef double t, c, s_over_r, x, sig, prev_sig = 0.0, acc = 0.0, ov, perp
    cdef double cre, cim, p1n, p2n, rx, ry, rz, cx, cy, cz
    cdef double complex p1, p2, q, e1, e2
    cdef Py_ssize_t k, g = 0
    for k in range(nf):
        t = t_fine[k]
        c = cos(r * t)
        x = r * t
        if fabs(x) < 1e-8:
            s_over_r = t * (1.0 - x * x / 6.0)
        else:
            s_over_r = sin(x) / r
        # exp(-i H_ref t) psi0 with H_ref = (dr Z + hr X) / 2
        p1 = c * psi0[0] - 1j * s_over_r * 0.5 * (dr * psi0[0] + hr * psi0[1])
        p2 = c * psi0[1] - 1j * s_over_r * 0.5 * (hr * psi0[0] - dr * psi0[1])
        cre = h * cos(omega * t) - hr
        cim = -h * sin(omega * t)
        p1n = p1.real * p1.real + p1.imag * p1.imag
        p2n = p2.real * p2.real + p2.imag * p2.imag
        # |b x r| / 2 with b = (cre, -cim, a) and r the Bloch vector of (p1, p2)
        q = p1.conjugate() * p2
        rx = 2.0 * q.real
        ry = 2.0 * q.imag
        rz = p1n - p2n
        cx = -cim * rz - a * ry
        cy = a * rx - cre * rz
        cz = cre * ry + cim * rx
        sig = 0.5 * sqrt(cx * cx + cy * cy + cz * cz) / (p1n + p2n)
        if k > 0:
            acc = acc + 0.5 * (t - t_fine[k - 1]) * (sig + prev_sig)
        prev_sig = sig
        if k % stride == 0:
            # atan2 of the orthogonal and parallel parts, accurate near zero angle
            q = target[0].conjugate() * p1 + target[1].conjugate() * p2
            ov = sqrt(q.real * q.real + q.imag * q.imag)
            e1 = p1 - q * target[0]
            e2 = p2 - q * target[1]
            perp = sqrt(e1.real * e1.real + e1.imag * e1.imag + e2.real * e2.real + e2.imag * e2.imag)
            theta[g] = atan2(perp, ov)
            integral[g] = acc
            g += 1
    return theta_arr, integral_arr
