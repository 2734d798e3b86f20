import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qsl import _kernels, _pykernels
from qsl.core import dispersions

BACKENDS = _kernels.backends()


def random_unitaries(rng, m, d):
    a = rng.normal(size=(m, d, d)) + 1j * rng.normal(size=(m, d, d))
    q, _ = np.linalg.qr(a)
    return np.ascontiguousarray(q)


def periodic_case(rng):
    psi0 = rng.normal(size=2) + 1j * rng.normal(size=2)
    psi0 /= np.linalg.norm(psi0)
    target = rng.normal(size=2) + 1j * rng.normal(size=2)
    target /= np.linalg.norm(target)
    t = np.ascontiguousarray(np.linspace(0.0, 3.0, 8 * 40 + 1))
    return psi0, target, t


@pytest.mark.parametrize("name", sorted(BACKENDS))
@pytest.mark.parametrize("d, stride", [(2, 1), (2, 4), (3, 2), (5, 8)])
def test_apply_unitaries_matches_sequential_products(name, d, stride):
    rng = np.random.default_rng(d * 10 + stride)
    U = random_unitaries(rng, 32, d)
    psi0 = np.zeros(d, dtype=complex)
    psi0[0] = 1.0
    out = BACKENDS[name].apply_unitaries(U, psi0, stride)
    expected = [psi0]
    cur = psi0
    for k in range(32):
        cur = U[k] @ cur
        if (k + 1) % stride == 0:
            expected.append(cur)
    assert np.allclose(out, expected, atol=1e-13)


@pytest.mark.parametrize("name", sorted(BACKENDS))
def test_fixed_reference_trace_matches_independent_computation(name):
    rng = np.random.default_rng(11)
    psi0, target, t = periodic_case(rng)
    dr, hr, delta, h, omega = 0.9, -0.2, 1.0, 0.8, 20.0
    theta, integral = BACKENDS[name].fixed_reference_trace(dr, hr, delta, h, omega, psi0, target, t, 8)
    href = 0.5 * np.array([[dr, hr], [hr, -dr]])
    states = np.array([expm(-1j * href * tk) @ psi0 for tk in t])
    gens = np.array([0.5 * np.array([[delta, h * np.exp(-1j * omega * tk)], [h * np.exp(1j * omega * tk), -delta]])
                     for tk in t])
    sig = dispersions(gens - href, states)
    acc = np.concatenate(([0.0], np.cumsum(0.5 * np.diff(t) * (sig[1:] + sig[:-1]))))
    assert integral == pytest.approx(acc[::8], abs=1e-12)
    ov = np.abs(states[::8] @ target.conj())
    assert theta == pytest.approx(np.arccos(np.minimum(ov, 1.0)), abs=1e-10)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled extension not built")
@settings(max_examples=50, deadline=None)
@given(
    st.floats(-2, 2), st.floats(-2, 2), st.floats(0.1, 2), st.floats(0.01, 1), st.floats(1, 40), st.integers(0, 2**32 - 1)
)
def test_backends_agree(dr, hr, delta, h, omega, seed):
    rng = np.random.default_rng(seed)
    psi0, target, t = periodic_case(rng)
    a = BACKENDS["python"].fixed_reference_trace(dr, hr, delta, h, omega, psi0, target, t, 8)
    b = BACKENDS["cython"].fixed_reference_trace(dr, hr, delta, h, omega, psi0, target, t, 8)
    assert np.allclose(a[0], b[0], rtol=0, atol=1e-12)
    assert np.allclose(a[1], b[1], rtol=1e-12, atol=1e-13)
    U = random_unitaries(rng, 16, 3)
    psi = np.ascontiguousarray(random_unitaries(rng, 1, 3)[0, :, 0])
    assert np.allclose(BACKENDS["python"].apply_unitaries(U, psi, 2), BACKENDS["cython"].apply_unitaries(U, psi, 2))


def test_dispersion_kernel_resolves_tiny_values():
    # reference equal to the drive up to 1e-9: the dispersion is ~1e-9, far below the
    # ~1e-8 floor of the second-moment form
    psi0 = np.array([0.6, 0.8j])
    t = np.ascontiguousarray(np.linspace(0.0, 1.0, 11))
    theta, integral = _pykernels.fixed_reference_trace(1.0 - 1e-9, 0.0, 1.0, 1e-300, 1.0, psi0, psi0, t, 1)
    # sigma = 1e-9/2 * |sin| of the Bloch polar angle of psi0, which is 2*0.6*0.8
    assert integral[-1] == pytest.approx(0.5e-9 * 0.96, rel=1e-6)


def test_pure_python_backend_can_be_forced():
    env = dict(os.environ, QSL_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "import qsl._kernels as k; print(k.BACKEND)"], env=env, capture_output=True, text=True
    )
    assert out.stdout.strip() == "python"
