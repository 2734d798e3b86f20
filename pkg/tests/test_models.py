import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from qsl.models import grover as gm
from qsl.models import periodic as pm
from qsl.models import twisted_lz as lzm
from qsl.propagation import TimeGrid

# --- twisted Landau-Zener -------------------------------------------------------------


@pytest.mark.parametrize(
    "kind, oracle",
    [
        ("gaussian", 0.43665155020052807),  # scipy quad + mpmath oracle
        ("tanh_step", 0.37038741039649323),  # mpmath oracle
    ],
)
def test_twist_variance_majorant_matches_quadrature(kind, oracle):
    p = lzm.TwistedLZParams(1.0, 1.0, 0.1, kind)
    assert lzm.twist_variance_majorant(p, TimeGrid(-5, 5, 200001)) == pytest.approx(oracle, abs=1e-9)


def test_majorant_scales_linearly_with_tau():
    small = lzm.TwistedLZParams(1.0, 1.0, 0.1, "gaussian")
    big = lzm.TwistedLZParams(1.0, 1.0, 0.3, "gaussian")
    window = TimeGrid(-10, 10, 400001)
    assert lzm.twist_variance_majorant(big, window) == pytest.approx(
        3 * lzm.twist_variance_majorant(small, window), rel=1e-9
    )


@pytest.mark.parametrize(
    "delta, v, oracle",
    [(1.0, 2.0, 0.4559381277659962), (1.0, np.pi / 2, 0.36787944117144233)],  # mpmath: e^(-pi/4), e^(-1)
)
def test_lz_overlap_closed_form(delta, v, oracle):
    assert lzm.lz_overlap(delta, v) == pytest.approx(oracle, rel=1e-15)


def test_twist_protocols_limits():
    assert lzm.phi_protocol("tanh_step", 0.5, -50.0) == pytest.approx(0.0, abs=1e-12)
    assert lzm.phi_protocol("tanh_step", 0.5, 50.0) == pytest.approx(2 * np.pi)
    assert lzm.phi_protocol("gaussian", 0.5, 0.0) == pytest.approx(np.pi)
    assert lzm.phi_protocol("gaussian", 0.5, 10.0) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        lzm.phi_protocol("sawtooth", 0.5, 0.0)


@pytest.mark.parametrize("kind", ["tanh_step", "gaussian"])
def test_twist_rate_matches_finite_difference(kind):
    t = np.linspace(-1, 1, 21)
    h = 1e-6
    fd = (lzm.phi_protocol(kind, 0.3, t + h) - lzm.phi_protocol(kind, 0.3, t - h)) / (2 * h)
    assert lzm.phi_protocol_rate(kind, 0.3, t) == pytest.approx(fd, abs=1e-6)


def test_twisted_generator_shape_and_reduction():
    p = lzm.TwistedLZParams(0.7, 1.3, 0.2, "gaussian")
    gen = lzm.twisted_lz_generator(p)
    h = gen.evaluate(0.0).entries
    # phi(0) = pi flips the coupling sign
    assert np.allclose(h, [[0, -0.7], [-0.7, 0]])
    far = gen.evaluate(30.0).entries
    assert np.allclose(far, lzm.lz_reference_generator(0.7, 1.3).evaluate(30.0).entries)


def test_endpoint_states_are_instantaneous_eigenstates():
    psi_i, target = lzm.endpoint_states(1.0, 2.0, 50.0)
    h_i = np.array([[-100.0, 1.0], [1.0, 100.0]])
    h_f = np.array([[100.0, 1.0], [1.0, -100.0]])
    assert np.allclose(h_i @ psi_i, -np.hypot(100, 1) * psi_i)
    assert np.allclose(h_f @ target, np.hypot(100, 1) * target)
    assert abs(psi_i[0]) > 0.9999 and abs(target[0]) > 0.9999
    e0, e1 = lzm.endpoint_states(1.0, 2.0, 50.0, "diabatic")
    assert np.array_equal(e0, [1, 0]) and np.array_equal(e1, [1, 0])


def test_params_validation():
    with pytest.raises(ValueError):
        lzm.TwistedLZParams(1.0, -1.0, 0.1)
    with pytest.raises(ValueError):
        lzm.TwistedLZParams(1.0, 1.0, 0.1, "bogus")
    assert lzm.TwistedLZParams(1.0, 1.0, 0.1, "protocol2").protocol_kind == "gaussian"


# --- Grover ------------------------------------------------------------------------


def test_k1_protocols_stay_close_to_linear():
    tau = np.linspace(0, 1, 20001)
    # mpmath oracle on the same grid
    assert np.max(np.abs(gm.s_protocol("protocol1", 1.0, tau) - tau)) == pytest.approx(0.0039599643592362, abs=1e-12)
    assert np.max(np.abs(gm.s_protocol("protocol2", 1.0, tau) - tau)) == pytest.approx(0.0039599643667497, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from(["protocol1", "protocol2", "linear"]), st.floats(1.0, 60.0))
def test_schedules_are_monotone_with_fixed_endpoints(kind, k):
    tau = np.linspace(0, 1, 1001)
    s = gm.s_protocol(kind, k, tau)
    assert s[0] == 0.0 and s[-1] == pytest.approx(1.0, abs=1e-12)
    assert np.all((s >= 0) & (s <= 1))
    assert np.all(np.diff(s) >= 0)


@pytest.mark.parametrize("kind", ["protocol1", "protocol2"])
@pytest.mark.parametrize("k", [1.0, 5.0, 20.0])
def test_schedule_rate_matches_finite_difference(kind, k):
    tau = np.linspace(0.01, 0.99, 50)
    h = 1e-6
    fd = (gm.s_protocol(kind, k, tau + h) - gm.s_protocol(kind, k, tau - h)) / (2 * h)
    assert gm.s_protocol_rate(kind, k, tau) == pytest.approx(fd, rel=1e-6)


def test_schedule_rejects_bad_input():
    with pytest.raises(ValueError):
        gm.s_protocol("protocol1", 0.5, 0.3)
    with pytest.raises(ValueError):
        gm.s_protocol("protocol1", 2.0, 1.5)
    with pytest.raises(ValueError):
        gm.GroverParams(n_items=1)


@pytest.mark.parametrize(
    "a, b, oracle",
    [(1.0, 0.0, 0.6435011087932844), (0.0, 1.0, np.pi), (0.5, 0.5, 1.8925468811915388)],  # mpmath
)
def test_mixing_angle_values(a, b, oracle):
    assert gm.grover_theta(10, a, b) == pytest.approx(oracle, abs=1e-15)


def test_mixing_angle_rate_matches_finite_difference():
    p = gm.GroverParams(10, 1.0, 20.0, 5.0, "protocol2")
    t = np.linspace(0.5, 19.5, 40)
    h = 1e-5
    fd = (gm.grover_theta_of_t(p, t + h) - gm.grover_theta_of_t(p, t - h)) / (2 * h)
    assert gm.grover_theta_rate(p, t) == pytest.approx(fd, rel=1e-6)


def test_analytic_bounds_start_at_upper_value():
    p = gm.GroverParams()
    lower, upper = gm.grover_analytic_bounds(p, 0.0)
    # mpmath: (pi - theta(0)) / 2
    assert lower == pytest.approx(1.2490457723982544, abs=1e-15)
    assert upper == pytest.approx(1.2490457723982544, abs=1e-15)
    lower_f, _ = gm.grover_analytic_bounds(p, p.t_f)
    assert lower_f == pytest.approx(1.2490457723982544 - (np.pi - 0.6435011087932844), abs=1e-12)


def test_minimum_time_of_linear_schedule_is_midpoint():
    p = gm.GroverParams(10, 1.0, 20.0, 1.0, "linear")
    assert gm.grover_min_time(p) == pytest.approx(10.0, rel=1e-8)


@pytest.mark.parametrize("s", [0.0, 0.2, 0.5, 0.9, 1.0])
def test_grover_spectrum_structure(s):
    n = 10
    p = gm.GroverParams(n, 1.0, 1.0, 1.0, "linear")
    a, b = 1.0 - s, s
    w = np.linalg.eigvalsh(gm.grover_generator(p).evaluate(s).entries)
    # N-2 levels at A+B orthogonal to span{|0>, |+>}; the remaining pair sums to A+B
    assert np.sum(np.isclose(w, a + b, atol=1e-12)) >= n - 2
    pair = w[:2]
    assert pair.sum() == pytest.approx(a + b, abs=1e-12)
    assert pair[1] - pair[0] == pytest.approx(np.sqrt((a + b) ** 2 - 4 * a * b * (1 - 1 / n)), abs=1e-12)


def test_grover_minimum_gap():
    p = gm.GroverParams(16, 2.0, 1.0, 1.0, "linear")
    w = np.linalg.eigvalsh(gm.grover_generator(p).evaluate(0.5).entries)
    assert w[1] - w[0] == pytest.approx(2.0 / 4.0, abs=1e-12)


def test_grover_cd_term_is_hermitian_and_off_diagonal_in_basis():
    op = gm.grover_cd_term(10, 0.37).entries
    zero, plus = gm.basis_states(10)
    assert np.allclose(op, op.conj().T)
    assert abs(zero.conj() @ op @ zero) < 1e-15
    assert abs(plus.conj() @ op @ plus) < 1e-15


# --- periodic drive -------------------------------------------------------------------


def test_floquet_magnus_coefficients():
    # mpmath oracle
    dr, hr = pm.floquet_magnus_coefficients(pm.PeriodicParams(1.0, 0.2, 20.0))
    assert dr == pytest.approx(0.9989, abs=1e-15)
    assert hr == pytest.approx(-0.01049, abs=1e-15)


def test_periodic_generator_is_periodic_and_hermitian():
    p = pm.PeriodicParams(1.0, 0.8, 20.0)
    gen = pm.periodic_generator(p)
    t = np.linspace(0, 1, 17)
    a = gen.evaluate_many(t)
    assert np.allclose(a, gen.evaluate_many(t + p.period), atol=1e-12)
    assert np.allclose(a, np.conj(np.swapaxes(a, -1, -2)))


def test_initial_state_is_upper_eigenvector():
    p = pm.PeriodicParams(1.0, 0.8, 20.0)
    psi = pm.initial_state(p)
    h0 = pm.periodic_generator(p).evaluate(0.0).entries
    assert np.allclose(h0 @ psi, 0.5 * np.hypot(1.0, 0.8) * psi)


def test_constant_reference_trajectory_matches_exponential():
    psi0 = np.array([0.6, 0.8j])
    grid = TimeGrid(0, 7, 15)
    traj = pm.constant_reference_trajectory(0.9989, -0.01049, psi0, grid)
    h = pm.reference_matrix(0.9989, -0.01049)
    for t, psi in zip(grid.points, traj.states):
        assert np.allclose(psi, expm(-1j * h * t) @ psi0, atol=1e-13)


def test_periodic_params_validation():
    with pytest.raises(ValueError):
        pm.PeriodicParams(1.0, 0.0, 20.0)
    assert pm.PeriodicParams(1.0, 0.2, 4.0).period == pytest.approx(np.pi / 2)
