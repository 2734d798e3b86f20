import numpy as np
import pytest

from qsl.bounds import cumulative_variance_integral
from qsl.core import fidelity_angles
from qsl.models import periodic as pm
from qsl.optimizer import ReferenceObjective, optimize_bounds
from qsl.propagation import TimeGrid, propagate_converged


def case(h, periods=2.0, n_points=21, **kwargs):
    p = pm.PeriodicParams(1.0, h, 20.0)
    psi0 = pm.initial_state(p)
    grid = TimeGrid(0.0, periods * p.period, n_points)
    return p, psi0, grid, optimize_bounds(p, psi0, psi0, grid, **kwargs)


@pytest.fixture(scope="module")
def recorded():
    return case(0.8, record=True)


def test_optimized_bounds_dominate_the_seed(recorded):
    p, psi0, grid, opt = recorded
    assert np.all(opt.theta_u_opt <= opt.seed_theta_u)
    assert np.all(opt.theta_l_opt >= opt.seed_theta_l)
    assert opt.seed == pytest.approx(pm.floquet_magnus_coefficients(p))


def test_optimization_is_deterministic(recorded):
    _, _, _, again = case(0.8, record=True)
    _, _, _, first = recorded
    assert np.array_equal(first.theta_u_opt, again.theta_u_opt)
    assert np.array_equal(first.theta_l_opt, again.theta_l_opt)
    assert np.array_equal(first.argmin_u, again.argmin_u)


def test_best_value_trace_never_worsens(recorded):
    for entry in recorded[3].history:
        if entry[0] == "visited":
            continue
        trace = np.array(entry[2])
        assert np.all(np.diff(trace) <= 0)


def test_visited_candidates_give_valid_bounds(recorded):
    p, psi0, grid, opt = recorded
    visited = next(e[1] for e in opt.history if e[0] == "visited")
    evolved = propagate_converged(pm.periodic_generator(p), psi0, grid.refined(16))
    theta = fidelity_angles(psi0, evolved.states[::16])
    rng = np.random.default_rng(7)
    for i in rng.choice(len(visited), size=100, replace=False):
        j, _, _, lower, upper = visited[i]
        assert lower - 2e-6 <= theta[j] <= upper + 2e-6


def test_kernel_trace_matches_generic_pipeline():
    p = pm.PeriodicParams(1.0, 0.8, 20.0)
    psi0 = pm.initial_state(p)
    grid = TimeGrid(0.0, 2 * p.period, 21)
    objective = ReferenceObjective(p, psi0, psi0, grid, substeps=32)
    dr, hr = 0.9, -0.05
    theta, integral = objective.trace(dr, hr)
    fine = grid.refined(32)
    ref = pm.constant_reference_trajectory(dr, hr, psi0, fine)
    generic = cumulative_variance_integral(pm.periodic_generator(p), pm.constant_reference_generator(dr, hr), ref)
    assert integral == pytest.approx(generic.values[::32], abs=1e-10)
    assert theta == pytest.approx(fidelity_angles(psi0, ref.states[::32]), abs=1e-10)
    # repeated candidates come from the cache
    objective.trace(dr, hr)
    assert objective.n_computed == 1


def test_weak_drive_limit_collapses_the_bounds():
    _, _, _, opt = case(1e-6, periods=1.0, n_points=11)
    assert np.max(opt.theta_u_opt) < 1e-5
    assert np.max(np.abs(opt.theta_l_opt)) < 1e-5


def test_explicit_seed_and_grid_validation():
    p, psi0, grid, opt = case(0.8, periods=1.0, n_points=6, seed=(1.0, 0.0))
    assert opt.seed == (1.0, 0.0)
    assert np.all(opt.theta_u_opt <= opt.seed_theta_u)
    with pytest.raises(ValueError):
        optimize_bounds(p, psi0, psi0, TimeGrid(0.1, 1.0, 5))
