import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detwave.errors import CFLViolation, NonFiniteState
from detwave.model import FluxSpec, IgnitionSpec, ModelConfig, p0
from detwave.pdesim import (SimGrid, SimState, Stepper, cfl_bound, drift_test, perturbation_decay_test,
                            riemann_asymptotic_test, run, step)


def _const(grid, u, z):
    n = grid.n_cells
    return SimState(0.0, np.full(n, u), np.full(n, z))


@pytest.mark.parametrize("u,z", [(0.2, 1.0), (1.5, 0.0)])
def test_rest_states_unchanged(cfg, u, z):
    grid = SimGrid(-5, 5, 100, 1.3, "EndstateDirichlet", (u, z), (u, z))
    s0 = _const(grid, u, z)
    dt = cfl_bound(cfg, s0, grid)
    s1 = s0
    for _ in range(50):
        s1 = step(cfg, s1, grid, dt)
    assert np.max(np.abs(s1.u - u)) < 1e-14
    assert np.max(np.abs(s1.z - z)) < 1e-14


def test_exact_reaction_update():
    # phi = 1 at the band midpoint with the polynomial bump
    cfg = ModelConfig(FluxSpec("burgers"), IgnitionSpec(0.5, 2.5, 1.0), q=0.5, k=1.0)
    assert math.isclose(cfg.phi(1.5), 1.0)
    grid = SimGrid(0, 1, 10, 0.0, "ZeroGradient")
    s1 = Stepper(cfg, grid, 0.1)(_const(grid, 1.5, 1.0))
    np.testing.assert_allclose(s1.z, np.exp(-0.1), rtol=0, atol=1e-15)
    assert abs(s1.z[0] - 0.9048374180) < 1e-10


def test_cfl_violation(cfg):
    grid = SimGrid(0, 1, 100)
    s0 = _const(grid, 1.0, 0.0)
    with pytest.raises(CFLViolation):
        step(cfg, s0, grid, 2 * cfl_bound(cfg, s0, grid))


def test_nonfinite(cfg):
    grid = SimGrid(0, 1, 10, boundary="ZeroGradient")
    s0 = _const(grid, 1.0, 0.0)
    s0.u[3] = np.nan
    with pytest.raises(NonFiniteState):
        Stepper(cfg, grid, 1e-4)(s0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), implicit=st.booleans())
def test_periodic_conservation_without_reaction(seed, implicit):
    cfg = p0(k=0.0)
    rng = np.random.default_rng(seed)
    grid = SimGrid(0, 10, 200, frame_speed=float(rng.uniform(0, 2)), boundary="Periodic")
    s = SimState(0.0, rng.uniform(0.3, 2.5, 200), rng.uniform(0, 1, 200))
    total0 = s.conserved_total(grid, cfg.q)
    stepper = Stepper(cfg, grid, cfl_bound(cfg, SimState(0, np.array([2.6]), np.zeros(1)), grid, implicit),
                      implicit)
    for _ in range(20):
        prev = s.conserved_total(grid, cfg.q)
        s = stepper(s)
        assert abs(s.conserved_total(grid, cfg.q) - prev) <= 1e-12 * abs(total0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_z_stays_in_unit_interval(seed):
    cfg = p0(k=5.0)
    rng = np.random.default_rng(seed)
    grid = SimGrid(-5, 5, 100, frame_speed=1.4, boundary="ZeroGradient")
    s = SimState(0.0, rng.uniform(0.1, 3.0, 100), rng.uniform(0, 1, 100))
    s, _, _ = run(cfg, s, grid, 1.0)
    assert np.all(s.z >= 0) and np.all(s.z <= 1)


def _burgers_shock_error(dx, T=10.0):
    # viscous Burgers shock 2 -> 1 travels at 1.5: u = 1.5 - 0.5 tanh(x/4) in the co-moving frame
    cfg = p0()
    exact = lambda x: 1.5 - 0.5 * np.tanh(x / 4)
    n = int(round(80 / dx))
    grid = SimGrid(-40, 40, n, 1.5, "EndstateDirichlet", (2.0, 0.0), (1.0, 0.0))
    s, _, _ = run(cfg, SimState(0.0, exact(grid.x), np.zeros(n)), grid, T)
    return float(np.sum(np.abs(s.u - exact(grid.x))) * dx)


def test_first_order_convergence():
    e1, e2 = _burgers_shock_error(0.2), _burgers_shock_error(0.1)
    assert 0.8 * 2 <= e1 / e2 <= 1.2 * 2


def test_zero_perturbation_drift(cfg, strong_profile):
    rep = drift_test(cfg, strong_profile, 10.0)
    assert rep["drift"] <= 1e-3
    # the ODE profile and the scheme's own wave differ at first order in dx
    assert rep["profile_gap"] < 0.2


def test_weak_zero_perturbation_drift(cfg4, weak_profile):
    assert drift_test(cfg4, weak_profile, 10.0)["drift"] <= 1e-3


def test_strong_perturbation_decays(cfg, strong_profile):
    rep = perturbation_decay_test(cfg, strong_profile, 0.01, 50.0)
    assert rep.decayed
    assert rep.norms[0] > 0


def test_weak_perturbation_recorded(cfg4, weak_profile):
    rep = perturbation_decay_test(cfg4, weak_profile, 0.01, 50.0)
    assert isinstance(rep.decayed, bool)
    assert rep.to_dict()["grid"]["frame_speed"] == weak_profile.wave.s


def test_inert_front_speed():
    rep = riemann_asymptotic_test(p0(), (2.0, 0.0), (1.0, 0.0), 40.0)
    assert abs(rep.measured[0] / 1.5 - 1) < 0.02


def test_amplitude_cap(cfg, strong_profile):
    from detwave.errors import ValidationError
    with pytest.raises(ValidationError):
        perturbation_decay_test(cfg, strong_profile, 1.0, 1.0)
