import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from detwave.errors import DomainError, ValidationError
from detwave.model import FluxSpec, IgnitionSpec, ModelConfig, p0, validate_config


def test_reference_instance():
    cfg = validate_config(p0())
    assert cfg.q == 0.5 and cfg.k == 1.0
    assert (cfg.ignition.u_i, cfg.ignition.u_sup) == (0.5, 2.5)
    assert cfg.phi(1.5) == pytest.approx(1.0)


def test_burgers_values():
    f, a, b = FluxSpec("burgers")(2.0)
    assert (f, a, b) == (2.0, 2.0, 1.0)


def test_burgers_domain():
    with pytest.raises(DomainError):
        FluxSpec("burgers")(-0.1)


def test_tabulated_flux_matches_burgers():
    x = np.linspace(0.1, 4, 200)
    fl = FluxSpec("tabulated", {"x": x.tolist(), "f": (0.5 * x * x).tolist()})
    f, a, _ = fl(np.array([1.0, 2.0]))
    np.testing.assert_allclose(f, [0.5, 2.0], rtol=1e-8)
    np.testing.assert_allclose(a, [1.0, 2.0], rtol=1e-6)


def test_tabulated_needs_knots():
    with pytest.raises(ValidationError):
        FluxSpec("tabulated", {"x": [0, 1], "f": [0, 1]})


@given(st.floats(-2, 6))
def test_phi_support_and_sign(u):
    ig = IgnitionSpec()
    phi, _ = ig(u)
    assert phi >= 0
    if u <= ig.u_i or u >= ig.u_sup:
        assert phi == 0


@pytest.mark.parametrize("th", [0.5, 2.5])
def test_phi_is_c1_at_thresholds(th):
    ig = IgnitionSpec()
    for e in (1e-6, 1e-8):
        assert abs(ig(th + e)[1]) < 1e-4 and abs(ig(th - e)[1]) < 1e-4


def test_znd_thresholds_solve_temperature_equation():
    ig = IgnitionSpec.znd(0.5, 1.4, 1.05)
    T, _ = ig.temperature(np.array([ig.u_i, ig.u_sup]))
    np.testing.assert_allclose(T, 1.05, atol=1e-12)
    assert ig.u_i < ig.u_sup
    mid = 0.5 * (ig.u_i + ig.u_sup)
    assert math.isclose(ig(mid)[0], 1.0)


def test_znd_rejects_supersonic():
    with pytest.raises(ValidationError):
        IgnitionSpec.znd(1.2, 1.4, 1.0)


def test_validate_collects_every_problem():
    bad = ModelConfig(FluxSpec("burgers"), IgnitionSpec(2.0, 1.0, -1.0), q=-1.0, k=0.0)
    with pytest.raises(ValidationError) as info:
        validate_config(bad)
    assert len(info.value.problems) >= 4


def test_validate_rejects_nonconvex_table():
    x = np.linspace(0.1, 4, 50)
    fl = FluxSpec("tabulated", {"x": x.tolist(), "f": np.sqrt(x).tolist()})
    with pytest.raises(ValidationError):
        validate_config(ModelConfig(fl, IgnitionSpec(0.5, 2.5)))


@given(q=st.floats(0.01, 5), k=st.floats(1e-4, 100), ui=st.floats(0.1, 2), w=st.floats(0.1, 3))
def test_dict_round_trip(q, k, ui, w):
    cfg = ModelConfig(FluxSpec("burgers"), IgnitionSpec(ui, ui + w), q=q, k=k)
    assert ModelConfig.from_dict(cfg.to_dict()) == cfg


def test_znd_round_trip():
    cfg = ModelConfig(ignition=IgnitionSpec.znd(0.5, 1.4, 1.05))
    back = ModelConfig.from_dict(cfg.to_dict())
    assert back.ignition.u_i == pytest.approx(cfg.ignition.u_i, rel=1e-15)
