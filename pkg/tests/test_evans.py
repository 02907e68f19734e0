import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detwave.errors import BranchError, DegenerateProfile, SonicError
from detwave.evans import (EigenSystem, Evans, dprime_zero_formula, dprime_zero_numeric, evans_eval,
                           limiting_modes, stability_index)


@given(alpha=st.floats(-3, 3).filter(lambda a: abs(a) > 1e-3), re=st.floats(0, 10), im=st.floats(-10, 10),
       phi=st.floats(0, 1), k=st.floats(0, 5))
def test_limiting_modes_are_eigenvectors(alpha, re, im, phi, k):
    s, q, lam = 1.5, 0.5, complex(re, im)
    m = limiting_modes(alpha, phi, lam, s, k, q)
    A = np.array([[0, 1, 0], [lam, alpha, -k * q * phi], [0, 0, (k * phi + lam) / s]], complex)
    for mu, v in zip(m.mu, m.vectors):
        if v[2] != 0 and abs((mu - m.mu[0]) * (mu - m.mu[1])) < 1e-8:
            continue  # resonant reactive rate
        assert np.allclose(A @ v, mu * v, atol=1e-9 * max(1, abs(mu)) * np.max(np.abs(v)))
    assert m.mu[0].real <= m.mu[1].real


def test_limiting_modes_errors():
    with pytest.raises(SonicError):
        limiting_modes(0.0, 0.0, 1.0, 1.0, 1.0, 0.5)
    with pytest.raises(BranchError):
        limiting_modes(2.0, 0.0, -1.0, 1.0, 1.0, 0.5)


@pytest.mark.parametrize("alpha0", [-1.3, -0.4, 0.5, 1.2])
def test_constant_harness(alpha0):
    rng = np.random.default_rng(7)
    lam = rng.uniform(0, 5, 10) + 1j * rng.uniform(-5, 5, 10)
    D = Evans(system=EigenSystem.constant(alpha0))(lam)
    np.testing.assert_allclose(D, np.sqrt(alpha0 ** 2 + 4 * lam), rtol=1e-8)


def test_conjugate_symmetry_and_reality(strong_profile):
    ev = Evans(strong_profile)
    lam = np.array([0.3 + 0.7j, 2.0 + 5.0j, 0.05 + 0.01j])
    D, Dc = ev(lam), ev(lam.conj())
    np.testing.assert_allclose(Dc, D.conj(), rtol=1e-8)
    real = ev(np.array([0.5, 3.0]))
    assert np.all(np.abs(real.imag) <= 1e-8 * np.abs(real))


def test_simple_zero_at_origin(strong_profile):
    ev = Evans(strong_profile)
    d0 = evans_eval(strong_profile, 0.0).D
    assert abs(d0) <= 1e-6 * abs(dprime_zero_numeric(ev))


def test_strong_derivative_formula(strong_report):
    r = strong_report
    assert np.sign(r.dprime0_numeric) == np.sign(r.dprime0_formula)
    assert r.residuals["dprime0_rel_diff"] <= 1e-3
    assert r.formula_parts["gamma"] > 0
    assert r.formula_parts["delta"] == pytest.approx(0.2 - 1.9358898944 + 0.5, abs=1e-9)


def test_weak_derivative_formula(weak_report):
    r = weak_report
    assert r.residuals["dprime0_rel_diff"] <= 1e-3
    assert r.formula_parts["dd_ds"] < 0


def test_index_values(strong_report, weak_report):
    for r in (strong_report, weak_report):
        assert r.Gamma == 1
        assert r.winding_count == 0
        assert (r.winding_count % 2 == 0) == (r.Gamma > 0)


@settings(max_examples=5, deadline=None)
@given(re=st.floats(0, 3), im=st.floats(0.1, 3))
def test_formula_independent_of_sampling(strong_profile, re, im):
    # normalised D does not depend on the tail continuation length
    lam = complex(re, im)
    a = Evans(strong_profile)([lam])[0]
    b = Evans(strong_profile, system=EigenSystem.from_profile(strong_profile, tail_decades=7))([lam])[0]
    assert abs(a - b) <= 1e-6 * abs(a)


def test_window_doubling(strong_profile):
    rep = stability_index(strong_profile, L_scale=2.0)
    assert rep.Gamma == 1


def test_degenerate_rejected(cfg):
    import warnings
    from detwave.errors import DegenerateEndstate
    from detwave.profiles import classify_wave, compute_profile
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateEndstate)
        p = compute_profile(cfg, classify_wave(cfg, 2.0, 2.5, 1.125))
    with pytest.raises(DegenerateProfile):
        Evans(p)
    with pytest.raises(DegenerateProfile):
        dprime_zero_formula(p)
