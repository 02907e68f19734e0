import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from detwave.errors import DegenerateEndstate, NoSolution, UnsupportedData
from detwave.model import p0
from detwave.profiles import WaveClass, separation
from detwave.riemann import check_solution, cj_shift_report, gas_dynamical_wave, solve_riemann

CJ = 1.3708203932499369


def _shape(sol):
    return [(w.cls, w.u_minus, w.u_plus) for w in sol.waves]


def test_case_IIa():
    sol = solve_riemann(p0(1e-3), (1.8, 0), (0.2, 1))
    assert sol.case_label == "IIa"
    assert _shape(sol) == [(WaveClass.STRONG_DETONATION, 1.8, 0.2)]
    assert abs(sol.waves[0].s - 1.4545454545) < 1e-10


def test_case_IIb():
    sol = solve_riemann(p0(1e-3), (1.0, 0), (0.2, 1))
    assert sol.case_label == "IIb"
    fan, cj = sol.waves
    assert fan.cls == WaveClass.INERT_RAREFACTION and fan.speed_range[0] == 1.0
    assert abs(fan.u_plus - 1.3708203932) < 1e-9
    assert cj.cls == WaveClass.CJ_DETONATION and abs(cj.s - CJ) < 1e-9


def test_case_IV():
    with pytest.raises(NoSolution, match=r"no Riemann solution \(case IV\)"):
        solve_riemann(p0(), (2.6, 0), (1.0, 1))


def test_case_Ia():
    sol = solve_riemann(p0(1e-3), (1.8, 0), (2.6, 1))
    assert sol.case_label == "Ia"
    defl, fan = sol.waves
    assert defl.cls == WaveClass.WEAK_DEFLAGRATION and (defl.u_minus, defl.u_plus) == (1.8, 2.5)
    assert abs(defl.s - 1.2541666667) < 1e-10
    assert fan.cls == WaveClass.INERT_RAREFACTION and fan.speed_range == (2.5, 2.6)


def test_case_Ib():
    # deflagration CJ state for u^+ = 2.5 is (6 - sqrt 11)/2
    u_cj = (6 - math.sqrt(11)) / 2
    sol = solve_riemann(p0(1e-3), (1.0, 0), (2.6, 1))
    assert sol.case_label == "Ib"
    assert abs(sol.waves[0].u_plus - u_cj) < 1e-9
    assert sol.waves[1].cls == WaveClass.CJ_DEFLAGRATION


def test_case_IIa_prime_and_IIb_prime(cfg4, s_hat4):
    a = solve_riemann(cfg4, (2.0, 0), (0.2, 1))
    assert a.case_label == "IIa'" and a.waves[0].cls == WaveClass.STRONG_DETONATION
    b = solve_riemann(cfg4, (1.0, 0), (0.2, 1))
    assert b.case_label == "IIb'"
    assert b.waves[-1].cls == WaveClass.WEAK_DETONATION and b.waves[-1].s == s_hat4
    assert abs(separation(cfg4, 0.2, b.s_hat)) <= 1e-8


def test_case_V():
    cfg = p0(10.0)
    sol = solve_riemann(cfg, (3.0, 0), (0.45, 1))
    assert sol.case_label == "V"
    assert [w.cls for w in sol.waves] == [WaveClass.INERT_SHOCK, WaveClass.WEAK_DETONATION]
    assert check_solution(cfg, sol, (3.0, 0), (0.45, 1)) == []
    with pytest.raises(NoSolution):
        solve_riemann(cfg, (5.0, 0), (0.45, 1))


def test_case_V_in_case_i():
    with pytest.raises(NoSolution):
        solve_riemann(p0(1e-3), (3.0, 0), (0.2, 1))


def test_case_III_warns():
    with pytest.warns(DegenerateEndstate):
        sol = solve_riemann(p0(1e-3), (1.8, 0), (0.5, 1))
    assert sol.case_label == "III" and sol.side_list


def test_unsupported_data():
    with pytest.raises(UnsupportedData):
        solve_riemann(p0(), (1.0, 1), (0.2, 0))
    with pytest.raises(UnsupportedData):
        solve_riemann(p0(), (1.0, 0.5), (0.2, 1))
    with pytest.raises(NoSolution):
        solve_riemann(p0(), (1.0, 0), (1.0, 1))


def test_inert():
    sol = solve_riemann(p0(), (2.0, 0), (1.0, 0))
    assert sol.case_label == "inert" and sol.waves[0].s == 1.5
    assert gas_dynamical_wave(p0(), 1.0, 2.0, 0.0).speed_range == (1.0, 2.0)


def test_sample():
    cfg = p0(1e-3)
    sol = solve_riemann(cfg, (1.0, 0), (0.2, 1))
    u, z = sol.sample(cfg, np.array([0.5, 1.2, 2.0]), (1.0, 0))
    np.testing.assert_allclose(u, [1.0, 1.2, 0.2])
    np.testing.assert_allclose(z, [0.0, 0.0, 1.0])


solvable = st.one_of(
    st.tuples(st.just(1e-3), st.floats(0.3, 2.49), st.sampled_from([0.05, 0.2, 0.3, 0.45])),
    st.tuples(st.just(1e-3), st.floats(0.3, 2.49), st.floats(2.5, 4.0)),
    st.tuples(st.just(4.0), st.floats(0.3, 2.49), st.sampled_from([0.2, 0.3])),
    st.tuples(st.just(10.0), st.floats(2.5, 4.5), st.just(0.45)),
)


@settings(max_examples=50, deadline=None)
@given(solvable)
def test_random_invariants(data):
    k, u_l, u_r = data
    cfg = p0(k)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateEndstate)
        sol = solve_riemann(cfg, (u_l, 0.0), (u_r, 1.0))
    assert check_solution(cfg, sol, (u_l, 0.0), (u_r, 1.0)) == []


def test_cj_shift():
    rep = cj_shift_report(p0(), 0.2, [1e-3, 1.0, 4.0])
    assert rep.rows[0]["case"] == "i" and rep.rows[-1]["case"] == "ii"
    lo, hi = rep.k0_bracket
    assert lo < hi and (hi - lo) <= 1e-3 * hi
    assert 2.04 < lo < 2.045
    assert abs(rep.rows[-1]["d_at_speed"]) <= 1e-8
