"""Acceptance criteria 1-10, each at its stated tolerance.

Every test prints exactly one ``criterion N: PASS|FAIL`` line (shown even
under output capture) and then asserts.
"""

import math
import time

import numpy as np
import pytest

from detwave.evans import EigenSystem, Evans, stability_index
from detwave.model import p0
from detwave.pdesim import perturbation_decay_test, riemann_asymptotic_test
from detwave.profiles import (WaveClass, cj_speeds, classify_wave, compute_profile, find_weak_detonation_speed,
                              melnikov_derivative_s, rh_states, separation)
from detwave.riemann import check_solution, cj_shift_report, solve_riemann
from detwave.errors import NoSolution


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok
    return emit


def test_criterion_01_rh_cj_oracle(report):
    cfg = p0()
    # closed forms for Burgers: u_- = s +- sqrt((s - u_+)^2 - 2 s q); CJ where the root vanishes
    s, up, q = 1.5, 0.2, 0.5
    r = math.sqrt((s - up) ** 2 - 2 * s * q)
    st = rh_states(cfg, up, s)
    cj = cj_speeds(cfg, up)
    cj_exact = (up + q + math.sqrt((up + q) ** 2 - up * up), up + q - math.sqrt((up + q) ** 2 - up * up))
    errs = [abs(st.strong - (s + r)), abs(st.weak - (s - r)), abs(cj[0] - cj_exact[0]), abs(cj[1] - cj_exact[1]),
            abs(st.strong - 1.9358898944), abs(st.weak - 1.0641101056),
            abs(cj[0] - 1.3708203932), abs(cj[1] - 0.0291796068)]
    ok = max(errs[:4]) <= 1e-10 and max(errs[4:]) <= 1e-10
    assert report(1, ok, f"max closed-form error {max(errs[:4]):.2e}")


def test_criterion_02_profile_fidelity(report, strong_profile, weak_profile):
    details, ok = [], True
    for name, p in (("strong", strong_profile), ("weak", weak_profile)):
        res, gap = p.residual(), max(p.endstate_gap())
        ok &= res <= 1e-6 and gap <= 1e-8
        comp_m = p.tail_rates["minus_components"]
        exp = p.expected_rates
        if name == "strong":
            rate_err = max(abs(comp_m["kinetic"] / exp["alpha_minus"] - 1),
                           abs(p.tail_rates["plus"] / exp["plus"] - 1))
        else:
            ok &= bool(np.all(np.diff(p.u) <= 1e-12) and np.all(np.diff(p.z) >= -1e-12))
            rate_err = max(abs(comp_m["reactive"] / exp["reactive"] - 1),
                           abs(p.tail_rates["plus"] / exp["plus"] - 1))
        ok &= rate_err <= 0.05
        details.append(f"{name}: residual {res:.1e}, gap {gap:.1e}, rate err {rate_err:.1%}")
    assert report(2, ok, "; ".join(details))


def test_criterion_03_melnikov_consistency(report, cfg4, weak_profile):
    rows, ok = [], True
    profiles = [(cfg4, weak_profile)]
    cfg10 = p0(10.0)
    s10 = find_weak_detonation_speed(cfg10, 0.2)
    profiles.append((cfg10, compute_profile(cfg10, classify_wave(cfg10, rh_states(cfg10, 0.2, s10).weak, 0.2, s10))))
    for c, p in profiles:
        m = melnikov_derivative_s(c, p, with_fd=True)
        rel = abs(m.dd_ds / m.dd_ds_fd - 1)
        ok &= rel <= 1e-3 and m.dd_ds < 0
        rows.append(f"k={c.k:g}: dd/ds {m.dd_ds:.6f} vs FD {m.dd_ds_fd:.6f} (rel {rel:.1e})")
    s_grid = np.linspace(cj_speeds(cfg4, 0.2)[0], 2.0, 5)
    d = [separation(cfg4, 0.2, s) for s in s_grid]
    mono = bool(np.all(np.diff(d) <= 0))
    ok &= mono
    rows.append(f"d nonincreasing on 5-point grid: {mono}")
    assert report(3, ok, "; ".join(rows))


def test_criterion_04_cj_shift(report):
    rep = cj_shift_report(p0(), 0.2, [1e-3, 0.1, 1.0, 4.0, 10.0], rel_tol=1e-3)
    lo, hi = rep.k0_bracket
    d_ok = all(abs(r["d_at_speed"]) <= 1e-8 for r in rep.rows if r["case"] == "ii")
    ok = (rep.rows[0]["case"] == "i" and rep.rows[-1]["case"] == "ii"
          and (hi - lo) <= 1e-3 * hi and d_ok)
    assert report(4, ok, f"k0 in [{lo:.6g}, {hi:.6g}], cases {[r['case'] for r in rep.rows]}")


def test_criterion_05_evans_harness(report):
    rng = np.random.default_rng(20240601)
    worst = 0.0
    for alpha0 in (-1.3, -0.4, 0.5, 1.2):
        lam = rng.uniform(0, 5, 10) + 1j * rng.uniform(-5, 5, 10)
        D = Evans(system=EigenSystem.constant(alpha0))(lam)
        worst = max(worst, float(np.max(np.abs(D / np.sqrt(alpha0 ** 2 + 4 * lam) - 1))))
    assert report(5, worst <= 1e-8, f"max relative error {worst:.1e}")


def test_criterion_06_derivative_formulas(report, strong_report, weak_report):
    ok, rows = True, []
    for name, r in (("strong", strong_report), ("weak", weak_report)):
        rel = r.residuals["dprime0_rel_diff"]
        zero = r.residuals["D0_over_dprime0"]
        good = np.sign(r.dprime0_numeric) == np.sign(r.dprime0_formula) and rel <= 1e-3 and zero <= 1e-6
        ok &= bool(good)
        rows.append(f"{name}: D'(0) {r.dprime0_numeric:.8f} vs {r.dprime0_formula:.8f} (rel {rel:.1e}), "
                    f"|D(0)/D'(0)| {zero:.1e}")
    assert report(6, ok, "; ".join(rows))


def test_criterion_07_stability_index(report, strong_report, weak_report):
    ok = all(r.Gamma == 1 and r.winding_count == 0 and (r.winding_count % 2 == 0) == (r.Gamma > 0)
             for r in (strong_report, weak_report))
    assert report(7, ok, f"Gamma {strong_report.Gamma}/{weak_report.Gamma}, "
                         f"winding {strong_report.winding_count}/{weak_report.winding_count}")


def test_criterion_08_symmetry_normalization(report, strong_profile, weak_profile, strong_report, weak_report):
    ok, rows = True, []
    for name, p, base in (("strong", strong_profile, strong_report), ("weak", weak_profile, weak_report)):
        ev = Evans(p)
        lam = np.array([0.4 + 1.1j, 3.0 + 7.0j, 0.02 + 0.05j])
        sym = float(np.max(np.abs(ev(lam.conj()) - ev(lam).conj()) / np.abs(ev(lam))))
        real = ev(np.array([0.3, 2.0, 10.0]))
        imag = float(np.max(np.abs(real.imag) / np.abs(real)))
        doubled = stability_index(p, winding=True, L_scale=2.0)
        same = doubled.Gamma == base.Gamma and doubled.winding_count == base.winding_count
        ok &= sym <= 1e-8 and imag <= 1e-8 and same
        rows.append(f"{name}: conj {sym:.1e}, imag {imag:.1e}, L->2L invariant {same}")
    assert report(8, ok, "; ".join(rows))


def test_criterion_09_pde_cross_validation(report, cfg, strong_profile):
    t0 = time.perf_counter()
    slow_run = riemann_asymptotic_test(p0(1e-3), (1.8, 0.0), (0.2, 1.0), 1.6e6, n_cells=4000)
    t_slow = time.perf_counter() - t0
    resolved = riemann_asymptotic_test(p0(1.0), (1.8, 0.0), (0.2, 1.0), 80.0, n_cells=4000)
    target = 1.4545454545
    e1 = abs(slow_run.measured[0] / target - 1)
    e2 = abs(resolved.measured[0] / target - 1)
    decay = perturbation_decay_test(cfg, strong_profile, 0.01, 50.0)
    ok = (len(slow_run.measured) == 1 and slow_run.n_crossings == [1] and e1 <= 0.02 and t_slow <= 300
          and resolved.n_crossings == [1] and e2 <= 0.02 and decay.decayed)
    assert report(9, ok, f"front k=1e-3 {slow_run.measured[0]:.6f} ({e1:.2%}, {t_slow:.1f}s), "
                         f"k=1 {resolved.measured[0]:.6f} ({e2:.2%}); L2 ratio {decay.ratio:.3f}")


def test_criterion_10_riemann_catalog(report):
    c3 = p0(1e-3)
    good = []
    a = solve_riemann(c3, (1.8, 0), (0.2, 1))
    good.append(a.case_label == "IIa" and [w.cls for w in a.waves] == [WaveClass.STRONG_DETONATION]
                and abs(a.waves[0].s - 1.4545454545) < 1e-10)
    b = solve_riemann(c3, (1.0, 0), (0.2, 1))
    good.append(b.case_label == "IIb"
                and [w.cls for w in b.waves] == [WaveClass.INERT_RAREFACTION, WaveClass.CJ_DETONATION]
                and abs(b.waves[0].u_plus - 1.3708203932) < 1e-9)
    try:
        solve_riemann(p0(), (2.6, 0), (1.0, 1))
        good.append(False)
    except NoSolution as exc:
        good.append(str(exc) == "no Riemann solution (case IV)")
    d = solve_riemann(c3, (1.8, 0), (2.6, 1))
    good.append(d.case_label == "Ia"
                and [w.cls for w in d.waves] == [WaveClass.WEAK_DEFLAGRATION, WaveClass.INERT_RAREFACTION]
                and abs(d.waves[0].s - 1.2541666667) < 1e-10)
    rng = np.random.default_rng(12345)
    failures = 0
    for i in range(50):
        kind = i % 4
        if kind == 0:
            k, ul, ur = 1e-3, rng.uniform(0.3, 2.49), rng.choice([0.05, 0.2, 0.3, 0.45])
        elif kind == 1:
            k, ul, ur = 1e-3, rng.uniform(0.3, 2.49), rng.uniform(2.5, 4.0)
        elif kind == 2:
            k, ul, ur = 4.0, rng.uniform(0.3, 2.49), rng.choice([0.2, 0.3])
        else:
            k, ul, ur = 10.0, rng.uniform(2.5, 4.5), 0.45
        c = p0(k)
        sol = solve_riemann(c, (float(ul), 0.0), (float(ur), 1.0))
        failures += bool(check_solution(c, sol, (float(ul), 0.0), (float(ur), 1.0)))
    ok = all(good) and failures == 0
    assert report(10, ok, f"worked examples {sum(good)}/4, randomized failures {failures}/50")
