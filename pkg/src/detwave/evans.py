"""Evans function for the linearised Majda traveling-wave problem.

The eigenvalue problem is written as W' = A(x; lam) W with W = (u, u', z)::

        [ 0                           1      0            ]
    A = [ alpha_x + lam - k q phi' z  alpha  -k q phi     ]
        [ k phi' z / s                0      (k phi + lam)/s ]

evaluated along the profile (alpha = f'(u) - s, alpha_x = f''(u) u_x).
The decaying solution at +infinity is integrated backward with its growth
rate factored out; the two-dimensional unstable space at -infinity is
carried forward as a single vector in the second exterior power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import CubicSpline

from .errors import (BranchError, ContourTooClose, DegenerateProfile, InconsistentIndex,
                     IntegrationError, NonConvergence, NoPlateau, NonIntegerWinding,
                     PlateauError, SonicError)
from .profiles import Profile, WaveClass, melnikov_derivative_s, tw_field

RTOL = 1e-11
ATOL = 1e-13


# ---------------------------------------------------------------------------
# limiting constant-coefficient systems
# ---------------------------------------------------------------------------

@dataclass
class LimitingModes:
    lam: complex
    alpha: float
    reactive: float          # (k/s) phi at the endstate
    mu: tuple                # (mu_1 stable kinematic, mu_2 unstable kinematic, mu_r reactive)
    vectors: tuple           # matching eigenvectors in (u, u', z)


def _kinematic_rates(alpha, lam):
    root = np.sqrt(alpha * alpha + 4.0 * np.asarray(lam, dtype=complex))
    return (alpha - root) / 2.0, (alpha + root) / 2.0


def limiting_modes(alpha: float, phi: float, lam: complex, s: float, k: float, q: float) -> LimitingModes:
    """Rates and eigenvectors of the constant system at an endstate.

    Kinematic vectors are (1, mu, 0); the reactive vector has unit z-component.
    """
    if abs(alpha) <= 1e-10:
        raise SonicError("sonic endstate: alpha = f'(u) - s vanishes")
    lam = complex(lam)
    if abs(lam + alpha * alpha / 4.0) <= 1e-12:
        raise BranchError("lambda sits on the square-root branch point -alpha^2/4")
    m1, m2 = _kinematic_rates(alpha, lam)
    mr = (k * phi + lam) / s
    den = (mr - m1) * (mr - m2)
    U = -k * q * phi / den if k * q * phi != 0 else 0.0
    vecs = (np.array([1.0, m1, 0.0], complex), np.array([1.0, m2, 0.0], complex),
            np.array([U, mr * U, 1.0], complex))
    return LimitingModes(lam, alpha, k * phi / s, (complex(m1), complex(m2), complex(mr)), vecs)


# ---------------------------------------------------------------------------
# coefficient provider
# ---------------------------------------------------------------------------

class EigenSystem:
    """Coefficients of A(x; lam) and the integration window.

    ``coeffs(x)`` returns the real scalars (c21, c22, c23, c31, c33) with
    A = [[0, 1, 0], [c21 + lam, c22, c23], [c31, 0, c33 + lam/s]].
    """

    def __init__(self, coeffs, s, k, q, alpha_minus, alpha_plus, phi_minus, phi_plus,
                 x_minus, x_plus, profile: Profile | None = None):
        self.coeffs = coeffs
        self.s, self.k, self.q = s, k, q
        self.alpha_minus, self.alpha_plus = alpha_minus, alpha_plus
        self.phi_minus, self.phi_plus = phi_minus, phi_plus
        self.x_minus, self.x_plus = x_minus, x_plus
        self.profile = profile

    @classmethod
    def constant(cls, alpha0: float, s: float = 1.0, L: float = 10.0) -> "EigenSystem":
        """Artificial profile frozen at one state with q = 0 and phi = 0."""
        def coeffs(x):
            return 0.0, alpha0, 0.0, 0.0, 0.0
        return cls(coeffs, s, 0.0, 0.0, alpha0, alpha0, 0.0, 0.0, -L, L)

    @classmethod
    def from_profile(cls, profile: Profile, L_scale: float = 1.0, tail_decades: float = 5.0) -> "EigenSystem":
        if profile.degenerate:
            raise DegenerateProfile("Evans function needs an exponentially decaying profile")
        cfg, w = profile.cfg, profile.wave
        s, k, q = w.s, cfg.k, cfg.q
        x, u, z = profile.x, profile.u, profile.z
        su, sz = CubicSpline(x, u), CubicSpline(x, z)
        rate_m = profile.expected_rates["minus"]
        rate_p = w.alpha_plus
        dev_m = (u[0] - w.u_minus, z[0] - w.z_minus)
        dev_p = (u[-1] - w.u_plus, z[-1] - w.z_plus)
        x0, x1 = float(x[0]), float(x[-1])
        F, G = tw_field(cfg, w.u_plus, s)
        flux, ig = cfg.flux, cfg.ignition

        def state(xx):
            xx = np.asarray(xx, dtype=float)
            if xx < x0:
                e = math.exp(rate_m * (xx - x0))
                return w.u_minus + dev_m[0] * e, w.z_minus + dev_m[1] * e
            if xx > x1:
                e = math.exp(rate_p * (xx - x1))
                return w.u_plus + dev_p[0] * e, w.z_plus + dev_p[1] * e
            return float(su(xx)), float(sz(xx))

        def coeffs(xx):
            ub, zb = state(xx)
            _, a, fpp = flux.raw(ub)
            phi, dphi = ig(ub)
            ux = float(F(ub, zb))
            alpha = float(a) - s
            return (float(fpp) * ux - k * q * dphi * zb, alpha, -k * q * phi, k * dphi * zb / s, k * phi / s)

        span = tail_decades * math.log(10.0)
        x_minus = L_scale * (x0 - span / rate_m)
        x_plus = L_scale * (x1 + span / abs(rate_p))
        return cls(coeffs, s, k, q, w.alpha_minus, w.alpha_plus, cfg.phi(w.u_minus),
                   cfg.phi(w.u_plus), x_minus, x_plus, profile)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvansEvaluation:
    lam: complex
    D: complex
    normalization: dict = field(default_factory=dict)


def _solve(rhs, span, y0, what):
    sol = solve_ivp(rhs, span, y0, method="DOP853", rtol=RTOL, atol=ATOL)
    if sol.status != 0:
        raise IntegrationError(f"{what} integration failed: {sol.message}")
    y = sol.y[:, -1]
    if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > 1e100:
        raise IntegrationError(f"{what} solution overflowed")
    return y


def evans_raw(system: EigenSystem, lams) -> np.ndarray:
    """D(lam) for an array of lam, with the (1, mu, 0) / unit-z normalisation."""
    lams = np.atleast_1d(np.asarray(lams, dtype=complex))
    n = lams.size
    s, k, q = system.s, system.k, system.q
    m1p, _ = _kinematic_rates(system.alpha_plus, lams)
    m1m, m2m = _kinematic_rates(system.alpha_minus, lams)
    mrm = (k * system.phi_minus + lams) / s
    sigma = m2m + mrm

    def rhs_plus(x, y):
        V1, V2, V3 = y[:n], y[n:2 * n], y[2 * n:]
        c21, c22, c23, c31, c33 = system.coeffs(x)
        return np.concatenate([V2 - m1p * V1,
                               (c21 + lams) * V1 + (c22 - m1p) * V2 + c23 * V3,
                               c31 * V1 + (c33 + lams / s - m1p) * V3])

    def rhs_minus(x, y):
        Y1, Y2, Y3 = y[:n], y[n:2 * n], y[2 * n:]
        c21, c22, c23, c31, c33 = system.coeffs(x)
        lt = lams / s
        return np.concatenate([(c22 - sigma) * Y1 + c23 * Y2,
                               (c33 + lt - sigma) * Y2 + Y3,
                               -c31 * Y1 + (c21 + lams) * Y2 + (c22 + c33 + lt - sigma) * Y3])

    V0 = np.concatenate([np.ones(n, complex), m1p, np.zeros(n, complex)])
    Y0 = np.concatenate([-k * q * system.phi_minus / (mrm - m1m), np.ones(n, complex), m2m])
    V = _solve(rhs_plus, (system.x_plus, 0.0), V0, "stable-mode")
    Y = _solve(rhs_minus, (system.x_minus, 0.0), Y0, "unstable-wedge")
    W1, W2, W3 = V[:n], V[n:2 * n], V[2 * n:]
    Y12, Y13, Y23 = Y[:n], Y[n:2 * n], Y[2 * n:]
    return W1 * Y23 - W2 * Y13 + W3 * Y12


@dataclass
class Normalization:
    """Constants converting the raw Evans function to the profile normalisation.

    ``c_plus = lim u_x exp(-alpha_+ x)`` makes the +infinity mode equal to the
    profile derivative at lam = 0; for weak detonations ``c_minus =
    lim z_x exp(-(k/s) phi_- x)`` does the same for the reactive mode at
    -infinity.  ``factor = c_plus * c_minus``.
    """

    c_plus: float
    c_minus: float

    @property
    def factor(self) -> float:
        return self.c_plus * self.c_minus


def profile_normalization(profile: Profile) -> Normalization:
    cfg, w = profile.cfg, profile.wave
    s, k = w.s, cfg.k
    x, u, z, ux = profile.x, profile.u, profile.z, profile.ux
    ap = w.alpha_plus
    j = int(np.argmax((np.abs(u - w.u_plus) <= 1e-3) & (x > 0)))
    dev = cfg.flux.a(u[j:]) - s - ap
    integral = simpson(dev, x=x[j:]) + dev[-1] / abs(ap)
    c_plus = float(ux[j] * math.exp(-ap * x[j] + integral))
    c_minus = 1.0
    if w.cls == WaveClass.WEAK_DETONATION:
        r = k / s * cfg.phi(w.u_minus)
        i0 = int(np.argmin(np.abs(x)))
        g = r - k / s * cfg.phi(u[:i0 + 1])
        integral = simpson(g, x=x[:i0 + 1]) + g[0] / r
        c_minus = float(r * z[i0] * math.exp(integral))
    return Normalization(c_plus, c_minus)


class Evans:
    """Evans function of one profile with a fixed normalisation."""

    def __init__(self, profile: Profile | None = None, system: EigenSystem | None = None,
                 normalization: str = "profile", L_scale: float = 1.0):
        if system is None:
            system = EigenSystem.from_profile(profile, L_scale=L_scale)
        self.system = system
        self.profile = profile
        self.mode = normalization if profile is not None else "raw"
        self.norm = profile_normalization(profile) if self.mode == "profile" else Normalization(1.0, 1.0)

    def __call__(self, lams) -> np.ndarray:
        return self.norm.factor * evans_raw(self.system, lams)

    def record(self) -> dict:
        return {"mode": self.mode, "x_minus": self.system.x_minus, "x_plus": self.system.x_plus,
                "c_plus": self.norm.c_plus, "c_minus": self.norm.c_minus}


def evans_eval(profile: Profile, lam: complex, **kw) -> EvansEvaluation:
    ev = Evans(profile, **kw)
    return EvansEvaluation(complex(lam), complex(ev([lam])[0]), ev.record())


# ---------------------------------------------------------------------------
# derivative at the origin, sign at infinity, index
# ---------------------------------------------------------------------------

def dprime_zero_numeric(ev: Evans, scale: float = 1.0, rel_tol: float = 1e-4) -> float:
    hs = np.array([1e-3, 5e-4, 2.5e-4]) * scale
    vals = ev(np.concatenate([hs, -hs]))
    dplus, dminus = vals[:3], vals[3:]
    cd = (dplus - dminus).real / (2 * hs)
    r1 = (4 * cd[1] - cd[0]) / 3
    r2 = (4 * cd[2] - cd[1]) / 3
    if abs(r2 - r1) > rel_tol * abs(r2):
        raise NonConvergence(f"Richardson estimates of D'(0) disagree: {r1:.8g} vs {r2:.8g}")
    return float(r2)


def gamma_abel(profile: Profile, rel_tol: float = 1e-4) -> float:
    """Abel-formula limit exp(int_{-inf}^0 (tr - tr_-)), tr = alpha + (k/s) phi.

    This is the Wronskian det[(u_2, u_x), (z_2, z_x)] at x = 0 when the
    -infinity wedge has unit (u, z) component asymptotically.
    """
    cfg, w = profile.cfg, profile.wave
    s, k = w.s, cfg.k
    x, u = profile.x, profile.u
    tr = cfg.flux.a(u) - s + k / s * cfg.phi(u)
    tr_m = w.alpha_minus + k / s * cfg.phi(w.u_minus)
    i0 = int(np.argmin(np.abs(x)))
    g = tr[:i0 + 1] - tr_m
    rate = profile.expected_rates["minus"]
    # the integrand decays like exp(rate * x); the part beyond the grid is g[0]/rate
    body = simpson(g, x=x[:i0 + 1])
    tail = g[0] / rate
    if abs(tail) > rel_tol * max(1.0, abs(body)):
        raise PlateauError(f"Abel integral not converged at x = -L (tail {tail:.3g})")
    return float(math.exp(body + tail))


@dataclass
class FormulaValue:
    value: float
    parts: dict


def dprime_zero_formula(profile: Profile) -> FormulaValue:
    """D'(0) in the profile normalisation from the closed-form expressions."""
    if profile.degenerate:
        raise DegenerateProfile("closed-form D'(0) needs a nondegenerate profile")
    w, cfg = profile.wave, profile.cfg
    if w.cls == WaveClass.STRONG_DETONATION:
        gamma = gamma_abel(profile)
        delta = w.u_plus - w.u_minus + cfg.q
        return FormulaValue(gamma * delta, {"gamma": gamma, "delta": delta})
    if w.cls == WaveClass.WEAK_DETONATION:
        mel = melnikov_derivative_s(cfg, profile)
        val = mel.integral * abs(w.alpha_minus)
        return FormulaValue(val, {"melnikov_integral": mel.integral, "dd_ds": mel.dd_ds,
                                  "abs_alpha_minus": abs(w.alpha_minus)})
    raise DegenerateProfile(f"no closed-form D'(0) for {w.cls.value}")


def plateau_start(profile: Profile) -> float:
    cfg, w = profile.cfg, profile.wave
    return 25.0 * max(1.0, w.alpha_minus ** 2, w.alpha_plus ** 2,
                      cfg.k * cfg.phi(w.u_minus) / w.s)


def sign_at_infinity(ev: Evans, lam0: float, n: int = 4, imag_tol: float = 1e-8) -> tuple[int, tuple[float, float]]:
    for attempt in range(2):
        lams = lam0 * 2.0 ** np.arange(n)
        D = ev(lams)
        if np.any(np.abs(D.imag) > imag_tol * np.maximum(np.abs(D), 1e-300)):
            raise NoPlateau("Evans function not real on the real axis")
        signs = np.sign(D.real)
        if np.all(signs == signs[0]) and signs[0] != 0:
            return int(signs[0]), (float(lams[0]), float(lams[-1]))
        lam0 *= 4.0
    raise NoPlateau("sign of D(lam) not settled along the real axis")


@dataclass
class StabilityReport:
    dprime0_numeric: float
    dprime0_formula: float
    formula_parts: dict
    sign_at_infinity: int
    plateau: tuple
    Gamma: int
    D0: float
    winding_count: int | None = None
    normalization: dict = field(default_factory=dict)

    @property
    def residuals(self) -> dict:
        rel = abs(self.dprime0_numeric - self.dprime0_formula) / abs(self.dprime0_formula)
        return {"dprime0_rel_diff": rel, "D0_over_dprime0": abs(self.D0 / self.dprime0_numeric)}

    def to_dict(self) -> dict:
        return {"dprime0_numeric": self.dprime0_numeric, "dprime0_formula": self.dprime0_formula,
                "formula_parts": self.formula_parts, "sign_at_infinity": self.sign_at_infinity,
                "plateau": list(self.plateau), "Gamma": self.Gamma, "D0": self.D0,
                "winding_count": self.winding_count, "residuals": self.residuals,
                "normalization": self.normalization}


def stability_index(profile: Profile, winding: bool = False, L_scale: float = 1.0,
                    r: float = 1e-3, R: float = 50.0) -> StabilityReport:
    if profile.degenerate:
        raise DegenerateProfile("stability index needs a nondegenerate profile")
    if profile.wave.cls not in (WaveClass.STRONG_DETONATION, WaveClass.WEAK_DETONATION):
        raise DegenerateProfile("stability index is defined for strong and weak detonations")
    ev = Evans(profile, L_scale=L_scale)
    d0 = float(ev([0.0])[0].real)
    num = dprime_zero_numeric(ev)
    form = dprime_zero_formula(profile)
    if np.sign(num) != np.sign(form.value):
        raise InconsistentIndex(f"numeric D'(0) = {num:.6g} and formula {form.value:.6g} disagree in sign")
    sign_inf, plateau = sign_at_infinity(ev, plateau_start(profile))
    Gamma = int(np.sign(num) * sign_inf)
    rep = StabilityReport(num, form.value, form.parts, sign_inf, plateau, Gamma, d0,
                          normalization=ev.record())
    if winding:
        rep.winding_count = winding_number(ev, r, R)
        if (rep.winding_count % 2 == 0) != (Gamma > 0):
            raise InconsistentIndex("winding parity disagrees with the stability index")
    return rep


# ---------------------------------------------------------------------------
# argument principle
# ---------------------------------------------------------------------------

def _upper_contour(r: float, R: float):
    """Parametrisation t in [0, 3] of the upper half of the contour:
    big arc R -> iR, imaginary axis iR -> ir, small arc ir -> r (clockwise)."""
    def path(t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape, complex)
        a = t < 1
        out[a] = R * np.exp(0.5j * np.pi * t[a])
        b = (t >= 1) & (t < 2)
        # geometric spacing along the axis
        out[b] = 1j * R * (r / R) ** (t[b] - 1)
        c = t >= 2
        out[c] = r * np.exp(0.5j * np.pi * (3 - t[c]))
        return out
    return path


def winding_number(ev, r: float = 1e-3, R: float = 50.0, n_samples: int = 120,
                   max_rounds: int = 12) -> int:
    """Zeros of D inside {Re lam >= 0, r <= |lam| <= R} by the argument principle.

    Uses D(conj lam) = conj D(lam): the change of argument over the full
    contour is twice that over its upper half.
    """
    path = _upper_contour(r, R)
    t = np.linspace(0.0, 3.0, n_samples + 1)
    D = ev(path(t))
    for _ in range(max_rounds):
        jumps = np.abs(np.angle(D[1:] / D[:-1]))
        bad = np.flatnonzero(jumps >= np.pi / 2)
        if bad.size == 0:
            break
        tm = 0.5 * (t[bad] + t[bad + 1])
        Dm = ev(path(tm))
        t = np.insert(t, bad + 1, tm)
        D = np.insert(D, bad + 1, Dm)
    else:
        raise NonIntegerWinding("contour refinement did not resolve the argument")
    mags = np.abs(D)
    if mags.min() <= 1e-6 * np.median(mags):
        raise ContourTooClose("D nearly vanishes on the contour")
    total = 2.0 * np.sum(np.angle(D[1:] / D[:-1]))
    w = total / (2 * np.pi)
    n = round(w)
    if abs(w - n) > 1e-3:
        raise NonIntegerWinding(f"winding {w:.6f} is not an integer")
    return int(n)
