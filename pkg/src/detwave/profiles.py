"""Endstates, phase-plane connections and sampled traveling-wave profiles.

Traveling-wave ODE in the moving frame (burned state on the left, z=0;
unburned on the right, z=1)::

    u' = F(u, z) = f(u) - f(u_+) - s (u - u_+) - s q (z - 1)
    z' = G(u, z) = (k/s) phi(u) z
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import (BracketError, DegenerateEndstate, DegenerateProfile, DomainError,
                     IgnitionPlacementError, NoBranch, NoConnection, NoThreshold, NotAWave,
                     NotRestPoint, SolveError)
from .model import ModelConfig

RH_TOL = 1e-10
CJ_TOL = 1e-8
DELTA_TAIL = 1e-8
SHOOT_EPS = 1e-7


class WaveClass(str, Enum):
    STRONG_DETONATION = "StrongDetonation"
    WEAK_DETONATION = "WeakDetonation"
    CJ_DETONATION = "CJDetonation"
    WEAK_DEFLAGRATION = "WeakDeflagration"
    CJ_DEFLAGRATION = "CJDeflagration"
    STRONG_DEFLAGRATION = "StrongDeflagration"
    INERT_SHOCK = "InertShock"
    INERT_RAREFACTION = "InertRarefaction"

    @property
    def is_combustion(self) -> bool:
        return self not in (WaveClass.INERT_SHOCK, WaveClass.INERT_RAREFACTION)


@dataclass(frozen=True)
class WaveSpec:
    u_minus: float
    u_plus: float
    s: float
    cls: WaveClass
    alpha_minus: float
    alpha_plus: float
    z_minus: float = 0.0
    z_plus: float = 1.0
    # rarefaction fans carry their speed interval
    speed_range: tuple[float, float] | None = None

    def to_dict(self) -> dict:
        d = {"class": self.cls.value, "u_minus": self.u_minus, "u_plus": self.u_plus,
             "z_minus": self.z_minus, "z_plus": self.z_plus, "s": self.s,
             "alpha_minus": self.alpha_minus, "alpha_plus": self.alpha_plus}
        if self.speed_range is not None:
            d["speed_range"] = list(self.speed_range)
        return d


@dataclass(frozen=True)
class RHStates:
    strong: float
    weak: float
    branch: str


@dataclass(frozen=True)
class RestPointAnalysis:
    eigenvalues: tuple[float, float]
    eigenvectors: tuple[tuple[float, float], tuple[float, float]]
    rest_type: str
    center_direction: tuple[float, float] | None = None


@dataclass
class MelnikovResult:
    d: float
    zhat: float
    u_minus: float
    s: float
    dd_ds: float | None = None
    dd_ds_fd: float | None = None
    # raw Melnikov integral normalised at x = 0 of the profile (sign-definite, < 0)
    integral: float | None = None
    partials: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# algebraic layer
# ---------------------------------------------------------------------------

def rh_residual(cfg: ModelConfig, u_minus, u_plus, s) -> float:
    f = cfg.flux.f
    return float(f(u_plus) - f(u_minus) - s * (u_plus - u_minus + cfg.q))


def _expand(fun, x0, step, bound, max_iter=200):
    """Walk from x0 by doubling steps until fun changes sign; return bracket."""
    f0 = fun(x0)
    x = x0
    for _ in range(max_iter):
        nxt = x + step
        if (step > 0 and nxt >= bound) or (step < 0 and nxt <= bound):
            nxt = bound - 1e-12 * step / abs(step) * max(1.0, abs(bound)) if np.isfinite(bound) else nxt
            if fun(nxt) * f0 <= 0:
                return (x, nxt) if step > 0 else (nxt, x)
            return None
        if fun(nxt) * f0 <= 0:
            return (x, nxt) if step > 0 else (nxt, x)
        x = nxt
        step *= 2.0
    return None


def _sonic_point(cfg: ModelConfig, s: float) -> float:
    """u with f'(u) = s."""
    flux = cfg.flux
    if flux.kind == "burgers":
        if s <= 0:
            raise DomainError("no sonic point for s <= 0 with Burgers flux")
        return float(s)
    if flux.kind == "exponential":
        if s <= 0:
            raise DomainError("no sonic point for s <= 0 with exponential flux")
        return math.log(s)
    lo, hi = flux.domain
    g = lambda u: float(flux.a(u)) - s
    if g(lo) * g(hi) > 0:
        raise DomainError(f"f'(u) = {s} has no solution on the tabulated domain")
    return brentq(g, lo, hi, xtol=1e-15, rtol=1e-15)


def rh_states(cfg: ModelConfig, u_plus: float, s: float, branch: str = "detonation") -> RHStates:
    """Both left states u_- solving [f] = s([u] + q) for given u_+ and s.

    Detonation branch (u_- > u_+): strong is the larger root.
    Deflagration branch (u_- < u_+): weak is the larger root.
    """
    if not s > 0:
        raise DomainError("wave speed must be positive")
    flux = cfg.flux
    flux(u_plus)
    a_plus = float(flux.a(u_plus))
    if branch == "detonation" and not s > a_plus:
        raise NoBranch(f"no detonation states: s={s} <= f'(u_+)={a_plus}")
    if branch == "deflagration" and not s < a_plus:
        raise NoBranch(f"no deflagration states: s={s} >= f'(u_+)={a_plus}")
    if branch not in ("detonation", "deflagration"):
        raise ValueError(f"unknown branch {branch!r}")

    target = float(flux.f(u_plus)) - s * u_plus - s * cfg.q
    h = lambda u: float(flux.f(u)) - s * u - target
    uc = _sonic_point(cfg, s)
    hc = h(uc)
    scale = max(1.0, abs(target), abs(s * uc))
    if hc > 1e-14 * scale:
        raise NoBranch(f"speed {s} below the Chapman-Jouguet speed on the {branch} branch")
    if hc > -1e-14 * scale:
        lo_root = hi_root = uc
    else:
        lo, hi = flux.domain
        width = max(1.0, abs(uc))
        br = _expand(h, uc, 0.1 * width, hi)
        if br is None:
            raise DomainError("upper Rankine-Hugoniot root leaves the flux domain")
        hi_root = brentq(h, *br, xtol=1e-15, rtol=1e-15, maxiter=200)
        br = _expand(h, uc, -0.1 * width, lo)
        if br is None:
            raise DomainError("lower Rankine-Hugoniot root leaves the flux domain")
        lo_root = brentq(h, *br, xtol=1e-15, rtol=1e-15, maxiter=200)
    if branch == "detonation":
        return RHStates(strong=hi_root, weak=lo_root, branch=branch)
    return RHStates(strong=lo_root, weak=hi_root, branch=branch)


def _cj_tangency(cfg: ModelConfig, u_plus: float, branch: str) -> float:
    flux, q = cfg.flux, cfg.q
    fp = float(flux.f(u_plus))

    def G(v):
        f, a, _ = flux.raw(v)
        return float(f - fp - a * (v - u_plus - q))

    lo, hi = flux.domain
    if branch == "detonation":
        br = _expand(G, u_plus + q, 0.5 * max(q, 0.1), hi)
    else:
        br = _expand(G, u_plus, -0.5 * max(q, 0.1), lo)
    if br is None:
        raise SolveError(f"could not bracket the {branch} Chapman-Jouguet tangency")
    return brentq(G, *br, xtol=1e-15, rtol=1e-15, maxiter=200)


def cj_states(cfg: ModelConfig, u_plus: float) -> tuple[float, float]:
    """Tangency left states (detonation, deflagration) where f'(u_-) = s."""
    cfg.flux(u_plus)
    return _cj_tangency(cfg, u_plus, "detonation"), _cj_tangency(cfg, u_plus, "deflagration")


def cj_speeds(cfg: ModelConfig, u_plus: float) -> tuple[float, float]:
    """Minimum detonation speed s_* and maximum deflagration speed s^*."""
    v_det, v_def = cj_states(cfg, u_plus)
    return float(cfg.flux.a(v_det)), float(cfg.flux.a(v_def))


def check_ignition_placement(cfg: ModelConfig, u_minus: float, u_plus: float) -> None:
    ig = cfg.ignition
    if not (ig.u_i < u_minus < ig.u_sup):
        raise IgnitionPlacementError(f"left state {u_minus} not strictly inside the ignition band")
    if ig.u_i < u_plus < ig.u_sup:
        raise IgnitionPlacementError(f"right state {u_plus} lies inside the ignition band")


def classify_wave(cfg: ModelConfig, u_minus: float, u_plus: float, s: float) -> WaveSpec:
    flux = cfg.flux
    a_m, a_p = float(flux(u_minus)[1]), float(flux(u_plus)[1])
    am, ap = a_m - s, a_p - s
    fm = float(flux.f(u_minus))
    scale = max(1.0, abs(fm))
    if abs(rh_residual(cfg, u_minus, u_plus, s)) > RH_TOL * scale:
        raise NotAWave(f"Rankine-Hugoniot condition fails for ({u_minus}, {u_plus}, {s})")
    check_ignition_placement(cfg, u_minus, u_plus)
    cj = abs(am) <= CJ_TOL * max(1.0, s)
    if u_minus > u_plus:
        if cj and ap < 0:
            cls = WaveClass.CJ_DETONATION
        elif am > 0 > ap:
            cls = WaveClass.STRONG_DETONATION
        elif am < 0 and ap < 0:
            cls = WaveClass.WEAK_DETONATION
        else:
            raise NotAWave("detonation endstates violate both Lax and weak conditions")
    elif u_minus < u_plus:
        if cj and ap > 0:
            cls = WaveClass.CJ_DEFLAGRATION
        elif am > 0 and ap > 0:
            cls = WaveClass.WEAK_DEFLAGRATION
        elif ap > 0 > am:
            cls = WaveClass.STRONG_DEFLAGRATION
        else:
            raise NotAWave("deflagration endstates violate both weak and reverse-Lax conditions")
    else:
        raise NotAWave("equal endstates")
    return WaveSpec(u_minus, u_plus, s, cls, am, ap)


def gas_dynamical_wave(cfg: ModelConfig, u_l: float, u_r: float, z_frozen: float) -> WaveSpec | None:
    """Inert shock or rarefaction at frozen z; None for zero strength."""
    flux = cfg.flux
    f_l, a_l, _ = flux(u_l)
    f_r, a_r, _ = flux(u_r)
    if u_l == u_r:
        return None
    if u_l > u_r:
        s = float((f_l - f_r) / (u_l - u_r))
        return WaveSpec(u_l, u_r, s, WaveClass.INERT_SHOCK, float(a_l) - s, float(a_r) - s,
                        z_minus=z_frozen, z_plus=z_frozen)
    return WaveSpec(u_l, u_r, float(a_l), WaveClass.INERT_RAREFACTION, 0.0, 0.0,
                    z_minus=z_frozen, z_plus=z_frozen, speed_range=(float(a_l), float(a_r)))


def rest_point_analysis(cfg: ModelConfig, u: float, z: float, s: float,
                        u_plus: float | None = None) -> RestPointAnalysis:
    """Linearisation [[alpha, -s q], [0, (k/s) phi(u)]] at a rest point.

    ``u_plus`` (the right endstate) enables the check u' = 0; without it
    only z' = 0 is checked.
    """
    flux, q, k = cfg.flux, cfg.q, cfg.k
    f, a, _ = flux(u)
    phi = cfg.phi(u)
    if abs(k / s * phi * z) > 1e-10:
        raise NotRestPoint(f"(u, z) = ({u}, {z}) is not a rest point: z' != 0")
    if u_plus is not None:
        F = f - flux.f(u_plus) - s * (u - u_plus) - s * q * (z - 1.0)
        if abs(F) > 1e-10 * max(1.0, abs(f)):
            raise NotRestPoint(f"(u, z) = ({u}, {z}) is not a rest point: u' = {F}")
    alpha = float(a - s)
    r = float(k / s * phi)
    tol = 1e-12 * max(1.0, s)
    v_kin = (1.0, 0.0)
    v_re = np.array([s * q, alpha - r])
    v_re = tuple(float(c) for c in v_re / np.linalg.norm(v_re))
    center = None
    if r == 0.0:
        center = (s * q, alpha)
        if alpha < -tol:
            kind = "SaddleAttractor"
        elif alpha > tol:
            kind = "SaddleRepellor"
        else:
            kind = "DegenerateCenter"
    elif abs(alpha) <= tol:
        kind = "SaddleRepellor"
    elif alpha > 0:
        kind = "Repellor"
    else:
        kind = "Saddle"
    return RestPointAnalysis((alpha, r), (v_kin, v_re), kind, center)


# ---------------------------------------------------------------------------
# traveling-wave vector field
# ---------------------------------------------------------------------------

def tw_field(cfg: ModelConfig, u_plus: float, s: float):
    flux, ig, q, k = cfg.flux, cfg.ignition, cfg.q, cfg.k
    f_plus = float(flux.f(u_plus))

    def F(u, z):
        return flux.f(u) - f_plus - s * (u - u_plus) - s * q * (z - 1.0)

    def G(u, z):
        return k / s * ig(u)[0] * z

    return F, G


# ---------------------------------------------------------------------------
# Melnikov separation
# ---------------------------------------------------------------------------

def _unstable_direction(cfg, u_minus, s):
    """Unit vector of the reactive unstable manifold of (u_-, 0), pointing into z > 0."""
    alpha = float(cfg.flux.a(u_minus)) - s
    r = cfg.k / s * cfg.phi(u_minus)
    v = np.array([-s * cfg.q, r - alpha])
    return v / np.linalg.norm(v), alpha, r


def melnikov_separation(cfg: ModelConfig, u_plus: float, s: float, *,
                        rtol: float = 1e-12, atol: float = 1e-14,
                        eps: float = SHOOT_EPS, method: str = "Radau") -> MelnikovResult:
    """d = zhat - 1, where zhat is the height at which the unstable manifold
    of the weak left state (u_-, 0) reaches u = u_i.

    The orbit is followed as a graph z(u): u decreases monotonically inside
    the trapping region F < 0, so dz/du = G/F is regular on (u_i, u_-).
    """
    ig = cfg.ignition
    u_minus = rh_states(cfg, u_plus, s).weak
    if not ig.u_i < u_minus < ig.u_sup:
        raise IgnitionPlacementError(f"weak left state {u_minus} outside the ignition band")
    F, G = tw_field(cfg, u_plus, s)
    v, _, r = _unstable_direction(cfg, u_minus, s)
    if not r > 0:
        raise SolveError("left state does not react")
    u0 = u_minus + eps * v[0]
    z0 = eps * v[1]

    def rhs(u, y):
        return [G(u, y[0]) / F(u, y[0])]

    stall_tol = 1e-9 * max(1.0, abs(float(F(ig.u_i, 1.0))))

    def leaves(u, y):
        return F(u, y[0]) + stall_tol
    leaves.terminal = True
    leaves.direction = 1

    sol = solve_ivp(rhs, (u0, ig.u_i), [z0], method=method, rtol=rtol, atol=atol,
                    events=leaves)
    if sol.status == -1:
        raise SolveError(f"Melnikov shooting failed: {sol.message}")
    zhat = float(sol.y[0, -1])
    if sol.status == 1:
        u_exit = float(sol.t_events[0][0])
        # F < 0 is invariant while phi > 0; a numerical touch of the nullcline
        # next to u_i means the orbit stalls at the rest point (u_i, z_null)
        if u_exit - ig.u_i > 1e-2 * (ig.u_sup - ig.u_i):
            raise SolveError(f"orbit left the trapping region F <= 0 at u = {u_exit}")
        zhat = 1.0 + float(F(ig.u_i, 1.0)) / (s * cfg.q)
    return MelnikovResult(d=zhat - 1.0, zhat=zhat, u_minus=u_minus, s=s)


def separation(cfg: ModelConfig, u_plus: float, s: float, **kw) -> float:
    return melnikov_separation(cfg, u_plus, s, **kw).d


def separation_partials(cfg: ModelConfig, u_plus: float, s: float, rel_step: float = 1e-4) -> dict:
    """Centered finite-difference partials of d in s, u_+, k and q."""
    out = {}
    h = rel_step * s
    out["s"] = (separation(cfg, u_plus, s + h) - separation(cfg, u_plus, s - h)) / (2 * h)
    h = rel_step * max(abs(u_plus), 1e-3)
    out["u_plus"] = (separation(cfg, u_plus + h, s) - separation(cfg, u_plus - h, s)) / (2 * h)
    h = rel_step * cfg.k
    out["k"] = (separation(cfg.replace(k=cfg.k + h), u_plus, s)
                - separation(cfg.replace(k=cfg.k - h), u_plus, s)) / (2 * h)
    h = rel_step * cfg.q
    out["q"] = (separation(cfg.replace(q=cfg.q + h), u_plus, s)
                - separation(cfg.replace(q=cfg.q - h), u_plus, s)) / (2 * h)
    return out


def find_weak_detonation_speed(cfg: ModelConfig, u_plus: float,
                               bracket: tuple[float, float] | None = None,
                               tol: float = 1e-8) -> float:
    """Speed s_hat > s_* with d(s_hat) = 0, by bracketing on the monotone d(s).

    Raises :class:`NoThreshold` when d <= 0 at the lower end (case (i)).
    """
    s_star = cj_speeds(cfg, u_plus)[0]
    if bracket is None:
        s_lo, s_hi = s_star, None
    else:
        s_lo, s_hi = map(float, bracket)
        if s_lo < s_star * (1 - 1e-12):
            raise BracketError(f"lower bracket {s_lo} below the CJ speed {s_star}")
    d_lo = separation(cfg, u_plus, s_lo)
    if d_lo <= 0.0:
        raise NoThreshold(f"d(s_lo) = {d_lo:.6g} <= 0: no weak-detonation speed", d_lo=d_lo)
    if s_hi is None:
        s_hi = s_lo
        for _ in range(60):
            s_hi = s_hi * 1.25
            try:
                d_hi = separation(cfg, u_plus, s_hi)
            except IgnitionPlacementError:
                raise BracketError("weak left state leaves the ignition band before d changes sign")
            if d_hi < 0.0:
                break
        else:
            raise BracketError("could not find a speed with d < 0")
    else:
        d_hi = separation(cfg, u_plus, s_hi)
        if d_hi > 0.0:
            raise BracketError(f"d does not change sign on [{s_lo}, {s_hi}]")
    g = lambda s: separation(cfg, u_plus, s)
    s_hat = brentq(g, s_lo, s_hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    d = g(s_hat)
    if abs(d) > tol:
        raise SolveError(f"bracketing stalled with |d| = {abs(d):.3g}")
    return float(s_hat)


def cj_diagram(cfg: ModelConfig, u_plus: float, s_grid) -> list[tuple[float, float | None, float | None]]:
    """Rows (s, strong u_-, weak u_-); rows without a detonation state are empty."""
    rows = []
    for s in s_grid:
        try:
            r = rh_states(cfg, u_plus, float(s))
            rows.append((float(s), r.strong, r.weak))
        except (NoBranch, DomainError):
            rows.append((float(s), None, None))
    return rows


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

@dataclass
class Profile:
    """Traveling wave sampled on a uniform grid, x = 0 at the u-midpoint."""

    cfg: ModelConfig
    wave: WaveSpec
    x: np.ndarray
    u: np.ndarray
    z: np.ndarray
    ux: np.ndarray
    zx: np.ndarray
    degenerate: bool = False
    zhat: float | None = None
    tail_rates: dict = field(default_factory=dict)
    expected_rates: dict = field(default_factory=dict)
    truncation_error: float = 0.0

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def L(self) -> tuple[float, float]:
        return float(self.x[0]), float(self.x[-1])

    def endstate_gap(self) -> tuple[float, float]:
        w = self.wave
        left = max(abs(self.u[0] - w.u_minus), abs(self.z[0] - w.z_minus))
        right = max(abs(self.u[-1] - w.u_plus), abs(self.z[-1] - w.z_plus))
        return float(left), float(right)

    def residual(self) -> float:
        """Max defect of (u, z)' = (F, G) with 4th-order centered differences, scaled."""
        h = self.h
        def d4(v):
            return (v[:-4] - 8 * v[1:-3] + 8 * v[3:-1] - v[4:]) / (12 * h)
        F, G = tw_field(self.cfg, self.wave.u_plus, self.wave.s)
        if not self.wave.cls.is_combustion:
            F = _inert_field(self.cfg, self.wave)
            G = lambda u, z: 0.0 * u
        u, z = self.u[2:-2], self.z[2:-2]
        # phi is only C1: skip stencils straddling an ignition threshold,
        # where the difference formula itself drops to second order
        ig = self.cfg.ignition
        keep = np.ones(u.size, dtype=bool)
        for th in (ig.u_i, ig.u_sup):
            side = self.u > th
            flips = np.flatnonzero(side[1:] != side[:-1])
            for j in flips:
                keep[max(j - 4, 0):j + 2] = False
        ru = np.max(np.abs(d4(self.u) - F(u, z))[keep])
        rz = np.max(np.abs(d4(self.z) - G(u, z))[keep])
        scale = max(1.0, abs(self.wave.u_minus - self.wave.u_plus))
        return float(max(ru, rz) / scale)

    def sidecar(self) -> dict:
        return {"wave": self.wave.to_dict(), "L": list(self.L), "h": self.h,
                "decay_rates": self.tail_rates, "expected_rates": self.expected_rates,
                "degenerate": self.degenerate, "zhat": self.zhat,
                "truncation_error": self.truncation_error}


def _inert_field(cfg, wave):
    f_plus = float(cfg.flux.f(wave.u_plus))
    s, up = wave.s, wave.u_plus
    return lambda u, z: cfg.flux.f(u) - f_plus - s * (u - up)


def _fit_rate(x, dist, lo=1e-9, hi=1e-5):
    m = (dist > lo) & (dist < hi)
    if m.sum() < 5:
        return None
    return float(np.polyfit(x[m], np.log(dist[m]), 1)[0])


def _x_cap(wave: WaveSpec, r_minus: float) -> float:
    rates = [abs(wave.alpha_minus), abs(wave.alpha_plus)]
    if r_minus > 0:
        rates.append(r_minus)
    rates = [r for r in rates if r > 1e-12]
    return 200.0 / min(rates)


def _assemble(cfg, wave, pieces, h, **extra) -> Profile:
    """pieces: callables/arrays covering increasing x; each is (x_lo, x_hi, fun(x)->(u,z))."""
    x_lo, x_hi = pieces[0][0], pieces[-1][1]

    def evaluate(xs):
        u = np.empty_like(xs)
        z = np.empty_like(xs)
        for a, b, fun in pieces:
            m = (xs >= a) & (xs <= b)
            if m.any():
                u[m], z[m] = fun(xs[m])
        return u, z

    mid = 0.5 * (wave.u_minus + wave.u_plus)
    probe = np.linspace(x_lo, x_hi, 20001)
    up, _ = evaluate(probe)
    j = int(np.argmax((up - mid) * np.sign(wave.u_minus - wave.u_plus) <= 0))
    x0 = brentq(lambda t: evaluate(np.array([t]))[0][0] - mid, probe[max(j - 1, 0)], probe[j],
                xtol=1e-14)
    n_lo = math.ceil((x_lo - x0) / h)
    n_hi = math.floor((x_hi - x0) / h)
    xs = np.arange(n_lo, n_hi + 1) * h
    u, z = evaluate(xs + x0)
    if wave.cls.is_combustion:
        F, G = tw_field(cfg, wave.u_plus, wave.s)
        ux, zx = F(u, z), G(u, z)
    else:
        ux, zx = _inert_field(cfg, wave)(u, z), np.zeros_like(u)
    return Profile(cfg, wave, xs, u, z, np.asarray(ux, float), np.asarray(zx, float), **extra)


def _eigen_rates(p: Profile, u_end: float, z_end: float, side: str) -> dict:
    """Log-linear rates of the deviation's components in the rest-point eigenbasis.

    Keys are ``'kinetic'`` (eigenvalue alpha, direction (1, 0)) and
    ``'reactive'`` (eigenvalue (k/s) phi, direction (s q, alpha - r)).
    """
    w, cfg = p.wave, p.cfg
    s = w.s
    alpha = float(cfg.flux.a(u_end)) - s
    r = cfg.k / s * cfg.phi(u_end) if w.cls.is_combustion else 0.0
    du, dz = p.u - u_end, p.z - z_end
    dist = np.hypot(du, dz)
    half = p.x < 0 if side == "minus" else p.x > 0
    out = {}
    if r > 0 and abs(alpha - r) > 1e-14:
        # (du, dz) = c1 (1, 0) + c2 (s q, alpha - r)
        c2 = dz / (alpha - r)
        c1 = du - s * cfg.q * c2
        comps = {"kinetic": c1, "reactive": c2}
    else:
        comps = {"kinetic": du}
    for name, c in comps.items():
        m = half & (dist > 1e-9) & (dist < 1e-5) & (np.abs(c) > 1e-11)
        if m.sum() >= 5:
            out[name] = float(np.polyfit(p.x[m], np.log(np.abs(c[m])), 1)[0])
    return out


def _tail_rates(p: Profile) -> dict:
    w = p.wave
    left = np.hypot(p.u - w.u_minus, p.z - w.z_minus)
    right = np.hypot(p.u - w.u_plus, p.z - w.z_plus)
    out = {"minus": _fit_rate(p.x, left), "plus": None if p.degenerate else _fit_rate(p.x, right)}
    out["minus_components"] = _eigen_rates(p, w.u_minus, w.z_minus, "minus")
    if not p.degenerate:
        out["plus_components"] = _eigen_rates(p, w.u_plus, w.z_plus, "plus")
    return out


def compute_profile(cfg: ModelConfig, wave: WaveSpec, h: float = 0.01,
                    delta_tail: float = DELTA_TAIL, eps: float = SHOOT_EPS) -> Profile:
    ig = cfg.ignition
    if wave.u_plus in (ig.u_i, ig.u_sup):
        warnings.warn(f"right state {wave.u_plus} sits on an ignition threshold", DegenerateEndstate)
    cls = wave.cls
    if cls == WaveClass.STRONG_DEFLAGRATION:
        raise NoConnection("strong deflagrations admit no connecting profile")
    if cls in (WaveClass.CJ_DETONATION, WaveClass.CJ_DEFLAGRATION, WaveClass.INERT_RAREFACTION):
        raise DegenerateProfile(f"no profile construction for {cls.value}")
    if cls == WaveClass.INERT_SHOCK:
        return _inert_profile(cfg, wave, h, delta_tail)
    if cls == WaveClass.STRONG_DETONATION:
        return _strong_profile(cfg, wave, h, delta_tail, eps)
    if cls == WaveClass.WEAK_DETONATION:
        return _weak_profile(cfg, wave, h, delta_tail, eps)
    return _deflagration_profile(cfg, wave, h, delta_tail)


def _rhs(cfg, wave):
    F, G = tw_field(cfg, wave.u_plus, wave.s)
    return lambda x, y: [F(y[0], y[1]), G(y[0], y[1])]


def _strong_profile(cfg, wave, h, delta_tail, eps):
    s, um, up = wave.s, wave.u_minus, wave.u_plus
    r_minus = cfg.k / s * cfg.phi(um)
    cap = _x_cap(wave, r_minus)
    ap = wave.alpha_plus

    def near_minus(x, y):
        return abs(y[0] - um) + abs(y[1]) - delta_tail / 10
    near_minus.terminal = True

    sol = solve_ivp(_rhs(cfg, wave), (0.0, -cap), [up + eps, 1.0], method="DOP853",
                    rtol=1e-11, atol=1e-13, dense_output=True, events=near_minus)
    if sol.status != 1:
        raise NoConnection(f"backward stable manifold did not reach (u_-, 0) within L = {cap:.4g}")
    x_start = float(sol.t[-1])
    # linear stable-manifold tail: z = 1, u - u_+ = eps e^{alpha_+ x}
    x_end = math.log(delta_tail / 10 / eps) / ap
    pieces = [(x_start, 0.0, lambda t: sol.sol(t)),
              (0.0, x_end, lambda t: (up + eps * np.exp(ap * t), np.ones_like(t)))]
    p = _assemble(cfg, wave, pieces, h)
    p.expected_rates = {"minus": min(wave.alpha_minus, r_minus), "plus": ap,
                        "alpha_minus": wave.alpha_minus, "reactive": r_minus}
    p.tail_rates = _tail_rates(p)
    return p


def _weak_profile(cfg, wave, h, delta_tail, eps):
    s, um, up = wave.s, wave.u_minus, wave.u_plus
    mel = melnikov_separation(cfg, up, s)
    if abs(mel.d) > 1e-6:
        raise NoConnection(f"s = {s} is not a weak-detonation speed (d = {mel.d:.3g})")
    v, _, r = _unstable_direction(cfg, um, s)
    cap = _x_cap(wave, r)
    slack = delta_tail / 10 + 2 * abs(mel.d) * max(1.0, s * cfg.q / abs(wave.alpha_plus))

    def near_plus(x, y):
        return abs(y[0] - up) + abs(y[1] - 1.0) - slack
    near_plus.terminal = True

    sol = solve_ivp(_rhs(cfg, wave), (0.0, cap), [um + eps * v[0], eps * v[1]], method="DOP853",
                    rtol=1e-11, atol=1e-13, dense_output=True, events=near_plus)
    if sol.status != 1:
        raise NoConnection(f"unstable manifold did not reach (u_+, 1) within L = {cap:.4g}")
    x_end = float(sol.t[-1])
    x_start = math.log(delta_tail / 10 / eps) / r
    pieces = [(x_start, 0.0, lambda t: (um + eps * v[0] * np.exp(r * t), eps * v[1] * np.exp(r * t))),
              (0.0, x_end, lambda t: sol.sol(t))]
    p = _assemble(cfg, wave, pieces, h, zhat=mel.zhat)
    p.expected_rates = {"minus": r, "plus": wave.alpha_plus, "alpha_minus": wave.alpha_minus,
                        "reactive": r}
    p.tail_rates = _tail_rates(p)
    return p


def _deflagration_profile(cfg, wave, h, delta_tail, eps_center=1e-3, max_points=200_000):
    ig = cfg.ignition
    s, um, up = wave.s, wave.u_minus, wave.u_plus
    if abs(up - ig.u_sup) > 1e-12 * max(1.0, ig.u_sup):
        raise NoConnection("weak deflagrations connect only to a right state at the upper ignition threshold")
    c = np.array([s * cfg.q, wave.alpha_plus])
    c /= np.linalg.norm(c)
    r_minus = cfg.k / s * cfg.phi(um)
    # F and G vanish to second order along the centre direction, so the orbit
    # leaves (u_+, 1) algebraically slowly; no useful a-priori x cap exists
    eps = eps_center * max(1.0, abs(up - um))

    def near_minus(x, y):
        return abs(y[0] - um) + abs(y[1]) - delta_tail / 10
    near_minus.terminal = True

    y0 = [up - eps * c[0], 1.0 - eps * c[1]]
    sol = solve_ivp(_rhs(cfg, wave), (0.0, -1e12), y0, method="Radau", rtol=1e-10, atol=1e-13,
                    dense_output=True, events=near_minus)
    if sol.status != 1:
        raise NoConnection("backward centre-manifold trace did not reach (u_-, 0)")
    span = -float(sol.t[-1])
    h = max(h, span / max_points)
    pieces = [(float(sol.t[-1]), 0.0, lambda t: sol.sol(t))]
    p = _assemble(cfg, wave, pieces, h, degenerate=True, truncation_error=eps)
    p.expected_rates = {"minus": min(wave.alpha_minus, r_minus), "plus": None}
    p.tail_rates = _tail_rates(p)
    return p


def _inert_profile(cfg, wave, h, delta_tail):
    F = _inert_field(cfg, wave)
    um, up = wave.u_minus, wave.u_plus
    mid = 0.5 * (um + up)
    rhs = lambda x, y: [F(y[0], 0.0)]
    cap = _x_cap(wave, 0.0)

    def near(target):
        ev = lambda x, y: abs(y[0] - target) - delta_tail / 10
        ev.terminal = True
        return ev

    fwd = solve_ivp(rhs, (0.0, cap), [mid], method="DOP853", rtol=1e-11, atol=1e-13,
                    dense_output=True, events=near(up))
    bwd = solve_ivp(rhs, (0.0, -cap), [mid], method="DOP853", rtol=1e-11, atol=1e-13,
                    dense_output=True, events=near(um))
    if fwd.status != 1 or bwd.status != 1:
        raise NoConnection("inert shock profile did not reach its endstates")
    zf = wave.z_plus
    pieces = [(float(bwd.t[-1]), 0.0, lambda t: (bwd.sol(t)[0], np.full_like(t, zf))),
              (0.0, float(fwd.t[-1]), lambda t: (fwd.sol(t)[0], np.full_like(t, zf)))]
    p = _assemble(cfg, wave, pieces, h)
    p.expected_rates = {"minus": wave.alpha_minus, "plus": wave.alpha_plus}
    p.tail_rates = _tail_rates(p)
    return p


# ---------------------------------------------------------------------------
# Melnikov derivative along a computed profile
# ---------------------------------------------------------------------------

def melnikov_derivative_s(cfg: ModelConfig, profile: Profile, with_fd: bool = False) -> MelnikovResult:
    """dd/ds at a weak-detonation speed from a quadrature along the profile.

    With V = (F, G) and dV/ds = (-(u - u_+) - q (z - 1), -G/s), the variation
    of the crossing height at the section u = u_i is

        dd/ds = (1/F(u_i, 1)) * int_{-inf}^{x_i} exp(int_y^{x_i} tr) det[V, dV/ds] dy,

    tr = alpha(u) + (k/s) phi(u).  ``integral`` holds the sign-definite
    weighted integral of (z_x/s)(2u' - (f(u) - f(u_+))) normalised at x = 0,
    which is negative.
    """
    from scipy.integrate import cumulative_simpson, simpson

    if profile.degenerate:
        raise DegenerateProfile("Melnikov derivative needs a nondegenerate profile")
    w = profile.wave
    if w.cls != WaveClass.WEAK_DETONATION:
        raise DegenerateProfile("Melnikov derivative is defined for weak detonations only")
    s, up, q, k = w.s, w.u_plus, cfg.q, cfg.k
    x, u, z = profile.x, profile.u, profile.z
    F, G = tw_field(cfg, up, s)
    Fv, Gv = F(u, z), G(u, z)
    f, a, _ = cfg.flux.raw(u)
    tr = a - s + k / s * cfg.phi(u)
    # sign-definite integrand (z_x / s)(2 u' - (f - f_+)) = -det[V, dV/ds]
    integrand = Gv / s * (2 * Fv - (f - float(cfg.flux.f(up))))
    cum = cumulative_simpson(tr, x=x, initial=0.0)
    i0 = int(np.argmin(np.abs(x)))
    weight = np.exp(-(cum - cum[i0]))
    body = weight * integrand
    # exponential tail beyond the grid: integrand ~ exp(-alpha_- (x - x_0))
    tail = body[0] / abs(w.alpha_minus)
    integral = float(simpson(body, x=x) + tail)
    # crossing of u = u_i
    ig = cfg.ignition
    j = max(int(np.argmax(u <= ig.u_i)), 1)
    xi = float(x[j - 1] + (ig.u_i - u[j - 1]) * (x[j] - x[j - 1]) / (u[j] - u[j - 1]))
    cum_xi = float(np.interp(xi, x, cum))
    dd_ds = -integral * math.exp(cum_xi - cum[i0]) / float(F(ig.u_i, 1.0))
    res = MelnikovResult(d=0.0, zhat=profile.zhat if profile.zhat is not None else 1.0,
                         u_minus=w.u_minus, s=s, dd_ds=float(dd_ds), integral=integral)
    if with_fd:
        hs = 1e-4 * s
        res.dd_ds_fd = (separation(cfg, up, s + hs) - separation(cfg, up, s - hs)) / (2 * hs)
    return res
