"""Riemann problems solved within the class of waves that carry viscous profiles.

Data U_L = (u_L, z_L), U_R = (u_R, z_R) with the combustion convention
z_L = 0 (burned) and z_R = 1 (unburned); equal z reduces to the inert
conservation law.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateEndstate, NoSolution, NoThreshold, UnsupportedData
from .model import ModelConfig
from .profiles import (WaveSpec, cj_states, classify_wave, find_weak_detonation_speed,
                       gas_dynamical_wave, rh_states, separation)

__all__ = ["RiemannSolution", "solve_riemann", "gas_dynamical_wave", "check_solution",
           "detonation_case", "cj_shift_report", "cj_shift_row", "CJShiftReport"]


@dataclass
class RiemannSolution:
    waves: list[WaveSpec]
    case_label: str
    detonation_case: str | None = None
    s_hat: float | None = None
    side_list: list[str] = field(default_factory=list)

    @property
    def speeds(self) -> list:
        return [w.speed_range if w.speed_range is not None else w.s for w in self.waves]

    def to_dict(self) -> dict:
        return {"case": self.case_label, "detonation_case": self.detonation_case,
                "s_hat": self.s_hat, "waves": [w.to_dict() for w in self.waves],
                "side_list": self.side_list}

    def sample(self, cfg: ModelConfig, xi, U_L):
        """Self-similar solution (u, z) at x/t = xi."""
        xi = np.asarray(xi, dtype=float)
        u = np.full(xi.shape, float(U_L[0]))
        z = np.full(xi.shape, float(U_L[1]))
        for w in self.waves:
            if w.speed_range is None:
                m = xi > w.s
                u[m], z[m] = w.u_plus, w.z_plus
            else:
                lo, hi = w.speed_range
                inside = (xi > lo) & (xi < hi)
                u[inside] = _invert_speed(cfg, w, xi[inside])
                z[inside] = w.z_plus
                m = xi >= hi
                u[m], z[m] = w.u_plus, w.z_plus
        return u, z


def _invert_speed(cfg, w: WaveSpec, xi):
    """u inside a rarefaction fan: f'(u) = xi."""
    if cfg.flux.kind == "burgers":
        return xi
    if cfg.flux.kind == "exponential":
        return np.log(xi)
    from scipy.optimize import brentq
    return np.array([brentq(lambda v: float(cfg.flux.a(v)) - c, w.u_minus, w.u_plus) for c in xi])


def _fan(cfg, ul, ur, z):
    return gas_dynamical_wave(cfg, ul, ur, z)


_CASE_CACHE: dict = {}


def detonation_case(cfg: ModelConfig, u_r: float):
    """('ii', s_hat) when a weak detonation into u_r exists, else ('i', None).

    Memoised on the serialised config, since the speed search dominates the cost.
    """
    key = (json.dumps(cfg.to_dict(), sort_keys=True), float(u_r))
    if key not in _CASE_CACHE:
        try:
            _CASE_CACHE[key] = ("ii", find_weak_detonation_speed(cfg, u_r))
        except NoThreshold:
            _CASE_CACHE[key] = ("i", None)
    return _CASE_CACHE[key]


def _rest_state_ok(cfg, u, z) -> bool:
    ig = cfg.ignition
    return z == 0.0 or not (ig.u_i < u < ig.u_sup)


def solve_riemann(cfg: ModelConfig, U_L, U_R) -> RiemannSolution:
    u_l, z_l = map(float, U_L)
    u_r, z_r = map(float, U_R)
    ig = cfg.ignition
    cfg.flux(np.array([u_l, u_r]))
    if z_l not in (0.0, 1.0) or z_r not in (0.0, 1.0):
        raise UnsupportedData("z data must be 0 or 1")
    if z_l == z_r:
        return _inert(cfg, u_l, u_r, z_l)
    if z_l == 1.0:
        raise UnsupportedData("z_L = 1, z_R = 0: no wave increases z; diffusive scaling, outside the catalog")

    # z_L = 0, z_R = 1
    if u_l >= ig.u_sup and u_r > ig.u_i:
        raise NoSolution("no Riemann solution (case IV)")
    if not _rest_state_ok(cfg, u_r, z_r):
        raise NoSolution(f"right state ({u_r}, 1) lies inside the ignition band and is not a rest state")
    if u_l < ig.u_sup and u_r >= ig.u_sup:
        return _case_one(cfg, u_l, u_r)
    if u_r == ig.u_i:
        warnings.warn("right state sits on the lower ignition threshold", DegenerateEndstate)
    if u_l < ig.u_sup:
        sol = _case_two(cfg, u_l, u_r)
        if u_r == ig.u_i:
            sol.case_label = "III"
            sol.side_list.append(
                "degenerate alternatives: any strong detonation with s > s_* may be replaced by a "
                "shock followed by a degenerate weak detonation into u_i; excluded (nondegenerate class)")
        return sol
    return _case_five(cfg, u_l, u_r)


def _inert(cfg, u_l, u_r, z):
    ig = cfg.ignition
    if z == 1.0:
        if not (_rest_state_ok(cfg, u_l, 1.0) and _rest_state_ok(cfg, u_r, 1.0)):
            raise UnsupportedData("unburned data inside the ignition band are not rest states")
        if (u_l <= ig.u_i) != (u_r <= ig.u_i):
            raise UnsupportedData("unburned data on opposite sides of the ignition band: diffusive scaling")
    w = _fan(cfg, u_l, u_r, z)
    return RiemannSolution([w] if w is not None else [], "inert")


def _combustion(cfg, um, up, s):
    return classify_wave(cfg, um, up, s)


def _case_one(cfg, u_l, u_r):
    ig = cfg.ignition
    u_up = ig.u_sup
    _, u_cj = cj_states(cfg, u_up)
    waves = []
    if u_l > u_cj:
        label = "Ia"
        s = float((cfg.flux.f(u_up) - cfg.flux.f(u_l)) / (u_up - u_l + cfg.q))
        waves.append(_combustion(cfg, u_l, u_up, s))
    else:
        label = "Ib"
        waves.append(_fan(cfg, u_l, u_cj, 0.0))
        s = float(cfg.flux.a(u_cj))
        waves.append(_combustion(cfg, u_cj, u_up, s))
    waves.append(_fan(cfg, u_up, u_r, 1.0))
    return RiemannSolution([w for w in waves if w is not None], label)


def _case_two(cfg, u_l, u_r):
    case, s_hat = detonation_case(cfg, u_r)
    if case == "i":
        u_cj, _ = cj_states(cfg, u_r)
        if u_l > u_cj:
            s = float((cfg.flux.f(u_r) - cfg.flux.f(u_l)) / (u_r - u_l + cfg.q))
            return RiemannSolution([_combustion(cfg, u_l, u_r, s)], "IIa", "i")
        s_star = float(cfg.flux.a(u_cj))
        waves = [_fan(cfg, u_l, u_cj, 0.0), _combustion(cfg, u_cj, u_r, s_star)]
        return RiemannSolution([w for w in waves if w is not None], "IIb", "i")
    st = rh_states(cfg, u_r, s_hat)
    if u_l > st.strong:
        s = float((cfg.flux.f(u_r) - cfg.flux.f(u_l)) / (u_r - u_l + cfg.q))
        return RiemannSolution([_combustion(cfg, u_l, u_r, s)], "IIa'", "ii", s_hat)
    waves = [_fan(cfg, u_l, st.weak, 0.0), _combustion(cfg, st.weak, u_r, s_hat)]
    return RiemannSolution([w for w in waves if w is not None], "IIb'", "ii", s_hat)


def _case_five(cfg, u_l, u_r):
    case, s_hat = detonation_case(cfg, u_r)
    if case == "i":
        raise NoSolution("no Riemann solution (case V requires a weak detonation; detonation case (i))")
    st = rh_states(cfg, u_r, s_hat)
    if not (cfg.ignition.u_sup <= u_l <= st.strong):
        raise NoSolution(f"no Riemann solution (case V needs u_L <= u^* = {st.strong:.10g})")
    waves = [_fan(cfg, u_l, st.weak, 0.0), _combustion(cfg, st.weak, u_r, s_hat)]
    return RiemannSolution([w for w in waves if w is not None], "V", "ii", s_hat)


def check_solution(cfg: ModelConfig, sol: RiemannSolution, U_L, U_R, tol: float = 1e-10) -> list[str]:
    """Violations of the speed-ordering, chaining and rest-state invariants."""
    problems = []
    waves = sol.waves
    if not waves:
        if (U_L[0], U_L[1]) != (U_R[0], U_R[1]):
            problems.append("empty wave list for distinct data")
        return problems
    if abs(waves[0].u_minus - U_L[0]) > tol or waves[0].z_minus != U_L[1]:
        problems.append("first wave does not start at U_L")
    if abs(waves[-1].u_plus - U_R[0]) > tol or waves[-1].z_plus != U_R[1]:
        problems.append("last wave does not end at U_R")
    prev_hi = -math.inf
    for j, w in enumerate(waves):
        lo, hi = w.speed_range if w.speed_range is not None else (w.s, w.s)
        if lo < prev_hi - tol:
            problems.append(f"wave {j} slower than its predecessor")
        prev_hi = hi
        if w.u_minus == w.u_plus and w.z_minus == w.z_plus:
            problems.append(f"wave {j} has zero strength")
        if j + 1 < len(waves):
            nxt = waves[j + 1]
            if abs(w.u_plus - nxt.u_minus) > tol or w.z_plus != nxt.z_minus:
                problems.append(f"waves {j} and {j + 1} do not chain")
            if not _rest_state_ok(cfg, w.u_plus, w.z_plus):
                problems.append(f"intermediate state after wave {j} is not a rest state")
    return problems


# ---------------------------------------------------------------------------
# CJ shift
# ---------------------------------------------------------------------------

@dataclass
class CJShiftReport:
    rows: list[dict]
    k0_bracket: tuple[float, float] | None

    def to_dict(self) -> dict:
        return {"rows": self.rows, "k0_bracket": list(self.k0_bracket) if self.k0_bracket else None}


def _d_at_cj(cfg, u_r):
    u_cj, _ = cj_states(cfg, u_r)
    return separation(cfg, u_r, float(cfg.flux.a(u_cj)))


def cj_shift_row(cfg: ModelConfig, u_r: float, k: float) -> dict:
    c = cfg.replace(k=k)
    case, s_hat = detonation_case(c, u_r)
    u_cj, _ = cj_states(c, u_r)
    row = {"k": k, "case": case, "speed": s_hat if case == "ii" else float(c.flux.a(u_cj))}
    if case == "ii":
        row["d_at_speed"] = separation(c, u_r, s_hat)
        row["wave"] = "WeakDetonation"
    else:
        row["wave"] = "CJDetonation"
    return row


def cj_shift_report(cfg: ModelConfig, u_r: float, k_grid, rel_tol: float = 1e-3,
                    map_fn=map) -> CJShiftReport:
    """Case (i)/(ii) per k, minimum-speed wave, and a bisected bracket for k_0.

    The transition is where d(s_*; k) changes sign, d being nondecreasing in k.
    ``map_fn`` evaluates the per-k rows (pass an executor's map to parallelise).
    """
    ks = sorted(float(v) for v in k_grid)
    rows = list(map_fn(cj_shift_row, [cfg] * len(ks), [u_r] * len(ks), ks))
    lo = max((r["k"] for r in rows if r["case"] == "i"), default=None)
    hi = min((r["k"] for r in rows if r["case"] == "ii" and (lo is None or r["k"] > lo)), default=None)
    bracket = None
    if lo is not None and hi is not None:
        while (hi - lo) > rel_tol * hi:
            mid = 0.5 * (lo + hi)
            if _d_at_cj(cfg.replace(k=mid), u_r) > 0.0:
                hi = mid
            else:
                lo = mid
        bracket = (lo, hi)
    return CJShiftReport(rows, bracket)
