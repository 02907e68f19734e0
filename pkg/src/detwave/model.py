"""Majda model instance: convex flux, bump ignition function, parameters."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import DomainError, ValidationError

FLUX_KINDS = ("burgers", "exponential", "tabulated")
IGNITION_MODES = ("polynomial", "znd")
SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FluxSpec:
    """Convex, increasing flux.

    ``kind='tabulated'`` takes ``params={'x': [...], 'f': [...]}`` and builds
    a C2 cubic spline; its domain is the knot interval.
    """

    kind: str = "burgers"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "tabulated":
            x = np.asarray(self.params.get("x", []), dtype=float)
            f = np.asarray(self.params.get("f", []), dtype=float)
            if x.size < 4 or x.shape != f.shape or np.any(np.diff(x) <= 0):
                raise ValidationError("tabulated flux needs >=4 increasing knots with matching values")
            object.__setattr__(self, "_spline", CubicSpline(x, f))

    @property
    def domain(self) -> tuple[float, float]:
        """Open interval (lo, hi) on which the flux is defined."""
        if self.kind == "burgers":
            return (0.0, np.inf)
        if self.kind == "exponential":
            return (-np.inf, np.inf)
        x = self.params["x"]
        return (float(x[0]), float(x[-1]))

    def in_domain(self, u) -> bool:
        lo, hi = self.domain
        u = np.asarray(u)
        if self.kind == "tabulated":
            return bool(np.all((u >= lo) & (u <= hi)))
        return bool(np.all((u > lo) & (u < hi)))

    def __call__(self, u):
        """Return ``(f, f', f'')`` at ``u`` (scalar or array)."""
        if not self.in_domain(u):
            raise DomainError(f"u={u!r} outside the {self.kind} flux domain {self.domain}")
        return self.raw(u)

    def raw(self, u):
        # no domain check; used inside integrators on already-validated states
        if self.kind == "burgers":
            u = np.asarray(u, dtype=float)
            return 0.5 * u * u, u, np.ones_like(u)
        if self.kind == "exponential":
            e = np.exp(u)
            return e, e, e
        sp = self._spline
        return sp(u), sp(u, 1), sp(u, 2)

    def f(self, u):
        return self.raw(u)[0]

    def a(self, u):
        """Characteristic speed f'(u)."""
        return self.raw(u)[1]

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}


@dataclass(frozen=True)
class IgnitionSpec:
    """C1 bump ignition function, zero outside (u_i, u_sup).

    ``mode='polynomial'``: ``amplitude * [(u-u_i)(u_sup-u)]_+^2 * (2/(u_sup-u_i))^4``.

    ``mode='znd'``: thresholds are the two roots of ``T(u) = T_i`` with
    ``T(u) = -g M^2 u^2 + (g M^2 + 1) u``, and
    ``phi = amplitude * ((T - T_i)_+ / (T_max - T_i))^2``.
    """

    u_i: float = 0.5
    u_sup: float = 2.5
    amplitude: float = 1.0
    mode: str = "polynomial"
    mach: float | None = None
    gamma_gas: float | None = None
    T_i: float | None = None

    @classmethod
    def znd(cls, mach: float, gamma_gas: float, T_i: float, amplitude: float = 1.0) -> "IgnitionSpec":
        problems = []
        if not 0.0 < mach < 1.0:
            problems.append("Mach number must lie in (0, 1)")
        if not gamma_gas > 1.0:
            problems.append("gamma_gas must exceed 1")
        if problems:
            raise ValidationError(problems)
        c2 = gamma_gas * mach**2
        # -c2 u^2 + (c2 + 1) u - T_i = 0
        disc = (c2 + 1.0) ** 2 - 4.0 * c2 * T_i
        if not disc > 0.0:
            raise ValidationError("T(u) = T_i has no two distinct real roots")
        r = np.sqrt(disc)
        lo = ((c2 + 1.0) - r) / (2.0 * c2)
        hi = ((c2 + 1.0) + r) / (2.0 * c2)
        return cls(u_i=float(lo), u_sup=float(hi), amplitude=amplitude, mode="znd",
                   mach=mach, gamma_gas=gamma_gas, T_i=T_i)

    def temperature(self, u):
        c2 = self.gamma_gas * self.mach**2
        u = np.asarray(u, dtype=float)
        return -c2 * u * u + (c2 + 1.0) * u, -2.0 * c2 * u + (c2 + 1.0)

    def __call__(self, u):
        """Return ``(phi, phi')`` at ``u`` (scalar or array)."""
        u = np.asarray(u, dtype=float)
        inside = (u > self.u_i) & (u < self.u_sup)
        if self.mode == "polynomial":
            scale = self.amplitude * (2.0 / (self.u_sup - self.u_i)) ** 4
            g = (u - self.u_i) * (self.u_sup - u)
            dg = self.u_sup + self.u_i - 2.0 * u
            phi = np.where(inside, scale * g * g, 0.0)
            dphi = np.where(inside, 2.0 * scale * g * dg, 0.0)
        else:
            c2 = self.gamma_gas * self.mach**2
            T, dT = self.temperature(u)
            T_max = (c2 + 1.0) ** 2 / (4.0 * c2)
            scale = self.amplitude / (T_max - self.T_i) ** 2
            excess = T - self.T_i
            phi = np.where(inside, scale * excess * excess, 0.0)
            dphi = np.where(inside, 2.0 * scale * excess * dT, 0.0)
        if phi.ndim == 0:
            return float(phi), float(dphi)
        return phi, dphi

    def to_dict(self) -> dict:
        d = {"mode": self.mode, "u_i": self.u_i, "u_sup": self.u_sup, "amplitude": self.amplitude}
        if self.mode == "znd":
            d.update(mach=self.mach, gamma_gas=self.gamma_gas, T_i=self.T_i)
        return d


@dataclass(frozen=True)
class ModelConfig:
    flux: FluxSpec = field(default_factory=FluxSpec)
    ignition: IgnitionSpec = field(default_factory=IgnitionSpec)
    q: float = 0.5
    k: float = 1.0

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def phi(self, u):
        return self.ignition(u)[0]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "flux": self.flux.to_dict(),
            "ignition": self.ignition.to_dict(),
            "q": self.q,
            "k": self.k,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelConfig":
        try:
            flux = FluxSpec(kind=data.get("flux", {}).get("kind", "burgers"),
                            params=dict(data.get("flux", {}).get("params", {})))
            ig = dict(data.get("ignition", {}))
            mode = ig.pop("mode", "polynomial")
            if mode == "znd":
                ignition = IgnitionSpec.znd(ig["mach"], ig["gamma_gas"], ig["T_i"],
                                            ig.get("amplitude", 1.0))
            else:
                ignition = IgnitionSpec(u_i=float(ig.get("u_i", 0.5)), u_sup=float(ig.get("u_sup", 2.5)),
                                        amplitude=float(ig.get("amplitude", 1.0)), mode=mode)
            return cls(flux=flux, ignition=ignition, q=float(data.get("q", 0.5)), k=float(data.get("k", 1.0)))
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError(f"malformed config: {exc}") from exc


def p0(k: float = 1.0) -> ModelConfig:
    """Reference instance: Burgers flux, band (0.5, 2.5), q = 0.5."""
    return ModelConfig(FluxSpec("burgers"), IgnitionSpec(0.5, 2.5, 1.0), q=0.5, k=k)


def flux_eval(flux: FluxSpec, u):
    return flux(u)


def ignition_eval(ignition: IgnitionSpec, u):
    return ignition(u)


def _validation_grid(flux: FluxSpec, ignition: IgnitionSpec, n: int = 1000) -> np.ndarray:
    lo, hi = flux.domain
    if flux.kind == "tabulated":
        return np.linspace(lo, hi, n)
    # cover the ignition band generously; clip to the open domain
    span = ignition.u_sup - ignition.u_i
    a = ignition.u_i - 2.0 * span
    b = ignition.u_sup + 2.0 * span
    if np.isfinite(lo):
        a = max(a, lo + 1e-6 * max(1.0, span))
    return np.linspace(a, b, n)


def validate_config(cfg: ModelConfig) -> ModelConfig:
    """Check every invariant; raise :class:`ValidationError` listing all violations."""
    problems = []
    if not (cfg.q > 0.0):
        problems.append("q must be positive")
    if not (cfg.k > 0.0):
        problems.append("k must be positive")
    ig = cfg.ignition
    if ig.mode not in IGNITION_MODES:
        problems.append(f"unknown ignition mode {ig.mode!r}")
    if not (ig.u_sup > ig.u_i):
        problems.append("u_sup must exceed u_i")
    if not (ig.amplitude > 0.0):
        problems.append("ignition amplitude must be positive")
    if cfg.flux.kind not in FLUX_KINDS:
        problems.append(f"unknown flux kind {cfg.flux.kind!r}")
    if problems:
        raise ValidationError(problems)

    grid = _validation_grid(cfg.flux, ig)
    _, df, d2f = cfg.flux.raw(grid)
    if np.any(df <= 0.0):
        problems.append("flux must be strictly increasing (f' > 0) on its domain")
    if np.any(d2f <= 0.0):
        problems.append("flux must be strictly convex (f'' > 0) on its domain")
    if not cfg.flux.in_domain(np.array([ig.u_i, ig.u_sup])):
        problems.append("ignition band must lie inside the flux domain")
    if problems:
        raise ValidationError(problems)
    return cfg
