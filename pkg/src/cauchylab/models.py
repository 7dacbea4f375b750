"""Equation families, their potential/nonlinearity split and exponent checks.

Every family is written as ``box phi = F(phi, d phi)`` with the radial
d'Alembertian ``box = -d_u d_v + (d-1)/(2r) (d_v - d_u)``:

* ``NW``: focusing power nonlinearity, ``F = -phi**p``.
* ``WMS``: corotational wave maps, ``F = kappa sin(2 phi)/(2 r**2)`` with
  ``kappa = K (d + K - 2)``.
* ``NULLFORM``: ``F = phi * (d phi . d phi) = -phi phi_u phi_v``.
* ``LINEAR``: ``F = 0``, the free wave used for calibration.

Around an exact background ``phi_0`` the perturbation obeys
``box phibar = N(phibar) + V phibar + f`` where ``V = dF/dphi(phi_0)`` and
``N`` is the remainder beyond linear order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import ConfigError, DomainError
from .geometry import WeightVector
from .profiles import Profile
from .series import Series

FAMILIES = ("NW", "WMS", "NULLFORM", "LINEAR")

_ALLOWED = {
    "NW": ("zero", "power"),
    "WMS": ("zero", "typeI", "typeII_tail", "equatorial", "constant"),
    "NULLFORM": ("zero",),
    "LINEAR": ("zero",),
}


@dataclass(frozen=True)
class EquationSpec:
    family: str
    d: int = 3
    p: int | None = None
    K: int | None = None
    background: str = "zero"

    def __post_init__(self):
        fam = self.family.upper()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if fam == "NW":
            if self.d < 3:
                raise ConfigError("NW requires d >= 3")
            if self.p is None or int(self.p) != self.p or self.p < 2:
                raise ConfigError("NW requires an integer power p >= 2")
        elif fam == "WMS":
            if self.d < 2:
                raise ConfigError("WMS requires d >= 2")
            if self.K is None:
                object.__setattr__(self, "K", 1)
            if int(self.K) != self.K or self.K < 1:
                raise ConfigError("WMS requires an integer K >= 1")
        elif self.d < 2:
            raise ConfigError(f"{fam} requires d >= 2")
        if self.background not in _ALLOWED[fam]:
            raise ConfigError(f"background {self.background!r} not supported for {fam}")

    @property
    def kappa(self) -> float:
        return float(self.K * (self.d + self.K - 2)) if self.family == "WMS" else 0.0

    @property
    def k(self) -> float:
        """Rescaling exponent ``(d-1)/2`` of ``psi = r^k phi``."""
        return (self.d - 1) / 2.0

    @property
    def c_d(self) -> float:
        """Coefficient of the ``-psi/r^2`` term in the rescaled operator."""
        return (self.d - 1) * (self.d - 3) / 4.0


# ---------------------------------------------------------------------------
# split


def _sin_minus_x(x):
    # sin(x) - x without cancellation for small |x|
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    x2 = x * x
    series = -x * x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)))
    return np.where(small, series, np.sin(x) - x)


@dataclass(frozen=True)
class SplitRHS:
    """Potential, nonlinearity and forcing of the perturbation equation.

    ``V`` has units ``r^-2``; ``V_coeff`` returns the dimensionless
    ``r^2 V``.  ``N`` takes the derivatives of the perturbation only when
    ``uses_derivatives`` is set.
    """

    spec: EquationSpec
    background: Profile
    delta: float
    forcing: Callable | None = field(default=None, compare=False)

    @property
    def uses_derivatives(self) -> bool:
        return self.spec.family == "NULLFORM"

    def _phi0(self, u, v, phi0=None):
        if phi0 is not None:
            return phi0
        return self.background.value(u, v)

    @property
    def trivial_background(self) -> bool:
        return self.background.name == "zero"

    # -- pointwise evaluators -------------------------------------------
    def V_coeff(self, u, v, phi0=None):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        s = self.spec
        if s.family == "WMS":
            return s.kappa * np.cos(2.0 * self._phi0(u, v, phi0))
        if s.family == "NW" and self.background.name == "power":
            phi0 = self._phi0(u, v, phi0)
            r = v - u
            return -s.p * phi0 ** (s.p - 1) * r**2
        return np.zeros(u.shape)

    def V(self, u, v, phi0=None):
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        return self.V_coeff(u, v, phi0) / (v - u) ** 2

    def N(self, u, v, phi, phi_u=None, phi_v=None, phi0=None):
        s = self.spec
        phi = np.asarray(phi, dtype=float)
        if s.family == "LINEAR":
            return np.zeros(np.broadcast(phi, np.asarray(u, float)).shape)
        if s.family == "NULLFORM":
            if phi_u is None or phi_v is None:
                raise ConfigError("null-form nonlinearity needs phi_u and phi_v")
            return -phi * np.asarray(phi_u) * np.asarray(phi_v)
        if s.family == "NW":
            if self.background.name == "zero":
                return -(phi**s.p)
            phi0 = self._phi0(u, v, phi0)
            out = np.zeros(np.broadcast(phi, phi0).shape)
            for j in range(2, s.p + 1):
                out = out - math.comb(s.p, j) * phi0 ** (s.p - j) * phi**j
            return out
        # WMS
        u = np.asarray(u, float)
        v = np.asarray(v, float)
        r2 = (v - u) ** 2
        x = 2.0 * phi
        if self.background.name == "zero":
            return s.kappa * _sin_minus_x(x) / (2.0 * r2)
        phi0 = self._phi0(u, v, phi0)
        s0, c0 = np.sin(2.0 * phi0), np.cos(2.0 * phi0)
        return s.kappa / (2.0 * r2) * (-2.0 * s0 * np.sin(phi) ** 2 + c0 * _sin_minus_x(x))

    def f(self, u, v):
        u, v = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float))
        if self.forcing is None:
            return np.zeros(u.shape)
        return np.asarray(self.forcing(u, v), dtype=float) * np.ones(u.shape)

    def rhs(self, u, v, phi, phi_u=None, phi_v=None, phi0=None):
        """``N(phi) + V phi + f``."""
        return self.N(u, v, phi, phi_u, phi_v, phi0) + self.V(u, v, phi0) * phi + self.f(u, v)

    def F_full(self, u, v, phi, phi_u=None, phi_v=None):
        """The family's full right-hand side ``F`` evaluated on ``phi``."""
        s = self.spec
        if s.family == "NW":
            return -np.asarray(phi, float) ** s.p
        if s.family == "WMS":
            r2 = (np.asarray(v, float) - np.asarray(u, float)) ** 2
            return s.kappa * np.sin(2.0 * np.asarray(phi, float)) / (2.0 * r2)
        if s.family == "LINEAR":
            return np.zeros_like(np.asarray(phi, float))
        return -np.asarray(phi, float) * phi_u * phi_v

    def with_forcing(self, forcing: Callable | None) -> "SplitRHS":
        return replace(self, forcing=forcing)

    # -- series on the backward cone -------------------------------------
    def series_increment(self, u, phibar: Series, phibar_u: Series | None = None,
                         phibar_v: Series | None = None) -> Series:
        """``F(phi_0 + phibar) - F(phi_0)`` as a series in v at fixed u.

        Equals ``N(phibar) + V phibar`` exactly.
        """
        s = self.spec
        m = phibar.order
        u = np.asarray(u, dtype=float)
        if s.family == "LINEAR":
            return phibar * 0.0
        if s.family == "NULLFORM":
            return -(phibar * phibar_u * phibar_v)
        phi0 = self.background.series_on_cone(u, m)
        if s.family == "NW":
            if self.background.name == "zero":
                return -(phibar ** s.p)
            return -((phi0 + phibar) ** s.p - phi0 ** s.p)
        inv_r2 = Series.variable(m, -u).power(-2.0)
        two0 = phi0 * 2.0
        diff = (two0 + phibar * 2.0).sin() - two0.sin()
        return diff * inv_r2 * (s.kappa / 2.0)


def nonlinearity_split(spec: EquationSpec, background: Profile | None = None,
                       weights: WeightVector | None = None,
                       forcing: Callable | None = None) -> SplitRHS:
    """Split the equation around ``background`` into ``V``, ``N`` and ``f``.

    Type II tails are linearized around their exterior limit ``pi``.
    """
    if background is None:
        if spec.background != "zero":
            raise ConfigError(f"background {spec.background!r} needs an explicit profile")
        background = Profile.zero(spec.d)
    kind = background.name
    if kind not in _ALLOWED[spec.family]:
        raise ConfigError(f"unsupported pair ({spec.family}, {kind})")
    if spec.background != kind and not {spec.background, kind} <= {"typeII_tail", "constant"}:
        raise ConfigError(f"spec declares background {spec.background!r}, got {kind!r}")
    if kind == "power" and (background.kind.p != spec.p or background.d != spec.d):
        raise ConfigError("power background built for a different (p, d)")
    if spec.family == "WMS" and kind == "typeI" and (background.d != spec.d or background.K != spec.K):
        raise ConfigError("self-similar profile built for a different (d, K)")
    evolution_bg = background.background()
    if weights is None:
        weights = default_weights(spec, evolution_bg.name)
    verdict = check_exponents(spec, weights, evolution_bg.name)
    delta = verdict.delta if verdict.admissible else 0.0
    return SplitRHS(spec=spec, background=evolution_bg, delta=float(delta), forcing=forcing)


# ---------------------------------------------------------------------------
# admissibility


@dataclass(frozen=True)
class Verdict:
    admissible: bool
    delta: float | None = None
    reason: str | None = None
    peel_order: int | None = None

    def __bool__(self):
        return self.admissible


def _homogeneity(spec: EquationSpec, bg: str):
    """(q, e0): ``N ~ rho_0^{-e0} phi^q`` for the leading nonlinear term."""
    if spec.family == "NW":
        if bg == "power":
            return 2, Fraction(2 * (spec.p - 2), spec.p - 1)
        return spec.p, Fraction(0)
    if spec.family == "WMS":
        if bg in ("zero",):
            return 3, Fraction(2)
        # sin(2 phi_0) != 0 in general gives a quadratic remainder
        return 2, Fraction(2)
    return 3, Fraction(2)


def a0_threshold(spec: EquationSpec, bg: str = "zero") -> float:
    """Infimum of admissible ``a_zero`` for the family."""
    if spec.family == "LINEAR":
        return -spec.k
    q, e0 = _homogeneity(spec, bg)
    thr = float((e0 - 2) / (q - 1))
    if spec.family == "NULLFORM":
        thr = max(thr, (spec.d - 1) / 2.0)
    return thr


def default_weights(spec: EquationSpec, bg: str = "zero") -> WeightVector:
    a0 = a0_threshold(spec, bg) + 0.25
    return WeightVector(a_minus=a0 + spec.k + 1.0, a_zero=a0, a_plus=-0.05)


def _a0_reason(spec, bg, boundary):
    if spec.family == "NW" and bg == "zero":
        msg = f"{spec.p}a_0+2>a_0 fails"
    elif spec.family == "WMS":
        msg = "a_0>0 required"
    elif spec.family == "NULLFORM":
        msg = "a_0>(d-1)/2 required"
    else:
        msg = f"a_0>{a0_threshold(spec, bg):g} required"
    return msg + (" at boundary" if boundary else "")


def check_exponents(spec: EquationSpec, a: WeightVector, background: str | None = None) -> Verdict:
    """Admissibility of the nonlinearity for weights ``a``.

    Returns the gap ``delta`` by which the nonlinearity gains over the
    weights, or the first violated inequality.  The ordering
    ``a_- > a_0 + (d-1)/2 > a_+`` is checked after peeling, which raises the
    effective ``a_-`` above ``floor(a_0 + (d-1)/2)``.
    """
    bg = background or spec.background
    if bg in ("typeII_tail",):
        bg = "constant"
    if spec.family == "LINEAR":
        if not a.a_plus < 0:
            return Verdict(False, reason="a_+<0 required")
        return Verdict(True, delta=1.0, peel_order=int(math.floor(a.a_zero + spec.k)))
    q, e0 = _homogeneity(spec, bg)
    a0, am, ap = a.a_zero, a.a_minus, a.a_plus
    thr = a0_threshold(spec, bg)
    if not a0 > thr:
        return Verdict(False, reason=_a0_reason(spec, bg, math.isclose(a0, thr, abs_tol=1e-12)))
    if not ap < 0:
        return Verdict(False, reason="a_+<0 required")
    centre = a0 + spec.k
    peel = math.floor(centre)
    am_eff = max(am, peel + 1.0)
    if not centre > ap:
        return Verdict(False, reason="a_0+(d-1)/2>a_+ fails")
    if not am_eff > centre:
        return Verdict(False, reason="a_->a_0+(d-1)/2 fails after peeling")
    gaps = [(q - 1) * a0 + 2 - float(e0), 1 + (q - 1) * ap, 1 + (q - 1) * am_eff]
    if spec.family == "NULLFORM":
        gaps.append(a0 - (spec.d - 1) / 2.0)
    delta = min(gaps)
    if not delta > 0:
        return Verdict(False, reason=f"gap {delta:g} is not positive")
    return Verdict(True, delta=float(min(delta, 1.0)), peel_order=int(peel))


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class ExponentConstants:
    c_pd: float | None
    gamma: float | None
    c: float | None

    def residuals(self, d, p=None) -> dict:
        out = {}
        if self.c_pd is not None and p is not None:
            out["c_pd"] = abs((p - 1) / 2 * self.c_pd ** (p - 1) - (d - 2 - 2 / (p - 1)))
        if self.gamma is not None:
            # gamma is the smaller root of g^2 - (d-2) g + (d - 1) = 0
            out["gamma"] = abs(self.gamma**2 - (d - 2) * self.gamma + (d - 1))
        return out


def exponent_constants(family: str, d: int, p: int | None = None) -> ExponentConstants:
    """``c_{p,d}`` of the singular power solution, ``gamma`` and the scaling ``c``.

    ``c_{p,d}`` solves ``(p-1)/2 c^{p-1} = d - 2 - 2/(p-1)``; ``gamma`` is the
    smaller root of ``g^2 - (d-2) g + (d-1)``, real for ``d >= 7``.
    """
    family = family.upper()
    if family not in FAMILIES:
        raise ConfigError(f"unknown family {family!r}")
    if family == "NW":
        if p is None or p < 2:
            raise DomainError("NW constants need p >= 2")
        rhs = d - 2 - 2.0 / (p - 1)
        if rhs <= 0:
            raise DomainError(f"no singular power solution for d={d}, p={p}")
        c_pd = (2.0 * rhs / (p - 1)) ** (1.0 / (p - 1))
        return ExponentConstants(c_pd=c_pd, gamma=None, c=1.0)
    if family == "WMS":
        disc = d * d - 8 * d + 8
        if d < 7 or disc < 0:
            raise DomainError("gamma requires d >= 7")
        gamma = 0.5 * (d - 2 - math.sqrt(disc))
        return ExponentConstants(c_pd=None, gamma=gamma, c=0.0)
    raise DomainError(f"no blow-up constants for {family}")
