"""Background blow-up profiles and the corotational self-similar shooting solver.

All profiles are evaluated in double-null coordinates.  Type I profiles use
the self-similar variable ``y = r/(2r - t) = (v - u)/(v - 3u)``: the axis is
``y = 0``, the backward cone ``y = 1/3``, the Cauchy horizon ``y = 1``.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly
from scipy.optimize import least_squares, root

from .errors import ConfigError, DomainError, NonConvergenceError, OrderError, UnsupportedError
from .series import Series

KINDS = ("zero", "typeI", "typeII_tail", "equatorial", "power", "constant")


@dataclass(frozen=True)
class ProfileKind:
    kind: str
    nu: float | None = None
    c: float = 0.0
    c_pd: float | None = None
    p: int | None = None
    value: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown profile kind {self.kind!r}")
        if self.kind == "typeII_tail" and not (self.nu is not None and self.nu > 1):
            raise ConfigError("TypeII-tail requires nu > 1")
        if self.kind == "power" and (self.c_pd is None or self.p is None):
            raise ConfigError("power profile needs c_pd and p")


# ---------------------------------------------------------------------------
# self-similar ODE in the y variable
#
# For phi = Phi(y(t, r)) with y = r/(2r - t) the radial operator gives
#   r^2 (-phi_tt + phi_rr + (d-1)/r phi_r) = A(y) Phi'' + B(y) Phi'
# with the polynomials below.  The corotational equation
#   -phi_tt + phi_rr + (d-1)/r phi_r = kappa sin(2 phi)/(2 r^2)
# becomes A Phi'' + B Phi' = kappa/2 sin(2 Phi).


def ode_A(y):
    return y * y * (1.0 - 3.0 * y) * (1.0 - y)


def ode_B(y, d):
    return y * (6.0 * y * y - 2.0 * (d + 1) * y + (d - 1))


def _poly_series(coeffs_in_y, y0, order):
    """Taylor series in eta = y - y0 of a polynomial given low-to-high."""
    p = np.polynomial.Polynomial(coeffs_in_y)
    c = []
    q = p
    for k in range(order + 1):
        c.append(q(y0) / math.factorial(k))
        q = q.deriv()
    return Series(np.array(c))


def _A_coeffs():
    # y^2 (1 - 3y)(1 - y) = y^2 - 4 y^3 + 3 y^4
    return [0.0, 0.0, 1.0, -4.0, 3.0]


def _B_coeffs(d):
    return [0.0, d - 1.0, -2.0 * (d + 1.0), 6.0]


def _residual_series(a, y0, d, kappa):
    n = len(a) - 1
    phi = Series(np.asarray(a, dtype=float))
    d1 = phi.dv()
    d2 = d1.dv()
    A = _poly_series(_A_coeffs(), y0, n)
    B = _poly_series(_B_coeffs(d), y0, n)
    return A * d2 + B * d1 - phi.__mul__(2.0).sin() * (kappa / 2.0)


def frobenius(y0, d, kappa, fixed: dict, order: int, lead: int):
    """Power-series solution of the profile ODE about a singular point.

    ``fixed`` maps coefficient index to a prescribed value (the free data of
    the regular branch).  Coefficient ``n`` of the residual determines
    ``a[n + lead]``; ``lead`` is 0 at the axis (double zero of A) and 1 at the
    light cones (simple zero).
    """
    a = np.zeros(order + 3)
    for k, val in fixed.items():
        a[k] = val
    for n in range(order + 1 - lead):
        idx = n + lead
        if idx in fixed:
            continue
        r0 = _residual_series(a, y0, d, kappa).c[n]
        trial = a.copy()
        trial[idx] += 1.0
        diag = _residual_series(trial, y0, d, kappa).c[n] - r0
        if abs(diag) < 1e-12:
            raise NonConvergenceError(
                f"resonant Frobenius coefficient {idx} at y={y0}; supply it as free data",
                {"y0": y0, "index": idx, "residual": float(r0)},
            )
        a[idx] -= r0 / diag
    return a[: order + 1]


def _series_eval(a, eta):
    a = np.asarray(a)
    k = np.arange(a.size)
    eta = np.asarray(eta, dtype=float)
    pw = eta[..., None] ** k
    val = pw @ a
    d1 = (pw[..., :-1] * k[1:]) @ a[1:]
    d2 = (pw[..., :-2] * (k[2:] * (k[2:] - 1))) @ a[2:]
    return val, d1, d2


def _rhs(d, kappa):
    def f(y, z):
        phi, dphi = z
        return [dphi, (kappa / 2.0 * np.sin(2.0 * phi) - ode_B(y, d) * dphi) / ode_A(y)]
    return f


_IVP = dict(method="DOP853", rtol=1e-12, atol=1e-13, dense_output=True)


@dataclass
class Profile:
    """Background solution ``phi_0`` with derivative access."""

    kind: ProfileKind
    d: int = 3
    K: int = 1
    table: np.ndarray | None = field(default=None, repr=False)
    interp: BPoly | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)
    cone_series: np.ndarray | None = field(default=None, repr=False)

    # -- constructors -----------------------------------------------------
    @classmethod
    def zero(cls, d=3):
        return cls(ProfileKind("zero"), d=d)

    @classmethod
    def equatorial(cls, d=7):
        return cls(ProfileKind("equatorial"), d=d)

    @classmethod
    def constant(cls, value, d=3):
        return cls(ProfileKind("constant", value=float(value)), d=d)

    @classmethod
    def type_ii_tail(cls, nu, d=2):
        return cls(ProfileKind("typeII_tail", nu=float(nu)), d=d)

    @classmethod
    def supercritical_power(cls, p, d):
        from .models import exponent_constants

        c_pd = exponent_constants("NW", d, p).c_pd
        return cls(ProfileKind("power", c_pd=c_pd, p=int(p), c=0.0), d=d)

    # -- evaluation ---------------------------------------------------------
    @property
    def name(self):
        return self.kind.kind

    def is_singular(self):
        return self.kind.kind in ("power",)

    def background(self) -> "Profile":
        """Exact solution the perturbation is taken around.

        The Type II tail converges to the constant ``pi`` in the exterior, which
        is a stationary solution of the corotational equation.
        """
        if self.kind.kind == "typeII_tail":
            return Profile.constant(math.pi, d=self.d)
        return self

    def value(self, u, v):
        return profile_eval(self, u, v, 0)[(0, 0)]

    def series_on_cone(self, u, order):
        """Taylor series in v of the profile at ``v = 0`` for each u."""
        u = np.asarray(u, dtype=float)
        k = self.kind.kind
        if k == "zero":
            return Series.const(np.zeros_like(u), order)
        if k in ("constant", "equatorial"):
            return Series.const(np.full_like(u, self._const()), order)
        if k == "power":
            s = -2.0 / (self.kind.p - 1)
            return Series.variable(order, -u).power(s) * self.kind.c_pd
        if k == "typeI":
            y = Series.variable(order, -u) * Series.variable(order, -3.0 * u).power(-1.0)
            a = self.cone_series
            if a is None or a.size < order + 1:
                raise OrderError("Type I cone series not available to this order")
            derivs = [a[n] * math.factorial(n) for n in range(order + 1)]
            return y.compose(derivs)
        if k == "typeII_tail":
            return self.background().series_on_cone(u, order)
        raise ConfigError(k)

    def _const(self):
        if self.kind.kind == "equatorial":
            return math.pi / 2
        return float(self.kind.value)

    def Phi(self, y, m=0):
        """Tabulated Type I profile (or its m-th derivative) in y."""
        if self.interp is None:
            raise ConfigError("profile has no tabulation")
        return self.interp.derivative(m)(y) if m else self.interp(y)

    # -- serialization ------------------------------------------------------
    def to_csv(self, path):
        if self.table is None:
            raise ConfigError("only tabulated profiles serialize to CSV")
        meta = {"family": "WMS", "d": self.d, "K": self.K, **self.meta}
        buf = io.StringIO()
        buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        buf.write("y,Phi0,dPhi0,d2Phi0\n")
        np.savetxt(buf, self.table, delimiter=",", fmt="%.17g")
        Path(path).write_text(buf.getvalue())

    @classmethod
    def from_csv(cls, path):
        text = Path(path).read_text().splitlines()
        meta = json.loads(text[0][2:])
        table = np.loadtxt(text[2:], delimiter=",")
        prof = cls(ProfileKind("typeI"), d=meta["d"], K=meta["K"], table=table, meta=meta)
        prof.interp = BPoly.from_derivatives(table[:, 0], table[:, 1:4])
        if "cone_series" in meta:
            prof.cone_series = np.array(meta["cone_series"])
        return prof


def profile_eval(profile: Profile, u, v, m: int = 0) -> dict:
    """Values and mixed derivatives ``d_u^a d_v^b phi_0`` for ``a + b <= m``.

    Returns a dict keyed by ``(a, b)``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u, v = np.broadcast_arrays(u, v)
    r = v - u
    k = profile.kind.kind
    out = {}
    keys = [(a, b) for a in range(m + 1) for b in range(m + 1 - a)]
    if k in ("zero", "constant", "equatorial"):
        base = 0.0 if k == "zero" else profile._const()
        for key in keys:
            out[key] = np.full(u.shape, base if key == (0, 0) else 0.0)
        return out
    if k == "power":
        if np.any(r <= 0):
            raise DomainError("singular profile evaluated at r = 0")
        s = -2.0 / (profile.kind.p - 1)
        for a, b in keys:
            n = a + b
            fall = np.prod([s - i for i in range(n)]) if n else 1.0
            out[(a, b)] = profile.kind.c_pd * (-1.0) ** a * fall * r ** (s - n)
        return out
    if k == "typeII_tail":
        if m > 2:
            raise OrderError("TypeII-tail jets implemented up to order 2")
        return _type_ii_jets(profile.kind.nu, u, v, m)
    if k == "typeI":
        if m > 2:
            raise OrderError("Type I jets implemented up to order 2")
        if np.any(r <= 0):
            raise DomainError("profile evaluated at r <= 0")
        den = v - 3.0 * u
        y = r / den
        # y = (v-u)/(v-3u)
        yu = 2.0 * v / den**2
        yv = -2.0 * u / den**2
        P0 = profile.Phi(y)
        out[(0, 0)] = P0
        if m >= 1:
            P1 = profile.Phi(y, 1)
            out[(1, 0)] = P1 * yu
            out[(0, 1)] = P1 * yv
        if m >= 2:
            P2 = profile.Phi(y, 2)
            # second derivatives of y
            yuu, yuv, yvv = _y_second(u, v)
            out[(2, 0)] = P2 * yu**2 + P1 * yuu
            out[(1, 1)] = P2 * yu * yv + P1 * yuv
            out[(0, 2)] = P2 * yv**2 + P1 * yvv
        return out
    raise ConfigError(k)


def _y_second(u, v):
    # y = (v - u)/D with D = v - 3u: y_u = 2v/D^2, y_v = -2u/D^2
    D = v - 3.0 * u
    yuu = 12.0 * v / D**3
    yuv = (2.0 * D - 4.0 * v) / D**3
    yvv = 4.0 * u / D**3
    return yuu, yuv, yvv


def _type_ii_jets(nu, u, v, m):
    # phi_0 = 2 arctan(r / |t|^nu)
    t = u + v
    r = v - u
    at = np.abs(t)
    sg = np.sign(t)
    out = {}
    with np.errstate(divide="ignore", invalid="ignore"):
        z = r / at**nu
        out[(0, 0)] = 2.0 * np.arctan(z)
        if m >= 1:
            g = 2.0 / (1.0 + z * z)
            # dz/du, dz/dv with r_u = -1, r_v = 1, t_u = t_v = 1
            zt = -nu * r * sg / at ** (nu + 1)
            zr = 1.0 / at**nu
            zu = -zr + zt
            zv = zr + zt
            out[(1, 0)] = g * zu
            out[(0, 1)] = g * zv
        if m >= 2:
            gz = -4.0 * z / (1.0 + z * z) ** 2
            ztt = nu * (nu + 1) * r / at ** (nu + 2)
            zrt = -nu * sg / at ** (nu + 1)
            zuu = ztt - 2.0 * zrt
            zvv = ztt + 2.0 * zrt
            zuv = ztt
            out[(2, 0)] = gz * zu**2 + g * zuu
            out[(1, 1)] = gz * zu * zv + g * zuv
            out[(0, 2)] = gz * zv**2 + g * zvv
    return out


# ---------------------------------------------------------------------------
# shooting


@dataclass
class ShootingResult:
    axis_slope: float
    cone_parameter: float
    mismatch: float
    horizon_jump: float
    residual: float
    nfev: int


def solve_self_similar_profile(d: int = 3, K: int = 1, n_table: int = 301,
                               guess: tuple[float, float] | None = None,
                               series_order: int = 12) -> Profile:
    """Smooth corotational self-similar profile ``Phi_0`` on ``y in [0, 3/2]``.

    Shoots from the axis (``Phi_0 ~ b y^K``, free ``b``) and from the regular
    Frobenius branch at the backward cone ``y = 1/3``, matching value and slope
    at ``y = 1/6``.  The solution is then continued through the Cauchy
    horizon ``y = 1`` on its regular Frobenius branch and out to ``y = 3/2``.
    """
    if d < 3 or K < 1:
        raise ConfigError("self-similar profiles need d >= 3 and K >= 1")
    if d % 2 == 1 and d != 3:
        raise UnsupportedError("odd d >= 5 has a resonant Frobenius branch at the cone")
    kappa = K * (d + K - 2)
    rhs = _rhs(d, kappa)
    eps = 0.02
    y_axis, y_cone, y_ch = 0.0, 1.0 / 3.0, 1.0
    y_mid = 1.0 / 6.0

    def axis_series(b):
        return frobenius(y_axis, d, kappa, {0: 0.0, **{i: 0.0 for i in range(1, K)}, K: b},
                         series_order, lead=0)

    def cone_series(p):
        if d == 3:
            fixed = {0: math.pi / 2, 1: p}
        else:
            fixed = {0: p}
        return frobenius(y_cone, d, kappa, fixed, series_order, lead=1)

    def mismatch(x):
        b, p = x
        a = axis_series(b)
        v0, d0, _ = _series_eval(a, eps)
        left = solve_ivp(rhs, (eps, y_mid), [v0, d0], **_IVP)
        c = cone_series(p)
        v1, d1, _ = _series_eval(c, -eps)
        right = solve_ivp(rhs, (y_cone - eps, y_mid), [v1, d1], **_IVP)
        if not (left.success and right.success):
            return np.array([1e3, 1e3])
        return left.y[:, -1] - right.y[:, -1]

    if guess is None:
        guess = (2.0, 9.0) if (d == 3 and K == 1) else _scan_guess(mismatch, d, K)
    sol = root(mismatch, np.asarray(guess, dtype=float), method="hybr", options={"xtol": 1e-14})
    res = np.abs(mismatch(sol.x)).max()
    if not sol.success and res > 1e-9:
        raise NonConvergenceError(
            "shooting did not converge",
            {"guess": list(guess), "last": sol.x.tolist(), "mismatch": float(res), "message": sol.message},
        )
    b, p = sol.x
    a_axis = axis_series(b)
    a_cone = cone_series(p)

    # continue through the exterior to the horizon
    v1, d1, _ = _series_eval(a_cone, eps)
    mid = solve_ivp(rhs, (y_cone + eps, y_ch - eps), [v1, d1], **_IVP)
    left_val, left_der = mid.y[:, -1]

    def ch_series(q):
        if d == 3:
            a0 = (math.pi / 2) * round(2.0 * left_val / math.pi)
            fixed = {0: a0, 1: q}
        else:
            fixed = {0: q}
        return frobenius(y_ch, d, kappa, fixed, series_order, lead=1)

    def ch_fit(q):
        val, der, _ = _series_eval(ch_series(q[0]), -eps)
        return [val - left_val, der - left_der]

    q0 = left_der if d == 3 else left_val
    fit = least_squares(ch_fit, [q0], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    a_ch = ch_series(fit.x[0])
    jump = float(np.abs(fit.fun).max())
    v2, d2, _ = _series_eval(a_ch, eps)
    outer = solve_ivp(rhs, (y_ch + eps, 1.5), [v2, d2], **_IVP)
    left = solve_ivp(rhs, (eps, y_cone - eps), list(_series_eval(a_axis, eps)[:2]), **_IVP)

    y = np.linspace(0.0, 1.5, n_table)
    P = np.empty((y.size, 3))
    for i, yy in enumerate(y):
        if yy <= eps:
            vals = _series_eval(a_axis, yy - y_axis)
        elif abs(yy - y_cone) <= eps:
            vals = _series_eval(a_cone, yy - y_cone)
        elif abs(yy - y_ch) <= eps:
            vals = _series_eval(a_ch, yy - y_ch)
        else:
            seg = left if yy < y_cone else (mid if yy < y_ch else outer)
            ph, dph = seg.sol(yy)
            dd = (kappa / 2 * math.sin(2 * ph) - ode_B(yy, d) * dph) / ode_A(yy)
            vals = (ph, dph, dd)
        P[i] = vals
    table = np.column_stack([y, P])
    interp = BPoly.from_derivatives(y, P)
    prof = Profile(ProfileKind("typeI", c=0.0), d=d, K=K, table=table, interp=interp)
    prof.cone_series = a_cone
    resid = ode_residual(prof)
    prof.meta = {
        "shooting_parameter": float(b),
        "cone_parameter": float(p),
        "horizon_jump": jump,
        "residual": resid,
        "cone_series": a_cone.tolist(),
    }
    prof.meta["shooting"] = ShootingResult(float(b), float(p), float(res), jump, resid, int(sol.nfev)).__dict__
    return prof


def _scan_guess(mismatch, d, K):
    best, best_val = None, np.inf
    for b in np.linspace(0.5, 6.0, 23):
        for p in np.linspace(0.2, 3.0, 15):
            val = np.abs(mismatch((b, p))).sum()
            if val < best_val:
                best, best_val = (b, p), val
    if best is None or not np.isfinite(best_val):
        raise NonConvergenceError("no bracket for the shooting parameters", {"d": d, "K": K})
    return best


def ode_residual(profile: Profile, n: int = 4001) -> float:
    """Max of ``r^2 (box phi_0 - kappa sin(2 phi_0)/(2 r^2))`` over y in [0, 3/2]."""
    kappa = profile.K * (profile.d + profile.K - 2)
    y = np.linspace(0.0, 1.5, n)
    y = 0.5 * (y[1:] + y[:-1])
    P0 = profile.Phi(y)
    P1 = profile.Phi(y, 1)
    P2 = profile.Phi(y, 2)
    res = ode_A(y) * P2 + ode_B(y, profile.d) * P1 - kappa / 2 * np.sin(2 * P0)
    return float(np.abs(res).max())


def spacetime_residual(profile: Profile, u, v) -> np.ndarray:
    """Residual of the corotational equation applied to ``phi_0(u, v)``.

    Uses the radial double-null operator directly on the reconstructed field,
    independent of the y-variable ODE.  Scaled by ``r^2`` so it is
    dimensionless.
    """
    jets = profile_eval(profile, u, v, 2)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    r = v - u
    kappa = profile.K * (profile.d + profile.K - 2)
    box = -jets[(1, 1)] + (profile.d - 1) / (2 * r) * (jets[(0, 1)] - jets[(1, 0)])
    return r**2 * box - kappa / 2 * np.sin(2 * jets[(0, 0)])
