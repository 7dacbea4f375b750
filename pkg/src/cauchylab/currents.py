"""Twisted energy-momentum tensor and multiplier currents in the radial reduction.

Conventions: ``eta = -4 du dv + r^2 dOmega``, so ``eta_uv = -2`` and
``eta^uv = -1/2``.  With ``beta = r^k``, ``k = (d-1)/2`` and ``psi = beta phi``
the twisted derivatives are ``beta^{-1} d_u psi`` and ``beta^{-1} d_v psi``,
and the tensor components are

    T_uu = beta^{-2} psi_u^2,   T_vv = beta^{-2} psi_v^2,   T_uv = c_d r^{-2} phi^2.

For ``J = V_f . T`` the divergence identity used here is

    2 div J = -beta^{-2} (d_v f^u) psi_u^2 - beta^{-2} (d_u f^v) psi_v^2
              + r^{-2} beta^{-2} (r^{-2} V_f(r^2) - d_u f^u - d_v f^v) c_d psi^2
              + 2 beta^{-1} V_f(psi) Box phi,

with ``beta Box phi = -psi_uv - c_d psi / r^2``.  Angular derivatives are
absent in corotational symmetry.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .errors import BoundaryError, ConfigError, DomainError
from .geometry import Grid, diff_axis
from .solver import FieldGrid, nodal_derivatives

KINDS = ("Jminus", "Jplus", "Jp", "killing", "custom")


def c_d(d: int) -> float:
    return (d - 1) * (d - 3) / 4.0


# ---------------------------------------------------------------------------
# multipliers


@dataclass
class Multiplier:
    """``V_f = f^u d_u + f^v d_v`` with analytic first derivatives.

    ``derivs(u, v)`` returns ``(d_u f^u, d_v f^u, d_u f^v, d_v f^v)``.
    Use the constructors :meth:`jminus`, :meth:`jplus`, :meth:`jp`,
    :meth:`killing` or :meth:`custom`.
    """

    kind: str
    f_u: Callable
    f_v: Callable
    derivs: Callable
    params: dict = field(default_factory=dict)

    def __call__(self, u, v):
        return self.f_u(u, v), self.f_v(u, v)

    def as_dict(self):
        return {"kind": self.kind, **self.params}

    # -- weighted multipliers --------------------------------------------
    @staticmethod
    def _weighted(kind, params, alpha, beta_v, gamma, eps, g_u, g_v):
        """``W = |u|^alpha v^beta_v rho_+^gamma rho_-^eps`` times ``(g_u, g_v) = (c_u |u|^m, c_v v^n)``.

        ``g_u``/``g_v`` are ``(coefficient, power)`` pairs of ``|u|`` and ``v``.
        """

        def W(u, v):
            au = np.abs(u)
            r = v - u
            return au**alpha * v**beta_v * (au / r) ** gamma * (v / r) ** eps

        def dlogW(u, v):
            r = v - u
            du = alpha / u + gamma * (1.0 / u + 1.0 / r) + eps / r
            dv = beta_v / v - gamma / r + eps * (1.0 / v - 1.0 / r)
            return du, dv

        cu, mu = g_u
        cv, nv = g_v

        def f_u(u, v):
            return cu * W(u, v) * np.abs(u) ** mu

        def f_v(u, v):
            return cv * W(u, v) * v**nv

        def derivs(u, v):
            w = W(u, v)
            lu, lv = dlogW(u, v)
            au = np.abs(u)
            gu = cu * au**mu
            gv = cv * v**nv
            # d_u |u|^m = m |u|^m / u for u < 0
            dgu_du = cu * mu * au**mu / u
            dgv_dv = cv * nv * v ** (nv - 1) if nv else 0.0 * v
            return (w * (lu * gu + dgu_du), w * lv * gu, w * lu * gv, w * (lv * gv + dgv_dv))

        return Multiplier(kind, f_u, f_v, derivs, params)

    @classmethod
    def jminus(cls, a_minus: float, a_zero: float, cbar: float = 0.0) -> "Multiplier":
        """``rho_+^cbar v^{-2a_-} |u|^{2a_- - 2a_0} (v d_v + (2a_- - 1)/10 |u| d_u)``."""
        return cls._weighted("Jminus", {"a_minus": a_minus, "a_zero": a_zero, "cbar": cbar},
                             2 * a_minus - 2 * a_zero, -2 * a_minus, cbar, 0.0,
                             ((2 * a_minus - 1) / 10.0, 1.0), (1.0, 1.0))

    @classmethod
    def jplus(cls, a_plus: float, a_zero: float, cbar: float = 0.0) -> "Multiplier":
        """``rho_-^{-cbar} v^{2a_+ - 2a_0} |u|^{-2a_+} (|u| d_u + v d_v)``."""
        return cls._weighted("Jplus", {"a_plus": a_plus, "a_zero": a_zero, "cbar": cbar},
                             -2 * a_plus, 2 * a_plus - 2 * a_zero, 0.0, -cbar,
                             (1.0, 1.0), (1.0, 1.0))

    @classmethod
    def jp(cls, a_plus: float, a_zero: float) -> "Multiplier":
        """``v^{2a_+ - 2a_0} |u|^{1 - 2a_+} d_u``; needs ``0 < a_+ < 1/2``."""
        if not (0.0 < a_plus < 0.5):
            raise ConfigError(f"Jp needs a_+ in (0, 1/2), got {a_plus}")
        return cls._weighted("Jp", {"a_plus": a_plus, "a_zero": a_zero},
                             1 - 2 * a_plus, 2 * a_plus - 2 * a_zero, 0.0, 0.0,
                             (1.0, 0.0), (0.0, 0.0))

    @classmethod
    def killing(cls) -> "Multiplier":
        """Time translation ``d_u + d_v``."""
        one = lambda u, v: np.ones_like(np.asarray(u, float) + np.asarray(v, float))
        zero = lambda u, v: np.zeros_like(np.asarray(u, float) + np.asarray(v, float))
        return cls("killing", one, one, lambda u, v: (zero(u, v),) * 4, {})

    @classmethod
    def custom(cls, f_u: Callable, f_v: Callable, derivs: Callable | None = None,
               h: float = 1e-6) -> "Multiplier":
        """Arbitrary components; derivatives by central differences when not given."""
        if derivs is None:
            def derivs(u, v):
                u = np.asarray(u, float)
                v = np.asarray(v, float)
                return ((f_u(u + h, v) - f_u(u - h, v)) / (2 * h),
                        (f_u(u, v + h) - f_u(u, v - h)) / (2 * h),
                        (f_v(u + h, v) - f_v(u - h, v)) / (2 * h),
                        (f_v(u, v + h) - f_v(u, v - h)) / (2 * h))
        return cls("custom", f_u, f_v, derivs, {})


# ---------------------------------------------------------------------------
# tensor


@dataclass
class TensorSample:
    T_uu: float
    T_vv: float
    T_uv: float
    beta: float
    c_d: float
    point: tuple[float, float] = (float("nan"), float("nan"))

    def as_dict(self):
        return asdict(self)


@dataclass
class _Fields:
    """Nodal ingredients shared by the current computations."""

    grid: Grid
    psi: np.ndarray
    pu: np.ndarray
    pv: np.ndarray
    puv: np.ndarray
    beta: np.ndarray
    r: np.ndarray
    cd: float

    @property
    def box_beta(self):
        """``beta Box phi = -psi_uv - c_d psi / r^2``."""
        return -self.puv - self.cd * self.psi / self.r**2


def _fields(field: FieldGrid) -> _Fields:
    g = field.grid
    if min(g.shape) < 3:
        raise BoundaryError("need at least three lines per axis")
    pu, pv, puv = nodal_derivatives(g, field.psi)
    R = g.R
    k = (g.d - 1) / 2.0
    return _Fields(g, field.psi, pu, pv, puv, R**k, R, c_d(g.d))


def tensor_arrays(field: FieldGrid):
    """``(T_uu, T_vv, T_uv)`` at every node."""
    f = _fields(field)
    b2 = f.beta**2
    return f.pu**2 / b2, f.pv**2 / b2, f.cd * f.psi**2 / (b2 * f.r**2)


def tensor_eval(field: FieldGrid, p: tuple[int, int]) -> TensorSample:
    g = field.grid
    i, j = p
    nu, nv = g.shape
    if not (0 < i < nu - 1 and 0 < j < nv - 1):
        raise BoundaryError(f"node {p} has no centred stencil")
    Tuu, Tvv, Tuv = tensor_arrays(field)
    r = g.v[j] - g.u[i]
    k = (g.d - 1) / 2.0
    return TensorSample(float(Tuu[i, j]), float(Tvv[i, j]), float(Tuv[i, j]), r**k, c_d(g.d),
                        (float(g.u[i]), float(g.v[j])))


def current(field: FieldGrid, m: Multiplier, f: _Fields | None = None):
    """Contravariant ``(J^u, J^v)`` of ``J = V_f . T`` at the nodes."""
    f = f or _fields(field)
    U, V = f.grid.U, f.grid.V
    fu, fv = m(U, V)
    b2 = f.beta**2
    Tuu, Tvv = f.pu**2 / b2, f.pv**2 / b2
    Tuv = f.cd * f.psi**2 / (b2 * f.r**2)
    J_u = fu * Tuu + fv * Tuv
    J_v = fu * Tuv + fv * Tvv
    return -0.5 * J_v, -0.5 * J_u


def divergence_rhs(field: FieldGrid, m: Multiplier, f: _Fields | None = None) -> np.ndarray:
    """Right side of the identity for ``2 div J`` at the nodes."""
    f = f or _fields(field)
    U, V = f.grid.U, f.grid.V
    fu, fv = m(U, V)
    dufu, dvfu, dufv, dvfv = m.derivs(U, V)
    b2 = f.beta**2
    R = f.r
    vf_r2 = 2.0 * R * (fv - fu)
    out = -(dvfu * f.pu**2 + dufv * f.pv**2) / b2
    out = out + (vf_r2 / R**2 - dufu - dvfv) * f.cd * f.psi**2 / (b2 * R**2)
    out = out + 2.0 * (fu * f.pu + fv * f.pv) * f.box_beta / b2
    return out


def divergence_lhs(field: FieldGrid, m: Multiplier, f: _Fields | None = None) -> np.ndarray:
    """``2 div J = 2 r^{1-d} (d_u (r^{d-1} J^u) + d_v (r^{d-1} J^v))`` by finite differences."""
    f = f or _fields(field)
    g = f.grid
    Ju, Jv = current(field, m, f)
    w = f.r ** (g.d - 1)
    return 2.0 * (diff_axis(w * Ju, g.u, 0) + diff_axis(w * Jv, g.v, 1)) / w


def divergence_residual(field: FieldGrid, m: Multiplier) -> np.ndarray:
    """Pointwise ``2 div J - (right side)`` on the interior nodes."""
    f = _fields(field)
    res = divergence_lhs(field, m, f) - divergence_rhs(field, m, f)
    return res[1:-1, 1:-1]


def window_residual(field: FieldGrid, m: Multiplier, v_range: tuple[float, float] | None = None,
                    rho_window: tuple[float, float] = (1e-3, 10**-1.5)) -> float:
    """Largest divergence residual on the horizon fit window.

    Nodes with ``v`` in ``v_range`` (default ``[v_max/2, v_max]``) and
    ``rho_+`` inside ``rho_window``.
    """
    g = field.grid
    v_lo, v_hi = v_range if v_range is not None else (0.5 * g.v[-1], g.v[-1])
    res = divergence_residual(field, m)
    U, V = g.U[1:-1, 1:-1], g.V[1:-1, 1:-1]
    rp = np.abs(U) / (V - U)
    mask = (V >= v_lo) & (V <= v_hi) & (rp >= rho_window[0]) & (rp <= rho_window[1])
    if not mask.any():
        raise DomainError("no interior nodes on the fit window")
    return float(np.max(np.abs(res[mask])))


# ---------------------------------------------------------------------------
# coercivity


@dataclass
class CoercivityVerdict:
    holds: bool
    constant: float
    region: str
    kind: str
    npoints: int
    degenerate: bool = False

    def as_dict(self):
        return asdict(self)


def region_mask(grid: Grid, region: str) -> np.ndarray:
    """``D-``: ``t < r/2`` i.e. ``v < 3|u|``; ``D+``: ``t > -r/2`` i.e. ``v > |u|/3``."""
    U, V = grid.U, grid.V
    if region == "D-":
        return V < 3.0 * np.abs(U)
    if region == "D+":
        return V > np.abs(U) / 3.0
    raise ConfigError(f"unknown region {region!r}")


def coercive_forms(field: FieldGrid, m: Multiplier, f: _Fields | None = None):
    """Good quadratic form and source term ``(Q, B)`` of the printed lower bounds."""
    f = f or _fields(field)
    U, V = f.grid.U, f.grid.V
    au = np.abs(U)
    R = f.r
    rp, rm = au / R, V / R
    p = m.params
    b2 = f.beta**2
    edge = ((U * f.pu) ** 2 + (V * f.pv) ** 2) / b2
    src = (f.box_beta**2 / b2) * U**2 * V**2
    if m.kind == "Jminus":
        am, a0, cb = p["a_minus"], p["a_zero"], p["cbar"]
        w = V ** (-1 - 2 * am) * au ** (-1 + 2 * am - 2 * a0) * rp**cb
        return w * (1 + cb * rm) * edge, w * src
    if m.kind == "Jplus":
        ap, a0, cb = p["a_plus"], p["a_zero"], p["cbar"]
        w = V ** (-1 + 2 * ap - 2 * a0) * au ** (-1 - 2 * ap) * rm ** (-cb)
        return w * (1 + cb * rp) * edge, w * src
    if m.kind == "Jp":
        ap, a0 = p["a_plus"], p["a_zero"]
        w = V ** (-1 + 2 * ap - 2 * a0) * au ** (-1 - 2 * ap)
        return w * (U * f.pu) ** 2 / b2, w * src
    raise ConfigError(f"no printed lower bound for multiplier kind {m.kind!r}")


_REGIONS = {"Jminus": "D-", "Jplus": "D+", "Jp": "D+"}


def coercivity_check(field: FieldGrid, m: Multiplier, region: str, tiny: float = 1e-8) -> CoercivityVerdict:
    """Largest ``C`` with ``div J >= C Q - B / C`` at every interior node of ``region``.

    For each node the admissible constants form ``(0, C_max]`` with
    ``C_max = (D + sqrt(D^2 + 4 Q B)) / (2 Q)``; the reported constant is
    the minimum over nodes.  ``div J`` is taken from the identity's right
    side.
    """
    expected = _REGIONS.get(m.kind)
    if expected is None:
        raise ConfigError(f"no coercivity statement for multiplier kind {m.kind!r}")
    if region != expected:
        raise ConfigError(f"{m.kind} is coercive on {expected}, not {region}")
    f = _fields(field)
    D = 0.5 * divergence_rhs(field, m, f)
    Q, B = coercive_forms(field, m, f)
    mask = region_mask(f.grid, region)
    mask[0, :] = mask[-1, :] = False
    mask[:, 0] = mask[:, -1] = False
    D, Q, B = D[mask], Q[mask], B[mask]
    n = int(mask.sum())
    if n == 0:
        raise DomainError(f"no interior nodes in {region}")
    scale = max(float(np.max(np.abs(D), initial=0.0)), float(np.max(Q, initial=0.0)),
                float(np.max(B, initial=0.0)))
    if scale == 0.0:
        return CoercivityVerdict(True, math.inf, region, m.kind, n)
    thr = 1e-14 * scale
    cmax = np.full(D.shape, np.inf)
    pos = Q > thr
    cmax[pos] = (D[pos] + np.sqrt(D[pos] ** 2 + 4 * Q[pos] * B[pos])) / (2 * Q[pos])
    # Q ~ 0: need -B/C <= D
    neg = ~pos & (D < -thr)
    with np.errstate(divide="ignore"):
        cmax[neg] = np.where(B[neg] > 0, B[neg] / -D[neg], 0.0)
    C = float(np.min(cmax))
    return CoercivityVerdict(C > 0, C, region, m.kind, n, degenerate=C < tiny)


# ---------------------------------------------------------------------------
# flux balance


@dataclass
class FluxBalance:
    volume: float
    boundary: float
    mismatch: float
    relative: float
    fluxes: dict = field(default_factory=dict)
    box: tuple = ()

    def as_dict(self):
        return asdict(self)


def _snap(x: np.ndarray, val: float) -> int:
    i = int(np.argmin(np.abs(x - val)))
    if abs(x[i] - val) > 1e-9 * max(1.0, abs(val)) + 0.5 * np.max(np.abs(np.diff(x))):
        raise DomainError(f"{val} is not on the grid")
    return i


def _trapz(y, x):
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def flux_balance(field: FieldGrid, m: Multiplier, box: tuple[float, float, float, float] | None = None
                 ) -> FluxBalance:
    """Volume integral of ``div J`` against boundary fluxes on a null rectangle.

    ``box = (u0, u1, v0, v1)`` is snapped to grid lines (default: the whole
    grid minus one line on each side).  Integrals use ``r^{d-1} du dv``, the
    radial part of the Minkowski volume, and the trapezoid rule.
    """
    f = _fields(field)
    g = f.grid
    if box is None:
        i0, i1, j0, j1 = 1, g.u.size - 2, 1, g.v.size - 2
    else:
        u0, u1, v0, v1 = box
        if not (g.u[0] <= u0 < u1 <= g.u[-1] and g.v[0] <= v0 < v1 <= g.v[-1]):
            raise DomainError("flux rectangle leaves the grid")
        i0, i1, j0, j1 = _snap(g.u, u0), _snap(g.u, u1), _snap(g.v, v0), _snap(g.v, v1)
    if i1 - i0 < 2 or j1 - j0 < 2:
        raise DomainError("flux rectangle is too thin")
    w = f.r ** (g.d - 1)
    div = 0.5 * divergence_rhs(field, m, f) * w
    us, vs = g.u[i0:i1 + 1], g.v[j0:j1 + 1]
    inner = np.array([_trapz(div[i, j0:j1 + 1], vs) for i in range(i0, i1 + 1)])
    volume = _trapz(inner, us)
    Ju, Jv = current(field, m, f)
    Fu, Fv = w * Ju, w * Jv
    fl = {
        "u1": _trapz(Fu[i1, j0:j1 + 1], vs), "u0": -_trapz(Fu[i0, j0:j1 + 1], vs),
        "v1": _trapz(Fv[i0:i1 + 1, j1], us), "v0": -_trapz(Fv[i0:i1 + 1, j0], us),
    }
    boundary = sum(fl.values())
    mis = volume - boundary
    scale = sum(abs(x) for x in fl.values()) + abs(volume)
    rel = abs(mis) / scale if scale > 0 else 0.0
    return FluxBalance(volume, boundary, mis, rel, fl,
                       (float(g.u[i0]), float(g.u[i1]), float(g.v[j0]), float(g.v[j1])))


# ---------------------------------------------------------------------------
# audits


def residual_histogram(res: np.ndarray, bins: int = 12) -> dict:
    a = np.abs(np.asarray(res, float)).ravel()
    a = a[a > 0]
    if a.size == 0:
        return {"edges": [], "counts": [], "max": 0.0}
    counts, edges = np.histogram(np.log10(a), bins=bins)
    return {"edges": edges.tolist(), "counts": counts.tolist(), "max": float(a.max())}


def audit(field: FieldGrid, multipliers: dict[str, Multiplier]) -> dict:
    """Residual histograms, coercivity constants and flux tables for each multiplier."""
    out = {}
    for name, m in multipliers.items():
        entry = {"multiplier": m.as_dict()}
        res = divergence_residual(field, m)
        entry["divergence_residual"] = residual_histogram(res)
        try:
            entry["window_residual"] = window_residual(field, m)
        except DomainError:
            entry["window_residual"] = None
        if m.kind in _REGIONS:
            try:
                entry["coercivity"] = coercivity_check(field, m, _REGIONS[m.kind]).as_dict()
            except DomainError as exc:
                entry["coercivity"] = {"error": str(exc)}
        entry["flux"] = flux_balance(field, m).as_dict()
        out[name] = entry
    return out


def default_multipliers(a_zero: float = 0.0, cbar: float = 0.0) -> dict[str, Multiplier]:
    return {
        "killing": Multiplier.killing(),
        "Jminus": Multiplier.jminus(0.6, a_zero, cbar),
        "Jplus": Multiplier.jplus(-0.1, a_zero, cbar),
        "Jp": Multiplier.jp(0.25, a_zero),
    }
