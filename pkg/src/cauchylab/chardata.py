"""Characteristic initial data on the backward cone and the left edge.

The evolved unknown is the perturbation ``phibar = phi - phi_0`` of the
background, rescaled as ``psi = r^k phibar`` with ``k = (d-1)/2``.  Near the
backward cone ``C = {v = 0}`` we carry ``psi = sum_k c_k(u) v^k``; restricting
``-psi_uv = S(psi)`` to ``C`` order by order gives transport ODEs
``k c_k' = -S_{k-1}`` that are integrated in ``log|u|`` from the corner.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import ConfigError, DataError, OrderError
from .models import EquationSpec, SplitRHS, nonlinearity_split
from .profiles import Profile
from .series import Series


# ---------------------------------------------------------------------------
# cutoffs


def _psi_exp(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def smooth_step(s, a, b):
    """C-infinity cutoff equal to 1 for ``s <= a`` and 0 for ``s >= b``."""
    s = np.asarray(s, dtype=float)
    x = (b - s) / (b - a)
    num = _psi_exp(x)
    return num / (num + _psi_exp(1.0 - x))


def _smooth_step_derivs(s, a, b, h=1e-5):
    s = np.asarray(s, dtype=float)
    f0 = smooth_step(s, a, b)
    fp = smooth_step(s + h, a, b)
    fm = smooth_step(s - h, a, b)
    return f0, (fp - fm) / (2 * h), (fp - 2 * f0 + fm) / h**2


def bump(v, center, width):
    """Smooth compactly supported pulse of unit height."""
    x = (np.asarray(v, dtype=float) - center) / width
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


# ---------------------------------------------------------------------------
# transport


def _rk_series(u, k, order):
    """Series in v of ``r^k`` at fixed u (r = v - u)."""
    return Series.variable(order, -np.asarray(u, dtype=float)).power(k)


def psi_source(split: SplitRHS, u, psi: Series, psi_u: Series | None) -> Series:
    """Series of ``S = c_d psi/r^2 + r^k (F(phi_0 + phibar) - F(phi_0))``."""
    spec = split.spec
    m = psi.order
    k = spec.k
    rk = _rk_series(u, k, m)
    rmk = _rk_series(u, -k, m)
    phibar = psi * rmk
    phibar_u = phibar_v = None
    if split.uses_derivatives:
        rmk1 = _rk_series(u, -k - 1.0, m)
        phibar_u = psi_u * rmk + psi * rmk1 * k
        phibar_v = psi.dv() * rmk - psi * rmk1 * k
    out = rk * split.series_increment(u, phibar, phibar_u, phibar_v)
    if spec.c_d != 0:
        out = out + psi * _rk_series(u, -2.0, m) * spec.c_d
    return out


def transport_rates(split: SplitRHS, u: float, c: np.ndarray, c0_u: float = 0.0) -> np.ndarray:
    """``dc_k/du`` for k = 1..m given the series coefficients ``c[0..m]``."""
    m = c.size - 1
    rates = np.zeros(m + 1)
    rates[0] = c0_u
    for kk in range(1, m + 1):
        S = psi_source(split, u, Series(c.copy()), Series(rates.copy()))
        rates[kk] = -S.c[kk - 1] / kk
    return rates


# ---------------------------------------------------------------------------
# data


@dataclass
class CharacteristicData:
    """Compatible characteristic data for the perturbation.

    ``tail_C(u)`` is ``phibar`` on the backward cone (``r = -u``),
    ``cbar(v)`` is ``phibar`` on the left edge ``u = u_left``, and
    ``corner_jets[k]`` is ``d_v^k phibar`` at the corner.  The full field on
    the cone is ``background + tail``.
    """

    tail_C: Callable
    cbar: Callable
    corner_jets: np.ndarray
    background: Profile
    d: int = 3
    u_left: float = -1.0
    a_zero: float | None = None
    m: int = 0
    k_reg: float = math.inf
    case_id: str = "custom"
    tail_C_du: Callable | None = None
    meta: dict = field(default_factory=dict)
    cbar_builder: Callable | None = field(default=None, repr=False)
    _coeffs: Callable | None = field(default=None, repr=False)
    _rates: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        self.corner_jets = np.atleast_1d(np.asarray(self.corner_jets, dtype=float))
        gap = abs(float(self.tail_C(self.u_left)) - float(self.cbar(0.0)))
        if gap > 1e-12 * max(1.0, abs(float(self.cbar(0.0)))):
            raise ConfigError(f"corner mismatch between the two traces: {gap:.3e}")

    # -- traces ------------------------------------------------------------
    @property
    def k(self) -> float:
        return (self.d - 1) / 2.0

    def trace_C(self, u):
        u = np.asarray(u, dtype=float)
        return self.background.value(u, np.zeros_like(u)) + self.tail_C(u)

    def trace_Cbar(self, v):
        v = np.asarray(v, dtype=float)
        return self.background.value(np.full_like(v, self.u_left), v) + self.cbar(v)

    def psi_C(self, u):
        u = np.asarray(u, dtype=float)
        return np.abs(u) ** self.k * self.tail_C(u)

    def psi_Cbar(self, v):
        v = np.asarray(v, dtype=float)
        return (v - self.u_left) ** self.k * self.cbar(v)

    def corner_psi_coeffs(self, order: int | None = None) -> np.ndarray:
        """Taylor coefficients of ``psi`` in v at the corner."""
        order = self.m if order is None else order
        if order > self.corner_jets.size - 1:
            raise OrderError("corner jets not available to this order")
        b = self.corner_jets[: order + 1] / np.array([math.factorial(j) for j in range(order + 1)])
        return (Series(b) * _rk_series(self.u_left, self.k, order)).c

    def _c0_u(self, u):
        if self.tail_C_du is not None:
            phi_u = self.tail_C_du(u)
        else:
            h = 1e-6 * abs(u)
            phi_u = (self.tail_C(u + h) - self.tail_C(u - h)) / (2 * h)
        au = abs(u)
        # d/du of |u|^k phibar = -k |u|^{k-1} phibar + |u|^k phibar_u
        return -self.k * au ** (self.k - 1) * self.tail_C(u) + au**self.k * phi_u

    # -- jets --------------------------------------------------------------
    @property
    def has_jets(self) -> bool:
        return self._coeffs is not None

    def psi_coeffs(self, u) -> np.ndarray:
        """Series coefficients ``c_0..c_m`` of ``psi`` at each u, shape (m+1, ...)."""
        if self._coeffs is None:
            raise OrderError("transversal jets not built; call build_transversal_jet")
        return self._coeffs(np.asarray(u, dtype=float))

    def psi_rates(self, u) -> np.ndarray:
        if self._rates is None:
            raise OrderError("transversal jets not built")
        return self._rates(np.asarray(u, dtype=float))

    def jet(self, kk: int, u, full: bool = False):
        """``d_v^kk phi`` on the cone (perturbation unless ``full``)."""
        if kk > self.m:
            raise OrderError(f"jet order {kk} > available {self.m}")
        u = np.asarray(u, dtype=float)
        c = self.psi_coeffs(u)
        phis = Series(c) * _rk_series(u, -self.k, self.m)
        out = phis.c[kk] * math.factorial(kk)
        if full:
            out = out + self.background.series_on_cone(u, self.m).c[kk] * math.factorial(kk)
        return out

    @property
    def jet_C(self):
        return [lambda u, kk=kk: self.jet(kk, u, full=True) for kk in range(self.m + 1)]

    def psi_near_cone(self, u, v):
        """Truncated Taylor sum of ``psi`` in v."""
        c = self.psi_coeffs(u)
        v = np.asarray(v, dtype=float)
        return sum(c[j] * v**j for j in range(c.shape[0]))

    # -- serialization -------------------------------------------------------
    def header(self) -> dict:
        return {
            "case_id": self.case_id,
            "a_zero": self.a_zero,
            "m": self.m,
            "d": self.d,
            "u_left": self.u_left,
            "corner_values": self.corner_jets.tolist(),
            "background": self.background.name,
            "background_value": None if self.background.kind.value is None else self.background.kind.value,
            **{k: v for k, v in self.meta.items() if _jsonable(v)},
        }

    def save(self, prefix, n_u: int = 801, n_v: int = 401, u_end: float | None = None,
             v_max: float = 0.5) -> dict:
        """Write ``<prefix>.json`` plus ``<prefix>_C.csv`` and ``<prefix>_Cbar.csv``."""
        prefix = Path(prefix)
        u_end = u_end if u_end is not None else -1e-6 * abs(self.u_left)
        u = -np.geomspace(abs(self.u_left), abs(u_end), n_u)
        cols = [u, self.trace_C(u)]
        names = ["u", "trace"]
        if self.has_jets:
            for kk in range(1, self.m + 1):
                cols.append(self.jet(kk, u, full=True))
                names.append(f"jet_{kk}")
        _write_csv(prefix.with_name(prefix.name + "_C.csv"), names, np.column_stack(cols))
        v = np.linspace(0.0, v_max, n_v)
        _write_csv(prefix.with_name(prefix.name + "_Cbar.csv"), ["v", "trace"],
                   np.column_stack([v, self.trace_Cbar(v)]))
        head = self.header()
        prefix.with_suffix(".json").write_text(json.dumps(head, indent=2, sort_keys=True))
        return head

    @classmethod
    def load(cls, prefix) -> "CharacteristicData":
        """Rebuild from saved tables; traces and jets become splines in log|u|."""
        prefix = Path(prefix)
        head = json.loads(prefix.with_suffix(".json").read_text())
        tc = np.loadtxt(prefix.with_name(prefix.name + "_C.csv"), delimiter=",", skiprows=1, ndmin=2)
        tb = np.loadtxt(prefix.with_name(prefix.name + "_Cbar.csv"), delimiter=",", skiprows=1, ndmin=2)
        if head["background"] in ("zero",):
            bg = Profile.zero(head["d"])
        elif head.get("background_value") is not None:
            bg = Profile.constant(head["background_value"], head["d"])
        else:
            raise DataError("only zero or constant backgrounds reload from tables")
        s = np.log(np.abs(tc[:, 0]))[::-1]
        base = bg.value(tc[:, 0], np.zeros_like(tc[:, 0]))
        tail_sp = CubicSpline(s, (tc[:, 1] - base)[::-1])
        cbar_sp = CubicSpline(tb[:, 0], tb[:, 1] - bg.value(np.full_like(tb[:, 0], head["u_left"]), tb[:, 0]))
        data = cls(
            tail_C=lambda u: tail_sp(np.log(np.abs(u))),
            cbar=lambda v: cbar_sp(v),
            corner_jets=np.asarray(head["corner_values"]),
            background=bg, d=head["d"], u_left=head["u_left"], a_zero=head["a_zero"],
            m=head["m"], case_id=head["case_id"],
        )
        if tc.shape[1] > 2:
            m = tc.shape[1] - 2
            jet_sp = [CubicSpline(s, tc[::-1, 2 + j]) for j in range(m)]

            def coeffs(u, _sp=jet_sp, _m=m, _k=data.k, _tail=tail_sp):
                u = np.asarray(u, dtype=float)
                sl = np.log(np.abs(u))
                fact = [math.factorial(j) for j in range(_m + 1)]
                phis = np.stack([_tail(sl)] + [_sp[j](sl) / fact[j + 1] for j in range(_m)])
                return (Series(phis) * _rk_series(u, _k, _m)).c

            data._coeffs = coeffs
        return data


def _jsonable(x):
    try:
        json.dumps(x)
        return True
    except TypeError:
        return False


def _write_csv(path, names, table):
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    np.savetxt(buf, table, delimiter=",", fmt="%.17g")
    Path(path).write_text(buf.getvalue())


def build_transversal_jet(data: CharacteristicData, spec, m: int, u_end: float | None = None,
                          rtol: float = 1e-10, atol: float = 1e-14,
                          conormal_cap: bool = True) -> CharacteristicData:
    """Fill ``d_v^k phibar|_C`` for ``k <= m`` by integrating the transport ODEs.

    ``spec`` is a SplitRHS or an EquationSpec (then the split is built around
    ``data.background``).  Integration runs in ``s = log|u|`` from the corner
    to ``u_end``.  Conormal data (finite ``a_zero``) caps ``m`` at
    ``floor(a_zero + (d-1)/2)`` unless ``conormal_cap`` is off; the cap is
    recorded in ``meta``.
    """
    split = spec if isinstance(spec, SplitRHS) else nonlinearity_split(spec, data.background)
    if split.spec.d != data.d:
        raise ConfigError("equation and data dimensions differ")
    meta = dict(data.meta)
    if data.a_zero is not None and conormal_cap:
        cap = math.floor(data.a_zero + data.k + 1e-12)
        if m > cap:
            meta["jet_cap"] = cap
            meta["jet_requested"] = m
            m = max(cap, 0)
    if m > data.corner_jets.size - 1:
        # extend missing corner derivatives by zero: the left-edge data is
        # a Taylor polynomial times a plateau cutoff
        cj = np.zeros(m + 1)
        cj[: data.corner_jets.size] = data.corner_jets
    else:
        cj = data.corner_jets[: m + 1].copy()
    _check_decay(data)
    u_end = -1e-7 * abs(data.u_left) if u_end is None else u_end
    if m >= 1 and data.meta.get("corner") == "conormal" and data.cbar_builder is not None:
        cj = _conormal_corner(data, split, m, rtol, atol)
        meta["corner_fit"] = "backward transport from the power-law regime"
        out = replace(data, m=m, meta=meta, corner_jets=cj, cbar=data.cbar_builder(cj))
    else:
        out = replace(data, m=m, meta=meta, corner_jets=cj)
    if m == 0:
        out._coeffs = lambda u: np.asarray(out.psi_C(u))[None, ...]
        out._rates = lambda u: np.asarray(np.vectorize(out._c0_u)(u))[None, ...]
        return out
    c_init = out.corner_psi_coeffs(m)[1:]
    s0, s1 = math.log(abs(data.u_left)), math.log(abs(u_end))

    def rhs(s, y):
        u = -math.exp(s)
        c = np.concatenate([[float(out.psi_C(u))], y])
        rates = transport_rates(split, u, c, out._c0_u(u) if split.uses_derivatives else 0.0)
        return u * rates[1:]  # dc/ds = u dc/du

    sol = solve_ivp(rhs, (s0, s1), c_init, method="RK45", rtol=rtol, atol=atol, dense_output=True)
    if not sol.success:
        raise DataError(f"transport integration failed: {sol.message}")
    out.meta["transport_nfev"] = int(sol.nfev)

    def coeffs(u, _sol=sol, _out=out):
        u = np.asarray(u, dtype=float)
        s = np.log(np.abs(u))
        if np.any(s > s0 + 1e-12) or np.any(s < s1 - 1e-12):
            raise DataError("jets requested outside the integrated range")
        flat = s.ravel()
        higher = _sol.sol(flat).reshape((m,) + s.shape)
        return np.concatenate([np.asarray(_out.psi_C(u))[None, ...], higher], axis=0)

    def rates(u, _out=out):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        c = coeffs(u)
        res = np.empty_like(c)
        for i, uu in enumerate(u.ravel()):
            res[:, i] = transport_rates(split, float(uu), c[:, i].copy(), _out._c0_u(float(uu)))
        return res

    out._coeffs = coeffs
    out._rates = rates
    out.meta["split_family"] = split.spec.family
    out._split = split
    return out


def _conormal_corner(data, split, m, rtol, atol, depth: float = 1e-12):
    """Corner jets whose transport solution stays on the pure power-law branch.

    Generic corner data adds constants to ``c_k`` for ``k < a_zero + k_d``,
    which are smooth but dominate the conormal ``|u|^{alpha - k}`` terms at
    the tip.  Starting deep in the power-law regime and integrating the
    transport equations back to the corner removes them.
    """
    alpha = data.a_zero + data.k
    terms = data.meta.get("terms") or [[float(data.meta.get("amplitude", 1.0)), data.a_zero]]
    u_a = -depth * abs(data.u_left)
    lam = split.spec.c_d + float(split.V_coeff(u_a, 0.0))
    ks = np.arange(m + 1)

    def linear_coeffs(au):
        out = np.zeros(m + 1)
        for c, e in terms:
            al = e + data.k
            out += regular_corner_coeffs(al, lam, m, c) * au ** (al - ks)
        return out

    c_a = linear_coeffs(abs(u_a))[1:]

    def rhs(s, y):
        u = -math.exp(s)
        c = np.concatenate([[float(data.psi_C(u))], y])
        rates = transport_rates(split, u, c, data._c0_u(u) if split.uses_derivatives else 0.0)
        return u * rates[1:]

    sol = solve_ivp(rhs, (math.log(abs(u_a)), math.log(abs(data.u_left))), c_a,
                    method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise DataError(f"corner transport failed: {sol.message}")
    psi_c = np.concatenate([[float(data.psi_C(data.u_left))], sol.y[:, -1]])
    # orders above alpha only carry subdominant constants; keep the linear
    # power-law values there so the corner does not depend on the start depth
    high = ks > alpha
    psi_c[high] = linear_coeffs(abs(data.u_left))[high]
    return _corner_from_psi(psi_c, data.u_left, data.k)


def _check_decay(data: CharacteristicData):
    a0 = data.a_zero
    if a0 is None:
        return
    # the transport source of c_1 behaves like |u|^{a_0 + k - 2}; it is
    # integrable up to u = 0 only through the log-variable when the jets
    # themselves stay finite on compact u-sets
    if a0 + data.k <= 0:
        raise DataError(f"trace decays too slowly: a_zero + (d-1)/2 = {a0 + data.k:g} <= 0")


# ---------------------------------------------------------------------------
# construction of data


def regular_corner_coeffs(alpha: float, lam: float, m: int, amplitude: float = 1.0) -> np.ndarray:
    """Coefficients ``gamma_k`` with ``c_k = gamma_k |u|^{alpha - k}`` for a pure power tail.

    Solves the linear part ``-psi_uv = lam psi / r^2`` order by order; a
    resonance (``alpha`` an integer <= m) truncates the recursion.
    """
    g = np.zeros(m + 1)
    g[0] = amplitude
    for kk in range(1, m + 1):
        den = kk * (alpha - kk)
        if abs(den) < 1e-12:
            break
        acc = sum(g[kk - 1 - j] * (j + 1) * (-1.0) ** j for j in range(kk))
        g[kk] = lam / den * acc
    return g


def _corner_from_psi(psi_coeffs, u_left, k):
    order = len(psi_coeffs) - 1
    phis = Series(np.asarray(psi_coeffs, dtype=float)) * _rk_series(u_left, -k, order)
    return phis.c * np.array([math.factorial(j) for j in range(order + 1)])


def _cbar_from_corner(corner_jets, u_left, k, extent, pulse=None):
    order = len(corner_jets) - 1
    b = np.asarray(corner_jets, float) / np.array([math.factorial(j) for j in range(order + 1)])
    psi_c = (Series(b) * _rk_series(u_left, k, order)).c.copy()

    def cbar(v):
        v = np.asarray(v, dtype=float)
        poly = sum(psi_c[j] * v**j for j in range(order + 1))
        psi = smooth_step(v, 0.5 * extent, extent) * poly
        if pulse is not None:
            psi = psi + pulse(v)
        return psi / (v - u_left) ** k

    return cbar


def perturb_trace(base: Profile, kind: str = "power_tail", *, a: float | None = None,
                  amplitude: float = 1.0, d: int | None = None, u_left: float = -1.0,
                  m: int = 2, split: SplitRHS | None = None, cbar_extent: float | None = None,
                  pulse: tuple[float, float, float] | None = None,
                  subleading: list[tuple[float, float]] | None = None,
                  case_id: str | None = None) -> CharacteristicData:
    """Characteristic data made of a background plus a prescribed tail on ``C``.

    ``kind``:

    * ``"power_tail"``: ``phibar|_C = amplitude * r^a`` plus optional
      ``subleading`` terms ``b * r^(a + delta)`` given as ``(b, delta)``.
    * ``"profile"``: the trace of ``base`` itself, perturbation measured
      against its evolution background (Type II tails relative to ``pi``)
      and scaled by ``amplitude``.
    * ``"none"``: zero perturbation.

    The left-edge data is the corner Taylor polynomial times a plateau
    cutoff.  For power tails with a known ``split`` the corner jets follow
    the homogeneous scaling ``c_k ~ |u|^{a + k_d - k}`` of the linear
    transport equations.  ``pulse = (amplitude, center, width)`` adds a
    smooth bump in ``psi`` on the left edge away from the corner.
    """
    d = base.d if d is None else d
    kd = (d - 1) / 2.0
    bg = base.background()
    extent = cbar_extent if cbar_extent is not None else 0.5 * abs(u_left)
    pulse_fn = None
    if pulse is not None:
        pa, pc, pw = pulse
        if pc - pw <= 0:
            raise ConfigError("left-edge pulse must vanish near the corner")
        pulse_fn = lambda v: pa * bump(v, pc, pw)  # noqa: E731
    a_zero = None
    tail_du = None
    if kind == "power_tail":
        if a is None:
            raise ConfigError("power_tail needs the exponent a")
        if base.name not in ("zero", "constant", "equatorial", "typeI", "power"):
            raise ConfigError(f"power tail on a {base.name} background is not in the catalog")
        terms = [(float(amplitude), float(a))] + [(float(b), float(a + dl)) for b, dl in (subleading or [])]

        def tail(u, _t=terms):
            au = np.abs(np.asarray(u, float))
            return sum(c * au**e for c, e in _t)

        def tail_du(u, _t=terms):
            au = np.abs(np.asarray(u, float))
            return sum(-c * e * au ** (e - 1) for c, e in _t)

        a_zero = float(a)
        corner = np.zeros(m + 1)
        corner[0] = tail(u_left)
        if split is not None:
            psi_c = np.zeros(m + 1)
            lam = split.spec.c_d + float(split.V_coeff(u_left, 0.0))
            for c, e in terms:
                alpha = e + kd
                g = regular_corner_coeffs(alpha, lam, m, c)
                psi_c += g * abs(u_left) ** (alpha - np.arange(m + 1))
            corner = _corner_from_psi(psi_c, u_left, kd)
    elif kind == "profile":
        if base.name != "typeII_tail":
            raise ConfigError("profile traces are only defined for Type II tails")

        def tail(u, _b=base, _bg=bg, _a=float(amplitude)):
            u = np.asarray(u, dtype=float)
            return _a * (_b.value(u, np.zeros_like(u)) - _bg.value(u, np.zeros_like(u)))

        a_zero = float(base.kind.nu - 1.0)
        corner = np.zeros(m + 1)
        corner[0] = tail(u_left)
    elif kind == "none":
        tail = lambda u: np.zeros_like(np.asarray(u, dtype=float))  # noqa: E731
        corner = np.zeros(m + 1)
    else:
        raise ConfigError(f"unknown trace perturbation {kind!r}")
    cbar = _cbar_from_corner(corner, u_left, kd, extent, pulse_fn)
    builder = lambda cj: _cbar_from_corner(cj, u_left, kd, extent, pulse_fn)  # noqa: E731
    meta = {"kind": kind, "amplitude": amplitude, "cbar_extent": extent}
    if kind == "power_tail":
        meta["corner"] = "conormal"
        meta["terms"] = [list(t) for t in terms]
    if pulse is not None:
        meta["pulse"] = list(pulse)
    return CharacteristicData(
        tail_C=tail, cbar=cbar, corner_jets=corner, background=bg, d=d, u_left=u_left,
        a_zero=a_zero, m=0, case_id=case_id or f"{base.name}-{kind}", tail_C_du=tail_du,
        meta=meta, cbar_builder=builder,
    )


def free_wave_data(F: Callable, G: Callable, G_derivs, u_left: float = -1.0) -> CharacteristicData:
    """Data of the d=3 free radial wave ``phi = (F(u) + G(v))/r``.

    ``G_derivs[k]`` is ``G^(k)(0)``.
    """
    order = len(G_derivs) - 1
    psi_c = np.array([G_derivs[j] / math.factorial(j) for j in range(order + 1)], dtype=float)
    psi_c[0] += F(u_left)
    corner = _corner_from_psi(psi_c, u_left, 1.0)
    return CharacteristicData(
        tail_C=lambda u: (F(np.asarray(u, float)) + G(0.0)) / np.abs(u),
        cbar=lambda v: (F(u_left) + G(np.asarray(v, float))) / (np.asarray(v, float) - u_left),
        corner_jets=corner, background=Profile.zero(3), d=3, u_left=u_left,
        case_id="calib-freewave-d3",
    )


# ---------------------------------------------------------------------------
# peeling


@dataclass
class Approximant:
    """``phi_1 = chi(v/|u|) sum_{k<=l} v^k/k! d_v^k phibar|_C`` (perturbation)."""

    data: CharacteristicData
    l: int
    cut_lo: float = 0.25
    cut_hi: float = 0.5

    def _parts(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        u, v = np.broadcast_arrays(u, v)
        c = self.data.psi_coeffs(u)[: self.l + 1]
        cu = self.data.psi_rates(u.ravel()).reshape((-1,) + u.shape)[: self.l + 1]
        P = sum(c[j] * v**j for j in range(self.l + 1))
        Pv = sum(j * c[j] * v ** (j - 1) for j in range(1, self.l + 1)) if self.l else np.zeros_like(v)
        Pu = sum(cu[j] * v**j for j in range(self.l + 1))
        Puv = sum(j * cu[j] * v ** (j - 1) for j in range(1, self.l + 1)) if self.l else np.zeros_like(v)
        s = -v / u
        chi, dchi, d2chi = _smooth_step_derivs(s, self.cut_lo, self.cut_hi)
        s_u, s_v, s_uv = v / u**2, -1.0 / u, 1.0 / u**2
        chi_u, chi_v = dchi * s_u, dchi * s_v
        chi_uv = d2chi * s_u * s_v + dchi * s_uv
        return u, v, dict(
            psi=chi * P,
            psi_u=chi_u * P + chi * Pu,
            psi_v=chi_v * P + chi * Pv,
            psi_uv=chi_uv * P + chi_u * Pv + chi_v * Pu + chi * Puv,
        )

    def psi(self, u, v):
        return self._parts(u, v)[2]["psi"]

    def __call__(self, u, v):
        u, v, p = self._parts(u, v)
        return p["psi"] / (v - u) ** self.data.k

    def derivatives(self, u, v):
        """``(phi_1, d_u phi_1, d_v phi_1)``."""
        u, v, p = self._parts(u, v)
        k = self.data.k
        r = v - u
        phi = p["psi"] / r**k
        phi_u = p["psi_u"] / r**k + k * p["psi"] / r ** (k + 1)
        phi_v = p["psi_v"] / r**k - k * p["psi"] / r ** (k + 1)
        return phi, phi_u, phi_v

    def residual(self, u, v, split: SplitRHS | None = None):
        """``box phi_1 - N(phi_1) - V phi_1`` evaluated pointwise."""
        split = split or getattr(self.data, "_split", None)
        if split is None:
            raise ConfigError("residual needs the equation split")
        u, v, p = self._parts(u, v)
        k = self.data.k
        r = v - u
        phi, phi_u, phi_v = self.derivatives(u, v)
        # r^k box phi = -psi_uv - c_d psi / r^2
        lhs = (-p["psi_uv"] - split.spec.c_d * p["psi"] / r**2) / r**k
        return lhs - split.N(u, v, phi, phi_u, phi_v) - split.V(u, v) * phi


def peel(data: CharacteristicData, l: int, cut_lo: float = 0.25, cut_hi: float = 0.5) -> Approximant:
    """Peeling approximant of order ``l`` supported in ``v <= cut_hi |u|``."""
    if not data.has_jets or l > data.m:
        raise OrderError(f"peeling order {l} exceeds available jet order {data.m if data.has_jets else -1}")
    if l < 0:
        raise OrderError("peeling order must be >= 0")
    return Approximant(data=data, l=l, cut_lo=cut_lo, cut_hi=cut_hi)
