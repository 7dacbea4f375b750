"""Diagnostics on evolved fields: weighted norms, rate fits, horizon traces.

Everything here reads a :class:`~cauchylab.solver.FieldGrid` and never
modifies it.  Reports are plain dataclasses with ``as_dict`` for JSON.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import (BlowUpError, ConfigError, DataError, ExtensionError, NonConvergenceError,
                     OrderError, StepError, UnsupportedError)
from .geometry import Grid, WeightVector, diff_axis, rho_eval, vf_array
from .models import SplitRHS, nonlinearity_split
from .solver import FieldGrid, evolve_boundary

DEFAULT_WINDOW = (1e-3, 10**-1.5)
INTEGER_VERDICT = "inconclusive — integer exponent"
RADIAL_FIELDS = ("u_du", "v_dv")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, WeightVector):
        return o.as_dict()
    raise TypeError(f"not serializable: {type(o).__name__}")


# ---------------------------------------------------------------------------
# weighted norms


@dataclass
class NormReport:
    k: int
    a: WeightVector
    value: float
    location: tuple[float, float]
    word: tuple[str, ...] = ()
    l2: float | None = None
    per_word: dict = field(default_factory=dict)

    def as_dict(self):
        out = asdict(self)
        out["a"] = self.a.as_dict()
        out["word"] = list(self.word)
        return out


def _words(k: int):
    yield ()
    for n in range(1, k + 1):
        yield from itertools.product(RADIAL_FIELDS, repeat=n)


def weighted_norm(field: FieldGrid, k: int, a: WeightVector, l2: bool = False,
                  values: np.ndarray | None = None) -> NormReport:
    """Sup over the nodes of ``|w V^alpha f|`` for all radial words ``|alpha| <= k``.

    ``w = rho_-^{-a_-} rho_0^{-a_0} rho_+^{-a_+}``.  With ``l2`` the
    weighted L2 norm against ``mu_b`` is reported as well (cell averages of
    the squared integrand times exact cell masses).
    """
    g = field.grid
    if k < 0:
        raise OrderError("commutation order must be nonnegative")
    if 2 * k + 1 > min(g.shape):
        raise OrderError(f"{k} commutations need at least {2 * k + 1} lines per axis")
    f = np.asarray(field.phi if values is None else values, dtype=float)
    w = 1.0 / a.weight(g.U, g.V)
    best, where, best_word = -1.0, (0, 0), ()
    l2sum = 0.0
    per_word = {}
    cache = {(): f}
    for word in _words(k):
        if word not in cache:
            cache[word] = vf_array(word[-1], cache[word[:-1]], g)
        arr = np.abs(w * cache[word])
        idx = np.unravel_index(int(np.argmax(arr)), arr.shape)
        per_word["".join(x[0] for x in word) or "id"] = float(arr[idx])
        if arr[idx] > best:
            best, where, best_word = float(arr[idx]), idx, word
        if l2:
            sq = arr**2
            cells = 0.25 * (sq[1:, 1:] + sq[1:, :-1] + sq[:-1, 1:] + sq[:-1, :-1])
            l2sum += float(np.sum(cells * g.cell_measures()))
    return NormReport(k=k, a=a, value=best,
                      location=(float(g.u[where[0]]), float(g.v[where[1]])),
                      word=best_word, l2=math.sqrt(l2sum) if l2 else None, per_word=per_word)


# ---------------------------------------------------------------------------
# rate fits


@dataclass
class RateFit:
    edge: str
    exponent: float
    stderr: float
    window: tuple[float, float]
    intercept: float = 0.0
    npoints: int = 0

    def as_dict(self):
        return asdict(self)

    def agrees(self, target: float, tol: float) -> bool:
        return abs(self.exponent - target) <= tol


def fit_rate(x, y, edge: str = "CH", window: tuple[float, float] = DEFAULT_WINDOW,
             min_points: int = 30, sign_tolerance: float = 0.0) -> RateFit:
    """Least-squares slope of ``log|y|`` against ``log x`` on ``window``.

    ``x`` is the edge variable (a defining function of the edge, e.g.
    ``rho_+`` or ``|u|`` for the horizon).  Fits are rejected with
    :class:`DataError` when too few samples fall in the window or when more
    than ``sign_tolerance`` of them disagree in sign with the majority.
    """
    if edge not in ("C", "CH", "corner"):
        raise ConfigError(f"unknown edge {edge!r}")
    lo, hi = window
    if not (0 < lo < hi):
        raise ConfigError("window must satisfy 0 < lo < hi")
    if math.log10(hi / lo) < 1.5 - 1e-9:
        raise ConfigError("fit window must span at least 1.5 decades")
    x = np.abs(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    sel = (x >= lo) & (x <= hi) & np.isfinite(y)
    n = int(sel.sum())
    if n < min_points:
        raise DataError(f"only {n} samples inside the fit window (need {min_points})")
    ys = y[sel]
    nz = ys != 0
    if nz.sum() < min_points:
        raise DataError("data vanishes on the fit window")
    signs = np.sign(ys[nz])
    minority = min(np.mean(signs > 0), np.mean(signs < 0))
    if minority > sign_tolerance:
        raise DataError(f"data changes sign inside the fit window ({minority:.1%} of samples)")
    res = stats.linregress(np.log(x[sel][nz]), np.log(np.abs(ys[nz])))
    return RateFit(edge=edge, exponent=float(res.slope), stderr=float(res.stderr),
                   window=(float(lo), float(hi)), intercept=float(res.intercept), npoints=int(nz.sum()))


# ---------------------------------------------------------------------------
# Cauchy-horizon trace


@dataclass
class CHTrace:
    """Extrapolated values on ``u = 0`` along the grid's v-lines."""

    v: np.ndarray
    values: np.ndarray
    error: np.ndarray
    raw: np.ndarray
    u_lines: np.ndarray
    method: str
    quantity: str = "psi"
    valid: np.ndarray | None = None
    _spline: CubicSpline | None = field(default=None, repr=False)

    def __call__(self, v):
        if self._spline is None:
            self._spline = CubicSpline(self.v, self.values)
        return self._spline(v)

    def derivative(self, v):
        if self._spline is None:
            self._spline = CubicSpline(self.v, self.values)
        return self._spline(v, 1)

    def as_dict(self):
        return {"v": self.v, "values": self.values, "error": self.error,
                "u_lines": self.u_lines, "method": self.method, "quantity": self.quantity,
                "valid": self.valid}


def _is_geometric(x: np.ndarray, rtol: float = 1e-6) -> bool:
    q1, q2 = x[-1] / x[-2], x[-2] / x[-3]
    return abs(q1 - q2) <= rtol * abs(q1)


def _extrapolate(u: np.ndarray, rows: np.ndarray, geometric: bool, atol: float) -> np.ndarray:
    a, b, c = rows
    if geometric:
        d1, d2 = c - b, b - a
        den = d1 - d2
        out = c.copy()
        ok = (np.abs(den) > atol) & (np.abs(d1) > atol)
        out[ok] = c[ok] - d1[ok] ** 2 / den[ok]
        return out
    # quadratic through the three lines, evaluated at u = 0
    u0, u1, u2 = u
    l0 = (0 - u1) * (0 - u2) / ((u0 - u1) * (u0 - u2))
    l1 = (0 - u0) * (0 - u2) / ((u1 - u0) * (u1 - u2))
    l2 = (0 - u0) * (0 - u1) / ((u2 - u0) * (u2 - u1))
    return l0 * a + l1 * b + l2 * c


def ch_trace(field: FieldGrid, quantity: str = "psi", rho_max: float = 1e-3) -> CHTrace:
    """Trace on ``u = 0`` from the last three u-lines.

    Geometric u-lines use Aitken's delta-squared (exact for a constant plus
    one geometric mode); other grids use quadratic extrapolation in ``u``.
    The error estimate is the larger of the change relative to the last
    line and the change between the last two extrapolation triples.
    """
    g = field.grid
    if g.u.size < 4:
        raise ConfigError("need at least four u-lines")
    rho_plus = abs(g.u[-1]) / (g.v[-1] - g.u[-1])
    if rho_plus > rho_max:
        raise ConfigError(f"last u-line has rho_+ = {rho_plus:.3g} > {rho_max:g} at v_max")
    data = field.psi if quantity == "psi" else field.phi
    scale = 1.0 + float(np.max(np.abs(data[-4:])))
    atol = 1e-13 * scale
    geometric = g.stretching == "geometric" or _is_geometric(np.abs(g.u))
    last = _extrapolate(g.u[-3:], data[-3:], geometric, atol)
    prev = _extrapolate(g.u[-4:-1], data[-4:-1], geometric, atol)
    raw = data[-3:].copy()
    # lines near the corner never get close to the horizon in rho_+
    valid = abs(g.u[-1]) / (g.v - g.u[-1]) <= rho_max
    d1, d2 = np.abs(raw[2] - raw[1]), np.abs(raw[1] - raw[0])
    growing = (d1 > d2 * (1 + 1e-6) + 10 * atol) & valid
    if not np.all(np.isfinite(last)) or np.any(growing):
        bad = np.flatnonzero(growing | ~np.isfinite(last))
        raise NonConvergenceError(
            f"horizon extrapolation diverges on {bad.size} v-lines",
            diagnostics={"raw": raw, "u_lines": g.u[-3:], "v": g.v, "bad": bad})
    err = np.maximum(np.abs(last - raw[2]), np.abs(last - prev))
    return CHTrace(v=g.v.copy(), values=last, error=err, raw=raw, u_lines=g.u[-3:].copy(),
                   method="aitken" if geometric else "quadratic", quantity=quantity, valid=valid)


def horizon_deviation(field: FieldGrid, v: float, trace: CHTrace | None = None):
    """``(|u|, rho_+, psi - psi|_CH)`` along the v-line nearest ``v``."""
    trace = trace or ch_trace(field)
    g = field.grid
    j = int(np.argmin(np.abs(g.v - v)))
    au = np.abs(g.u)
    return au, au / (g.v[j] + au), field.psi[:, j] - trace.values[j]


# ---------------------------------------------------------------------------
# sharp-regularity probe


@dataclass
class SharpProbe:
    verdict: str
    raw: RateFit | None = None
    remainder: RateFit | None = None
    coefficient: float = float("nan")
    smooth_coefficient: float = float("nan")
    subleading_exponent: float | None = None
    a_zero: float = float("nan")
    delta: float = float("nan")
    v: float = float("nan")

    def as_dict(self):
        out = asdict(self)
        out["raw"] = self.raw.as_dict() if self.raw else None
        out["remainder"] = self.remainder.as_dict() if self.remainder else None
        return out

    @property
    def exponent(self) -> float:
        return self.raw.exponent if self.raw else float("nan")


def _lstsq(cols, y):
    B = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(B, y, rcond=None)
    return coef, float(np.linalg.norm(B @ coef - y))


def subtract_leading(au: np.ndarray, D: np.ndarray, lead: float, smooth: bool = True,
                     q_grid: Sequence[float] | None = None):
    """Fit ``D ~ c1 |u|^lead + c_s u + c2 |u|^q`` and return the remainder.

    The third exponent ``q`` is chosen on ``q_grid`` (inside ``(lead,
    lead + 1)``) by least residual; it only serves to keep ``c1`` unbiased
    and is not subtracted.  The smooth ``c_s u`` part is removed along with
    the leading term when ``smooth`` is set.
    Returns ``(remainder, c1, c_s, q)``.
    """
    if q_grid is None:
        q_grid = lead + np.linspace(0.02, 0.98, 49)
    base = [au**lead] + ([-au] if smooth else [])
    best = None
    for q in [None, *q_grid]:
        cols = base + ([au**q] if q is not None else [])
        coef, res = _lstsq(cols, D)
        if best is None or res < best[0] * (1 - 1e-9):
            best = (res, coef, q)
    _, coef, q = best
    c1 = float(coef[0])
    cs = float(coef[1]) if smooth else 0.0
    rem = D - c1 * au**lead + cs * au
    return rem, c1, cs, q


def sharp_regularity_probe(field: FieldGrid, a_zero: float, v: float | None = None,
                           delta: float = 0.2, window: tuple[float, float] = DEFAULT_WINDOW,
                           tol: float = 0.1, min_points: int = 30,
                           trace: CHTrace | None = None) -> SharpProbe:
    """Check the horizon rate ``r^{-1} |u|^{a_0 + 1}`` of a singular-trace run.

    Along the v-line ``v`` (default: half of ``v_max``) the deviation
    ``psi - psi|_CH`` is fitted against ``|u|``; then the fitted multiple of
    ``|u|^{a_0+1}`` and the smooth linear part are removed and the remainder
    is fitted again.  Verdict ``"sharp"`` needs the raw exponent within
    ``tol`` of ``a_0 + 1`` and the remainder exponent at least
    ``a_0 + 1 + delta/2``.
    """
    if field.grid.d != 3:
        raise UnsupportedError("the horizon-rate probe is only available for d = 3")
    lead = a_zero + 1.0
    if abs(lead - round(lead)) < 1e-12:
        return SharpProbe(verdict=INTEGER_VERDICT, a_zero=a_zero, delta=delta)
    g = field.grid
    v = 0.5 * g.v[-1] if v is None else v
    au, rp, D = horizon_deviation(field, v, trace)
    raw = fit_rate(rp, D, "CH", window, min_points=min_points)
    # slope against |u| on the same samples
    sel = (rp >= window[0]) & (rp <= window[1])
    raw = _refit(au[sel], D[sel], raw)
    rem, c1, cs, q = subtract_leading(au[sel], D[sel], lead)
    floor = 1e-11 * max(1.0, float(np.max(np.abs(D[sel]))))
    if np.max(np.abs(rem)) < floor:
        remainder = RateFit("CH", float("inf"), 0.0, window, npoints=int(sel.sum()))
    else:
        try:
            remainder = _refit(au[sel], rem, None, window, min_points)
        except DataError:
            remainder = None
    ok_raw = raw.agrees(lead, tol)
    ok_rem = remainder is not None and remainder.exponent >= lead + 0.5 * delta
    verdict = "sharp" if ok_raw and ok_rem else "not sharp"
    return SharpProbe(verdict=verdict, raw=raw, remainder=remainder, coefficient=c1,
                      smooth_coefficient=cs, subleading_exponent=q, a_zero=a_zero,
                      delta=delta, v=float(g.v[int(np.argmin(np.abs(g.v - v)))]))


def _refit(x, y, template: RateFit | None, window=DEFAULT_WINDOW, min_points: int = 30) -> RateFit:
    y = np.asarray(y, dtype=float)
    nz = y != 0
    if nz.sum() < min_points:
        raise DataError("too few nonzero samples")
    signs = np.sign(y[nz])
    if min(np.mean(signs > 0), np.mean(signs < 0)) > 0:
        raise DataError("data changes sign inside the fit window")
    res = stats.linregress(np.log(x[nz]), np.log(np.abs(y[nz])))
    win = template.window if template is not None else window
    return RateFit("CH", float(res.slope), float(res.stderr), win, float(res.intercept), int(nz.sum()))


# ---------------------------------------------------------------------------
# weak extension across the horizon


def _bump(s):
    out = np.zeros_like(s, dtype=float)
    m = np.abs(s) < 1
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
    return out


def _dbump(s):
    out = np.zeros_like(s, dtype=float)
    m = np.abs(s) < 1
    sm = s[m]
    out[m] = np.exp(1.0 - 1.0 / (1.0 - sm**2)) * (-2.0 * sm / (1.0 - sm**2) ** 2)
    return out


@dataclass(frozen=True)
class TestFunction:
    """Product bump ``b((u - uc)/wu) b((v - vc)/wv)`` with a C-infinity profile."""

    __test__ = False  # not a pytest class

    uc: float
    wu: float
    vc: float
    wv: float

    def __call__(self, U, V):
        return _bump((U - self.uc) / self.wu) * _bump((V - self.vc) / self.wv)

    def d_uv(self, U, V):
        return (_dbump((U - self.uc) / self.wu) / self.wu) * (_dbump((V - self.vc) / self.wv) / self.wv)

    def support_u(self):
        return self.uc - self.wu, self.uc + self.wu


def default_battery(eps: float, v_lo: float, v_hi: float) -> list[TestFunction]:
    """Five bumps straddling ``u = 0`` inside ``(-eps, eps) x (v_lo, v_hi)``."""
    vm, vw = 0.5 * (v_lo + v_hi), 0.5 * (v_hi - v_lo)
    return [
        TestFunction(0.0, 0.9 * eps, vm, 0.9 * vw),
        TestFunction(0.2 * eps, 0.6 * eps, vm, 0.5 * vw),
        TestFunction(-0.2 * eps, 0.7 * eps, vm - 0.3 * vw, 0.5 * vw),
        TestFunction(0.1 * eps, 0.5 * eps, vm + 0.3 * vw, 0.6 * vw),
        TestFunction(-0.3 * eps, 0.65 * eps, vm + 0.2 * vw, 0.7 * vw),
    ]


SEEDS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "zero": lambda u: np.zeros_like(u),
    "linear": lambda u: u,
    "quadratic": lambda u: u**2,
}


@dataclass
class Extension:
    glued: FieldGrid
    extension: FieldGrid
    residuals: np.ndarray
    scales: np.ndarray
    seed: str
    eps: float
    battery: list = field(default_factory=list)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0

    def as_dict(self):
        return {"seed": self.seed, "eps": self.eps, "residuals": self.residuals,
                "scales": self.scales, "max_residual": self.max_residual,
                "battery": [asdict(t) for t in self.battery]}


def _gauss_nodes(x: np.ndarray, order: int = 4):
    """Gauss-Legendre nodes and weights on every interval of the lines ``x``."""
    t, w = np.polynomial.legendre.leggauss(order)
    a, b = x[:-1, None], x[1:, None]
    nodes = 0.5 * (a + b) + 0.5 * (b - a) * t[None, :]
    weights = 0.5 * (b - a) * w[None, :]
    return nodes.ravel(), weights.ravel()


def _piece_source(spl: RectBivariateSpline, u, v, split: SplitRHS, d: int):
    U, V = np.meshgrid(u, v, indexing="ij")
    R = V - U
    k = split.spec.k
    rk = R**k
    psi = spl(u, v)
    phi = psi / rk
    if split.uses_derivatives:
        pu = spl(u, v, dx=1)
        pv = spl(u, v, dy=1)
        rhs = split.rhs(U, V, phi, (pu + k * psi / R) / rk, (pv - k * psi / R) / rk)
    else:
        phi0 = None if split.trivial_background else split.background.value(U, V)
        rhs = split.rhs(U, V, phi, phi0=phi0)
    return U, V, psi, split.spec.c_d * psi / R**2 + rk * rhs


def weak_residual(pieces, split: SplitRHS, tests: Sequence[TestFunction], order: int = 8):
    """``W(chi) = -int psi chi_uv - int S chi`` over a union of grid pieces.

    ``pieces`` is a list of ``(u_lines, v_lines, psi)`` blocks that meet
    along shared lines; each block is interpolated by a bicubic spline and
    integrated by Gauss-Legendre quadrature on every grid cell, so the kink
    of the glued field only ever sits on a block edge.  ``S`` is evaluated
    from the interpolant.  Returns the residual per test function and the
    magnitude ``int |psi chi_uv| + int |S chi|`` it should be compared with.
    """
    res = np.zeros(len(tests))
    scale = np.zeros(len(tests))
    for u, v, psi in pieces:
        spl = RectBivariateSpline(u, v, psi, kx=3, ky=3)
        uq, wu = _gauss_nodes(u, order)
        vq, wv = _gauss_nodes(v, order)
        U, V, P, S = _piece_source(spl, uq, vq, split, 0)
        W = wu[:, None] * wv[None, :]
        for n, t in enumerate(tests):
            lo, hi = t.support_u()
            if hi <= u[0] or lo >= u[-1]:
                continue
            a = P * t.d_uv(U, V)
            b = S * t(U, V)
            res[n] += float(np.sum(W * (-a - b)))
            scale[n] += float(np.sum(W * (np.abs(a) + np.abs(b))))
    return res, scale


def extend_across_ch(field: FieldGrid, seed: str | Callable = "zero", eps: float | None = None,
                     split: SplitRHS | None = None, spec=None, n_ext: int | None = None,
                     v_range: tuple[float, float] | None = None,
                     battery: Sequence[TestFunction] | None = None) -> Extension:
    """Continue the solution into ``u in (0, eps)`` and test the glued field weakly.

    The extension solves the characteristic problem with the horizon trace
    on ``u = 0`` and ``psi(u, v_lo) = psi_CH(v_lo) + seed(u)`` on the first
    v-line of ``v_range`` (default ``[v_max/2, v_max]``).  The glued field
    stacks the u-lines of ``field`` within ``eps`` of the horizon, the
    horizon line and the extension, over the field's v-lines in ``v_range``.
    """
    if split is None:
        if spec is None:
            raise ConfigError("extend_across_ch needs a split or an EquationSpec")
        split = nonlinearity_split(spec, field.background)
    g = field.grid
    v_lo, v_hi = v_range if v_range is not None else (0.5 * g.v[-1], g.v[-1])
    cols = np.flatnonzero((g.v >= v_lo - 1e-14) & (g.v <= v_hi + 1e-14))
    if cols.size < 5:
        raise ConfigError("too few v-lines in the extension range")
    v = g.v[cols]
    eps = 0.05 * v[0] if eps is None else eps
    if not (0 < eps < v[0]):
        raise ConfigError("extension strip must satisfy 0 < eps < v_lo")
    rows = np.flatnonzero(g.u >= -eps)
    if rows.size < 4:
        raise ConfigError("too few u-lines inside the strip left of the horizon")
    n_ext = n_ext or max(rows.size, 17)
    trace = ch_trace(field)
    tr = trace.values[cols]
    seed_fn = SEEDS[seed] if isinstance(seed, str) else seed
    u_ext = np.linspace(0.0, eps, n_ext)
    ext_grid = Grid(u=u_ext, v=v, d=g.d, stretching="uniform")
    try:
        ext = evolve_boundary(ext_grid, split, lambda vv: tr.copy(),
                              lambda uu: tr[0] + seed_fn(uu),
                              meta={"extension": True, "seed": seed if isinstance(seed, str) else "custom"})
    except (BlowUpError, StepError) as exc:
        raise ExtensionError(f"extension evolution failed: {exc}") from exc
    if not np.all(np.isfinite(ext.psi)):
        raise ExtensionError("extension produced non-finite values")
    left_u = np.append(g.u[rows], 0.0)
    left_psi = np.vstack([field.psi[np.ix_(rows, cols)], tr[None, :]])
    glued_grid = Grid(u=np.concatenate([g.u[rows], u_ext]), v=v, d=g.d, stretching="glued")
    glued = FieldGrid(grid=glued_grid, psi=np.vstack([left_psi[:-1], ext.psi]),
                      meta={"glued": True, "eps": eps}, background=field.background)
    tests = list(battery) if battery is not None else default_battery(eps, v[0], v[-1])
    res, scale = weak_residual([(left_u, v, left_psi), (u_ext, v, ext.psi)], split, tests)
    return Extension(glued=glued, extension=ext, residuals=res, scales=scale,
                     seed=seed if isinstance(seed, str) else "custom", eps=eps, battery=tests)


# ---------------------------------------------------------------------------
# exporters


def write_json(obj, path) -> Path:
    path = Path(path)
    payload = obj.as_dict() if hasattr(obj, "as_dict") else obj
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default))
    return path


def ratefit_csv(x, y, path) -> Path:
    """Two columns ``log10 x, log10 |y|`` for external plotting."""
    x = np.abs(np.asarray(x, dtype=float))
    y = np.abs(np.asarray(y, dtype=float))
    ok = (x > 0) & (y > 0)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["log10_edge", "log10_value"])
        w.writerows(zip(np.log10(x[ok]).tolist(), np.log10(y[ok]).tolist()))
    return path


def write_dat(path, columns: dict[str, Sequence[float]]) -> Path:
    """Whitespace-separated columns with a ``#`` header, readable by gnuplot."""
    names = list(columns)
    arrs = [np.asarray(columns[n], dtype=float) for n in names]
    n = {a.size for a in arrs}
    if len(n) != 1:
        raise DataError("columns differ in length")
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# " + " ".join(names) + "\n")
        for row in zip(*arrs):
            fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")
    return path
