"""Characteristic marching of the rescaled field over the exterior grid.

With ``psi = r^k phibar`` (``k = (d-1)/2``) the radial equation reads

    -psi_uv = c_d psi / r^2 + r^k (N(phibar) + V phibar + f),

``c_d = (d-1)(d-3)/4``.  Each grid cell is closed by the diamond rule

    psi_N = psi_E + psi_W - psi_S - du dv S(cell centre),

with the centre value taken as the four-point average and the nonlinear
dependence on ``psi_N`` resolved by fixed-point iteration.  Cells on one
anti-diagonal are independent and are updated together.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .chardata import CharacteristicData, peel
from .errors import BlowUpError, ConfigError, OrderError, StepError
from .geometry import DomainSpec, Grid, build_grid, diff_axis
from .models import EquationSpec, SplitRHS, nonlinearity_split

log = logging.getLogger(__name__)


@dataclass
class SolveReport:
    residual_max: float = float("nan")
    residual_rms: float = float("nan")
    sources: dict = field(default_factory=dict)
    wall_time: float = 0.0
    iterations_max: int = 0
    stiffness: float = 0.0
    meta: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


@dataclass
class FieldGrid:
    """Nodal values of ``psi`` on a grid; ``phi`` is derived on demand."""

    grid: Grid
    psi: np.ndarray
    meta: dict = field(default_factory=dict)
    report: SolveReport | None = None
    use_psi: bool = False
    background: object | None = field(default=None, repr=False)

    @property
    def d(self) -> int:
        return self.grid.d

    @property
    def k(self) -> float:
        return (self.grid.d - 1) / 2.0

    @property
    def R(self):
        return self.grid.R

    @property
    def phi(self) -> np.ndarray:
        """Perturbation ``phibar = r^{-k} psi``."""
        return self.psi / self.grid.R**self.k

    def phi_full(self) -> np.ndarray:
        if self.background is None:
            return self.phi
        return self.phi + self.background.value(self.grid.U, self.grid.V)

    def value(self, u, v, which: str = "psi") -> float:
        i, j = self.grid.nearest(u, v)
        return float(getattr(self, which)[i, j])

    # -- I/O ----------------------------------------------------------------
    def save(self, path) -> Path:
        """Binary ``.npz`` block (u, v, psi) plus ``.json`` metadata."""
        path = Path(path)
        np.savez(path.with_suffix(".npz"), u=self.grid.u, v=self.grid.v, psi=self.psi)
        meta = dict(self.meta)
        meta["d"] = self.grid.d
        meta["shape"] = list(self.psi.shape)
        if self.report is not None:
            meta["report"] = self.report.as_dict()
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default))
        return path.with_suffix(".npz")

    @classmethod
    def load(cls, path) -> "FieldGrid":
        path = Path(path)
        blob = np.load(path.with_suffix(".npz"))
        meta = {}
        if path.with_suffix(".json").exists():
            meta = json.loads(path.with_suffix(".json").read_text())
        d = int(meta.get("d", 3))
        grid = Grid(u=blob["u"], v=blob["v"], d=d, stretching=meta.get("stretching", "uniform"))
        return cls(grid=grid, psi=blob["psi"], meta=meta)

    def slice_csv(self, path, line: str, value: float) -> int:
        """Write ``(u, v, psi, phi)`` along ``u = value``, ``v = value`` or ``t = value``."""
        g = self.grid
        phi = self.phi
        rows = []
        if line == "u":
            i = int(np.argmin(np.abs(g.u - value)))
            rows = [(g.u[i], g.v[j], self.psi[i, j], phi[i, j]) for j in range(g.v.size)]
        elif line == "v":
            j = int(np.argmin(np.abs(g.v - value)))
            rows = [(g.u[i], g.v[j], self.psi[i, j], phi[i, j]) for i in range(g.u.size)]
        elif line == "t":
            # nearest node to u + v = value on every u-line
            for i in range(g.u.size):
                j = int(np.argmin(np.abs(g.u[i] + g.v - value)))
                if abs(g.u[i] + g.v[j] - value) <= 0.5 * _local_h(g.v, j):
                    rows.append((g.u[i], g.v[j], self.psi[i, j], phi[i, j]))
        else:
            raise ConfigError(f"unknown slice line {line!r}")
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u", "v", "psi", "phi"])
            w.writerows(rows)
        return len(rows)


def _local_h(x, j):
    lo = x[j] - x[j - 1] if j > 0 else x[1] - x[0]
    hi = x[j + 1] - x[j] if j + 1 < x.size else lo
    return max(lo, hi)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    return str(o)


# ---------------------------------------------------------------------------
# marching


def march(grid: Grid, split: SplitRHS, left: np.ndarray, bottom: np.ndarray,
          tol: float = 1e-12, max_iter: int = 20, blowup: float = 1e6) -> tuple[np.ndarray, dict]:
    """Fill ``psi`` from the left column (``u = u[0]``) and bottom row (``v = v[0]``)."""
    u, v = grid.u, grid.v
    nu, nv = u.size, v.size
    if left.shape != (nv,) or bottom.shape != (nu,):
        raise ConfigError("boundary arrays do not match the grid")
    if abs(left[0] - bottom[0]) > 1e-10 * max(1.0, abs(left[0])):
        raise ConfigError(f"boundary data disagree at the corner: {left[0]!r} vs {bottom[0]!r}")
    psi = np.full((nu, nv), np.nan)
    psi[0, :] = left
    psi[:, 0] = bottom
    if not (np.all(np.isfinite(left)) and np.all(np.isfinite(bottom))):
        raise BlowUpError("non-finite boundary data", last_finite=psi, location=None)

    spec = split.spec
    k = spec.k
    du = np.diff(u)
    dv = np.diff(v)
    uc = 0.5 * (u[1:] + u[:-1])
    vc = 0.5 * (v[1:] + v[:-1])
    Uc, Vc = np.meshgrid(uc, vc, indexing="ij")
    Rc = Vc - Uc
    if np.any(Rc <= 0):
        raise ConfigError("grid reaches r <= 0")
    area = du[:, None] * dv[None, :]
    rk = Rc**k
    phi0 = None if split.trivial_background else split.background.value(Uc, Vc)
    Vpot = split.V(Uc, Vc, phi0)
    fc = split.f(Uc, Vc)
    cd_r2 = spec.c_d / Rc**2
    deriv = split.uses_derivatives
    linear = spec.family == "LINEAR"
    stats = {"iterations_max": 0, "stiffness": float(np.max(du[:, None] / Rc[:, :1]))}

    for s in range(nu + nv - 3):
        i = np.arange(max(0, s - (nv - 2)), min(s, nu - 2) + 1)
        j = s - i
        pS = psi[i, j]
        pE = psi[i, j + 1]
        pW = psi[i + 1, j]
        base = pE + pW - pS
        A = area[i, j]
        r_k = rk[i, j]
        uu, vv = Uc[i, j], Vc[i, j]
        p0 = None if phi0 is None else phi0[i, j]
        lin_part = cd_r2[i, j] + Vpot[i, j]
        f_part = r_k * fc[i, j]

        def source(pN):
            pc = 0.25 * (pS + pE + pW + pN)
            out = lin_part * pc + f_part
            if linear:
                return out
            phic = pc / r_k
            if deriv:
                Rl = Rc[i, j]
                pu = (pW - pS + pN - pE) / (2.0 * du[i])
                pv = (pE - pS + pN - pW) / (2.0 * dv[j])
                phu = (pu + k * pc / Rl) / r_k
                phv = (pv - k * pc / Rl) / r_k
                return out + r_k * split.N(uu, vv, phic, phu, phv)
            return out + r_k * split.N(uu, vv, phic, phi0=p0)

        it = 1
        if linear:
            q = pS + pE + pW
            pN = (base - A * (0.25 * lin_part * q + f_part)) / (1.0 + 0.25 * A * lin_part)
        else:
            pN = base - A * source(base)
            while True:
                new = base - A * source(pN)
                err = np.abs(new - pN)
                pN = new
                it += 1
                if not np.all(np.isfinite(pN)):
                    break
                if np.all(err <= tol * (1.0 + np.abs(pN))):
                    break
                if it > max_iter:
                    bad = int(np.argmax(err / (1.0 + np.abs(pN))))
                    cell = (int(i[bad]), int(j[bad]))
                    raise StepError(
                        f"corner iteration did not contract at cell {cell} "
                        f"(u={uu[bad]:.6g}, v={vv[bad]:.6g}, update {err[bad]:.3e})",
                        cell=cell,
                    )
        stats["iterations_max"] = max(stats["iterations_max"], it)
        if not np.all(np.isfinite(pN)) or np.any(np.abs(pN / rk[i, j]) > blowup):
            bad = np.flatnonzero(~np.isfinite(pN) | (np.abs(pN / rk[i, j]) > blowup))[0]
            loc = (float(u[i[bad] + 1]), float(v[j[bad] + 1]))
            raise BlowUpError(
                f"field left the finite range near (u, v) = {loc}",
                last_finite=psi.copy(), location=loc,
            )
        psi[i + 1, j + 1] = pN
    return psi, stats


def nodal_derivatives(grid: Grid, psi: np.ndarray):
    """``psi_u``, ``psi_v`` and ``psi_uv`` from three-point nonuniform stencils."""
    pu = diff_axis(psi, grid.u, 0)
    pv = diff_axis(psi, grid.v, 1)
    puv = diff_axis(pv, grid.u, 0)
    return pu, pv, puv


def equation_residual(field: FieldGrid, split: SplitRHS, interior: bool = True) -> np.ndarray:
    """Pointwise ``-psi_uv - S(psi)`` on the nodes, nine-point nodal stencil.

    The marching update only couples the four corners of a cell; this uses
    centred differences on both axes at every node and is therefore an
    independent check of the solution.
    """
    g = field.grid
    psi = field.psi
    pu, pv, puv = nodal_derivatives(g, psi)
    U, V, R = g.U, g.V, g.R
    k = split.spec.k
    rk = R**k
    phi = psi / rk
    phi0 = None if split.trivial_background else split.background.value(U, V)
    if split.uses_derivatives:
        phu = (pu + k * psi / R) / rk
        phv = (pv - k * psi / R) / rk
        rhs = split.rhs(U, V, phi, phu, phv)
    else:
        rhs = split.rhs(U, V, phi, phi0=phi0)
    res = -puv - split.spec.c_d * psi / R**2 - rk * rhs
    if interior:
        return res[1:-1, 1:-1]
    return res


def _summarize(field, split, t0, stats, sources):
    res = equation_residual(field, split)
    rep = SolveReport(
        residual_max=float(np.max(np.abs(res))) if res.size else 0.0,
        residual_rms=float(np.sqrt(np.mean(res**2))) if res.size else 0.0,
        sources=sources,
        wall_time=time.perf_counter() - t0,
        iterations_max=int(stats["iterations_max"]),
        stiffness=float(stats["stiffness"]),
    )
    if rep.stiffness > 0.1:
        log.warning("u-spacing exceeds r/10 near the first v-line (ratio %.3g)", rep.stiffness)
    return rep


def evolve_boundary(grid: Grid, split: SplitRHS, left: Callable, bottom: Callable,
                    meta: dict | None = None, **kw) -> FieldGrid:
    """March with ``psi`` prescribed by callables on the left column and bottom row."""
    t0 = time.perf_counter()
    left_vals = np.asarray(left(grid.v), dtype=float)
    bottom_vals = np.asarray(bottom(grid.u), dtype=float)
    psi, stats = march(grid, split, left_vals, bottom_vals, **kw)
    fg = FieldGrid(grid=grid, psi=psi, meta=dict(meta or {}), background=split.background)
    fg.report = _summarize(fg, split, t0, stats, {"left": "prescribed", "bottom": "prescribed"})
    return fg


def evolve(data: CharacteristicData, spec, dom: DomainSpec, peel_order: int | None = None,
           split: SplitRHS | None = None, **kw) -> FieldGrid:
    """Solve the characteristic problem on the exterior rectangle.

    The left edge takes ``psi`` from the left-edge trace; the first v-line
    takes it from the peeling approximant of order ``peel_order`` (default:
    all available jets).
    """
    if isinstance(spec, SplitRHS):
        split = spec
        spec = split.spec
    split = split or nonlinearity_split(spec, data.background)
    if dom.d != spec.d or data.d != spec.d:
        raise ConfigError("dimension mismatch between equation, data and domain")
    if abs(dom.u_left - data.u_left) > 1e-14:
        raise ConfigError("data and domain disagree on u_left")
    if not data.has_jets:
        raise OrderError("data carries no transversal jets; call build_transversal_jet")
    l = data.m if peel_order is None else peel_order
    approx = peel(data, l)
    if dom.v_min > approx.cut_lo * dom.u_eps:
        raise ConfigError("first v-line reaches the peeling cutoff; lower v_min or raise u_eps")
    grid = build_grid(dom)
    t0 = time.perf_counter()
    left = data.psi_Cbar(grid.v)
    bottom = approx.psi(grid.u, np.full_like(grid.u, dom.v_min))
    left[0] = bottom[0]
    psi, stats = march(grid, split, left, bottom, **kw)
    meta = {
        "family": spec.family, "d": spec.d, "p": spec.p, "K": spec.K,
        "case_id": data.case_id, "a_zero": data.a_zero, "peel_order": l,
        "Nu": dom.Nu, "Nv": dom.Nv, "stretching": dom.stretching,
        "u_left": dom.u_left, "u_eps": dom.u_eps, "v_min": dom.v_min, "v_max": dom.v_max,
    }
    fg = FieldGrid(grid=grid, psi=psi, meta=meta, background=split.background)
    fg.report = _summarize(fg, split, t0, stats, {"left": "trace_Cbar", "bottom": f"peel(l={l})"})
    return fg


# ---------------------------------------------------------------------------
# manufactured solutions


@dataclass
class Manufactured:
    """Exact ``psi*`` with the forcing that makes it a solution."""

    psi: Callable
    psi_u: Callable
    psi_v: Callable
    psi_uv: Callable
    split: SplitRHS

    def forcing(self, u, v):
        s = self.split
        k = s.spec.k
        r = v - u
        ps = self.psi(u, v)
        rk = r**k
        phi = ps / rk
        phu = (self.psi_u(u, v) + k * ps / r) / rk
        phv = (self.psi_v(u, v) - k * ps / r) / rk
        lhs = (-self.psi_uv(u, v) - s.spec.c_d * ps / r**2) / rk
        base = s.with_forcing(None)
        return lhs - base.N(u, v, phi, phu, phv) - base.V(u, v) * phi

    def forced_split(self) -> SplitRHS:
        return self.split.with_forcing(self.forcing)


def default_manufactured(split: SplitRHS, amplitude: float = 0.3) -> Manufactured:
    """Smooth trigonometric ``psi*`` used for order checks."""
    A = amplitude

    def psi(u, v):
        return A * np.sin(2.0 * u + 1.0) * np.cos(1.5 * v) + A * 0.5 * u * v

    def psi_u(u, v):
        return 2.0 * A * np.cos(2.0 * u + 1.0) * np.cos(1.5 * v) + A * 0.5 * v

    def psi_v(u, v):
        return -1.5 * A * np.sin(2.0 * u + 1.0) * np.sin(1.5 * v) + A * 0.5 * u

    def psi_uv(u, v):
        return -3.0 * A * np.cos(2.0 * u + 1.0) * np.sin(1.5 * v) + A * 0.5

    return Manufactured(psi, psi_u, psi_v, psi_uv, split)


def run_manufactured(spec: EquationSpec, n: int, box=(-1.0, -0.5, 0.25, 0.75),
                     mms: Manufactured | None = None) -> tuple[FieldGrid, float]:
    """Uniform-grid manufactured run; returns the field and its max error."""
    split = nonlinearity_split(spec)
    mms = mms or default_manufactured(split)
    u0, u1, v0, v1 = box
    grid = Grid(u=np.linspace(u0, u1, n), v=np.linspace(v0, v1, n), d=spec.d)
    fs = mms.forced_split()
    fg = evolve_boundary(grid, fs, lambda v: mms.psi(u0, v), lambda u: mms.psi(u, v0),
                         meta={"family": spec.family, "d": spec.d, "case_id": "manufactured", "N": n})
    err = float(np.max(np.abs(fg.psi - mms.psi(grid.U, grid.V))))
    return fg, err


# ---------------------------------------------------------------------------
# convergence


@dataclass
class ObservableOrder:
    name: str
    values: list
    errors: list
    orders: list
    order: float | None
    verdict: str


@dataclass
class ConvergenceReport:
    resolutions: list
    observables: dict

    def order(self, name: str) -> float | None:
        return self.observables[name].order

    def as_dict(self):
        return {"resolutions": self.resolutions,
                "observables": {k: asdict(v) for k, v in self.observables.items()}}


def _orders(errors, ratios):
    errs = np.asarray(errors, dtype=float)
    if np.all(errs == 0):
        return [], None, "exact"
    if np.any(errs == 0) or np.any(~np.isfinite(errs)):
        return [], None, "inconclusive"
    if np.any(np.diff(errs) >= 0):
        return [], None, "inconclusive"
    orders = [float(math.log(errs[n] / errs[n + 1]) / math.log(ratios[n])) for n in range(errs.size - 1)]
    return orders, orders[-1], "converging"


def convergence_study(make_field: Callable[[int], FieldGrid], resolutions: Sequence[int],
                      observables: dict[str, Callable[[FieldGrid], float]],
                      exact: dict[str, float] | None = None) -> ConvergenceReport:
    """Order estimates per observable across refinements.

    ``resolutions`` are line counts per axis; with an ``exact`` value the
    error is measured directly, otherwise Richardson differences of
    consecutive values are used (which needs one more resolution).
    """
    resolutions = list(resolutions)
    if len(resolutions) < 3:
        raise ConfigError("convergence study needs at least three resolutions")
    fields = [make_field(n) for n in resolutions]
    hr = [(resolutions[n + 1] - 1) / (resolutions[n] - 1) for n in range(len(resolutions) - 1)]
    out = {}
    for name, fn in observables.items():
        vals = [float(fn(f)) for f in fields]
        if exact is not None and name in exact:
            errs = [abs(x - exact[name]) for x in vals]
            ratios = [hr[n] for n in range(len(resolutions) - 1)]
        else:
            errs = [abs(vals[n] - vals[n + 1]) for n in range(len(vals) - 1)]
            ratios = [hr[n + 1] for n in range(len(resolutions) - 2)]
        orders, order, verdict = _orders(errs, ratios)
        if verdict == "converging" and len(orders) > 1 and abs(orders[-1] - orders[-2]) > 0.5:
            verdict = "inconclusive"
        out[name] = ObservableOrder(name, vals, errs, orders, order, verdict)
    return ConvergenceReport(resolutions, out)
