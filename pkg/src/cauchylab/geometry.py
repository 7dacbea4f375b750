"""Double-null geometry of the exterior region.

Coordinates are ``u = (t - r)/2`` and ``v = (t + r)/2`` so that ``r = v - u``.
The exterior rectangle is ``u in [u_left, -u_eps]``, ``v in [v_min, v_max]``;
the backward cone ``v = 0`` and the Cauchy horizon ``u = 0`` are never
evolved nodes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import BoundaryError, ConfigError, DomainError

VECTOR_FIELDS = ("u_du", "v_dv", "rotation", "identity", "edge_angular")
_VF_ALIASES = {
    "u∂u": "u_du",
    "v∂v": "v_dv",
    "1": "identity",
    "edge-angular": "edge_angular",
}


@dataclass(frozen=True)
class DoubleNullPoint:
    u: float
    v: float

    @property
    def r(self) -> float:
        return self.v - self.u

    @property
    def t(self) -> float:
        return self.u + self.v


def _uv(p):
    if isinstance(p, DoubleNullPoint):
        return p.u, p.v
    u, v = p
    return u, v


def rho_eval(p):
    """Boundary-defining functions ``(rho_minus, rho_zero, rho_plus)``.

    ``rho_minus = v/r`` vanishes on the backward cone, ``rho_zero = r`` on the
    axis and ``rho_plus = -u/r`` on the Cauchy horizon.  Works elementwise on
    arrays.
    """
    u, v = _uv(p)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    r = v - u
    if np.any(r <= 0):
        raise DomainError("degenerate point: r = v - u must be positive")
    out = (v / r, r, -u / r)
    if out[0].ndim == 0:
        return tuple(float(x) for x in out)
    return out


def rho_zero_global(p):
    """Global-chart axis weight ``-r/(u v)``; blows up at both cones."""
    u, v = _uv(p)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u * v == 0):
        raise BoundaryError("global weight undefined on u = 0 or v = 0")
    out = -(v - u) / (u * v)
    return float(out) if out.ndim == 0 else out


def compactify(p):
    """Map ``(u, v) -> (-1/v, -1/u)``.

    Sends the singular corner to spacelike infinity, the backward cone to past
    null infinity and the Cauchy horizon to future null infinity.
    """
    u, v = _uv(p)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u == 0) or np.any(v == 0):
        raise BoundaryError("compactify: image of u = 0 or v = 0 is at infinity")
    if np.any(u > 0) or np.any(v < 0):
        raise DomainError("compactify requires u < 0 < v")
    U, V = -1.0 / v, -1.0 / u
    if U.ndim == 0:
        return DoubleNullPoint(float(U), float(V))
    return U, V


def decompactify(p):
    """Inverse of :func:`compactify`."""
    U, V = _uv(p)
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    if np.any(U == 0) or np.any(V == 0):
        raise BoundaryError("decompactify: zero global coordinate")
    u, v = -1.0 / V, -1.0 / U
    if u.ndim == 0:
        return DoubleNullPoint(float(u), float(v))
    return u, v


@dataclass(frozen=True)
class WeightVector:
    """Decay exponents toward the backward cone, the axis and the horizon."""

    a_minus: float
    a_zero: float
    a_plus: float

    def __post_init__(self):
        for name in ("a_minus", "a_zero", "a_plus"):
            val = float(getattr(self, name))
            if not np.isfinite(val):
                raise ConfigError(f"{name} must be finite")
            object.__setattr__(self, name, val)

    def weight(self, u, v):
        """``rho_-^{a_minus} rho_0^{a_zero} rho_+^{a_plus}`` at (u, v)."""
        rm, r0, rp = rho_eval((u, v))
        return np.power(rm, self.a_minus) * np.power(r0, self.a_zero) * np.power(rp, self.a_plus)

    def as_dict(self):
        return {"a_minus": self.a_minus, "a_zero": self.a_zero, "a_plus": self.a_plus}


@dataclass(frozen=True)
class DomainSpec:
    d: int = 3
    u_left: float = -1.0
    v_max: float = 0.5
    v_min: float = 1e-6
    Nu: int = 256
    Nv: int = 256
    stretching: str = "geometric"
    u_eps: float | None = None

    def __post_init__(self):
        if self.u_eps is None:
            object.__setattr__(self, "u_eps", 1e-4 * abs(self.u_left))
        if self.d < 2:
            raise ConfigError("spatial dimension must be >= 2")
        if not (self.u_left < 0 < self.v_min < self.v_max):
            raise ConfigError("need u_left < 0 < v_min < v_max")
        if not (0 < self.u_eps < abs(self.u_left)):
            raise ConfigError("need 0 < u_eps < |u_left|")
        if self.Nu < 2 or self.Nv < 2:
            raise ConfigError("Nu, Nv must be >= 2")
        if self.stretching not in ("uniform", "geometric"):
            raise ConfigError(f"unknown stretching {self.stretching!r}")

    @property
    def u_right(self) -> float:
        return -self.u_eps

    def refined(self, factor: int = 2) -> "DomainSpec":
        """Same domain with ``factor`` times as many cells per axis."""
        return DomainSpec(
            d=self.d, u_left=self.u_left, v_max=self.v_max, v_min=self.v_min,
            Nu=(self.Nu - 1) * factor + 1, Nv=(self.Nv - 1) * factor + 1,
            stretching=self.stretching, u_eps=self.u_eps,
        )


def _line(a: float, b: float, n: int, law: str) -> np.ndarray:
    if law == "uniform":
        x = np.linspace(a, b, n)
    else:
        # constant ratio of adjacent spacings: log-uniform in |x|
        x = np.sign(a) * np.geomspace(abs(a), abs(b), n)
    x[0], x[-1] = a, b
    return x


@dataclass(frozen=True)
class Grid:
    u: np.ndarray
    v: np.ndarray
    d: int = 3
    stretching: str = "uniform"
    spec: DomainSpec | None = field(default=None, compare=False)

    @property
    def shape(self):
        return (self.u.size, self.v.size)

    @property
    def U(self):
        return self.u[:, None] * np.ones_like(self.v)[None, :]

    @property
    def V(self):
        return np.ones_like(self.u)[:, None] * self.v[None, :]

    @property
    def R(self):
        return self.v[None, :] - self.u[:, None]

    def spacing_ratios(self, axis: str = "v") -> np.ndarray:
        x = self.v if axis == "v" else np.abs(self.u)
        h = np.abs(np.diff(x))
        return h[1:] / h[:-1]

    def cell_measures(self) -> np.ndarray:
        """Exact ``mu_b = (du/u)(dv/v)`` mass of every cell, shape (Nu-1, Nv-1)."""
        lu = np.abs(np.diff(np.log(np.abs(self.u))))
        lv = np.abs(np.diff(np.log(self.v)))
        return lu[:, None] * lv[None, :]

    def mu_b_volume(self) -> float:
        return float(self.cell_measures().sum())

    def nearest(self, u: float, v: float) -> tuple[int, int]:
        return int(np.argmin(np.abs(self.u - u))), int(np.argmin(np.abs(self.v - v)))

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["u-lines", *map(repr, self.u.tolist())])
            w.writerow(["v-lines", *map(repr, self.v.tolist())])

    @classmethod
    def from_csv(cls, path, d: int = 3) -> "Grid":
        rows = {}
        with Path(path).open() as fh:
            for row in csv.reader(fh):
                rows[row[0]] = np.array([float(x) for x in row[1:]])
        return cls(u=rows["u-lines"], v=rows["v-lines"], d=d)


def build_grid(spec: DomainSpec) -> Grid:
    """Monotone u- and v-lines covering ``[u_left, -u_eps] x [v_min, v_max]``.

    ``geometric`` stretching places the lines log-uniformly in ``|u|`` and in
    ``v``, so the spacing shrinks geometrically toward ``u = 0`` and toward
    ``v = v_min`` with one constant ratio per axis.
    """
    if spec.stretching == "geometric" and spec.v_min <= 0:
        raise ConfigError("geometric stretching needs v_min > 0")
    u = _line(spec.u_left, spec.u_right, spec.Nu, spec.stretching)
    v = _line(spec.v_min, spec.v_max, spec.Nv, spec.stretching)
    if np.any(np.diff(u) <= 0) or np.any(np.diff(v) <= 0):
        raise ConfigError("grid lines are not strictly increasing")
    return Grid(u=u, v=v, d=spec.d, stretching=spec.stretching, spec=spec)


# finite differences -------------------------------------------------------

def _deriv_weights(x: np.ndarray, i: int) -> tuple[np.ndarray, np.ndarray]:
    """Indices and weights of the 3-point first-derivative stencil at node i."""
    n = x.size
    if n < 3:
        raise BoundaryError("need at least three lines for a derivative")
    if i == 0:
        idx = np.array([0, 1, 2])
    elif i == n - 1:
        idx = np.array([n - 3, n - 2, n - 1])
    else:
        idx = np.array([i - 1, i, i + 1])
    x0, x1, x2 = x[idx]
    xi = x[i]
    w0 = ((xi - x1) + (xi - x2)) / ((x0 - x1) * (x0 - x2))
    w1 = ((xi - x0) + (xi - x2)) / ((x1 - x0) * (x1 - x2))
    w2 = ((xi - x0) + (xi - x1)) / ((x2 - x0) * (x2 - x1))
    return idx, np.array([w0, w1, w2])


def diff_axis(f: np.ndarray, x: np.ndarray, axis: int) -> np.ndarray:
    """Second-order first derivative along ``axis`` on a nonuniform line.

    Interior nodes use the centered three-point Lagrange stencil, edges the
    one-sided three-point stencil.
    """
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    n = x.size
    if n < 3:
        raise BoundaryError("need at least three lines for a derivative")
    h1 = x[1:-1] - x[:-2]
    h2 = x[2:] - x[1:-1]
    shape = (-1,) + (1,) * (f.ndim - 1)
    a = (-h2 / (h1 * (h1 + h2))).reshape(shape)
    b = ((h2 - h1) / (h1 * h2)).reshape(shape)
    c = (h1 / (h2 * (h1 + h2))).reshape(shape)
    out = np.empty_like(f)
    out[1:-1] = a * f[:-2] + b * f[1:-1] + c * f[2:]
    for i in (0, n - 1):
        idx, w = _deriv_weights(x, i)
        out[i] = w[0] * f[idx[0]] + w[1] * f[idx[1]] + w[2] * f[idx[2]]
    return np.moveaxis(out, 0, axis)


def _tag(tag: str) -> str:
    tag = _VF_ALIASES.get(tag, tag)
    if tag not in VECTOR_FIELDS:
        raise ValueError(f"unknown vector field {tag!r}")
    return tag


def vf_array(tag: str, values: np.ndarray, grid: Grid) -> np.ndarray:
    """Apply a radial b-vector field to a whole nodal array."""
    tag = _tag(tag)
    values = np.asarray(values, dtype=float)
    if tag == "identity":
        return values.copy()
    if tag in ("rotation", "edge_angular"):
        return np.zeros_like(values)
    if tag == "u_du":
        return grid.u[:, None] * diff_axis(values, grid.u, 0)
    return grid.v[None, :] * diff_axis(values, grid.v, 1)


def apply_vf(tag: str, field, p: tuple[int, int], grid: Grid | None = None) -> float:
    """Apply a vector field at a single node using a centered stencil.

    ``field`` is a FieldGrid or a nodal array (then ``grid`` is required).
    Raises BoundaryError when the centered stencil would leave the grid.
    """
    tag = _tag(tag)
    if grid is None:
        grid = field.grid
        values = field.psi if getattr(field, "use_psi", False) else field.phi
    else:
        values = np.asarray(field, dtype=float)
    i, j = p
    nu, nv = values.shape
    if not (0 <= i < nu and 0 <= j < nv):
        raise BoundaryError(f"node {p} outside grid")
    if tag == "identity":
        return float(values[i, j])
    if tag in ("rotation", "edge_angular"):
        return 0.0
    if tag == "u_du":
        if i == 0 or i == nu - 1:
            raise BoundaryError(f"u-stencil at {p} exits the grid")
        idx, w = _deriv_weights(grid.u, i)
        return float(grid.u[i] * (w @ values[idx, j]))
    if j == 0 or j == nv - 1:
        raise BoundaryError(f"v-stencil at {p} exits the grid")
    idx, w = _deriv_weights(grid.v, j)
    return float(grid.v[j] * (w @ values[i, idx]))
