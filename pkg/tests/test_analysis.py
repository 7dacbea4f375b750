import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cauchylab.analysis import (INTEGER_VERDICT, TestFunction, ch_trace, default_battery, extend_across_ch,
                                fit_rate, ratefit_csv, sharp_regularity_probe, subtract_leading, weak_residual,
                                weighted_norm, write_dat)
from cauchylab.errors import ConfigError, DataError, OrderError, UnsupportedError
from cauchylab.geometry import DomainSpec, Grid, WeightVector, build_grid
from cauchylab.models import EquationSpec, nonlinearity_split
from cauchylab.solver import FieldGrid, evolve_boundary

F = lambda u: u**3 + 0.5 * u**2 - u  # noqa: E731
G = lambda v: 0.3 * v**2 + v**3  # noqa: E731
LIN = nonlinearity_split(EquationSpec("LINEAR", 3))


def _grid(N=257, v_max=0.5, u_eps=1e-5, v_min=1e-6, d=3):
    return build_grid(DomainSpec(d=d, Nu=N, Nv=N, v_max=v_max, u_eps=u_eps, v_min=v_min))


def _free(N=257):
    g = _grid(N)
    return evolve_boundary(g, LIN, lambda v: F(g.u[0]) + G(v), lambda u: F(u) + G(g.v[0]))


# -- norms --------------------------------------------------------------

def test_norm_of_constant():
    g = _grid(33)
    fg = FieldGrid(g, np.zeros(g.shape))
    rep = weighted_norm(fg, 1, WeightVector(0, 0, 0), values=np.full(g.shape, -2.5))
    assert rep.value == pytest.approx(2.5)
    assert rep.per_word["u"] < 1e-12 and rep.per_word["v"] < 1e-12


@given(st.floats(-5, 5))
def test_norm_homogeneous(lam):
    g = Grid(u=np.linspace(-1, -0.2, 17), v=np.linspace(0.1, 0.6, 17))
    f = np.sin(3 * g.U) * g.V
    fg = FieldGrid(g, np.zeros(g.shape))
    a = WeightVector(0.2, 0.1, -0.1)
    n1 = weighted_norm(fg, 1, a, values=f).value
    n2 = weighted_norm(fg, 1, a, values=lam * f).value
    assert n2 == pytest.approx(abs(lam) * n1, rel=1e-12, abs=1e-300)


def test_norm_power_law_calibration():
    vals = {0.5: [], 0.6: []}
    for u_eps in (1e-3, 1e-5, 1e-7):
        g = _grid(65, u_eps=u_eps)
        rp = -g.U / g.R
        fg = FieldGrid(g, np.zeros(g.shape))
        for ap in vals:
            vals[ap].append(weighted_norm(fg, 1, WeightVector(0, 0, ap), values=rp**0.5).value)
    assert max(vals[0.5]) < 2.0 and np.ptp(vals[0.5]) < 0.1
    assert vals[0.6][0] < vals[0.6][1] < vals[0.6][2]


def test_norm_order_error():
    g = Grid(u=np.linspace(-1, -0.5, 4), v=np.linspace(0.1, 0.5, 4))
    with pytest.raises(OrderError):
        weighted_norm(FieldGrid(g, np.zeros(g.shape)), 2, WeightVector(0, 0, 0))


def test_norm_l2_reported():
    fg = _free(33)
    rep = weighted_norm(fg, 0, WeightVector(0, 0, 0), l2=True)
    assert rep.l2 is not None and rep.l2 > 0


# -- rate fits ----------------------------------------------------------

@given(st.floats(-1.0, 2.0), st.floats(0.1, 10.0))
def test_fit_recovers_power(a, c):
    x = np.geomspace(1e-4, 1.0, 200)
    fit = fit_rate(x, c * x**a)
    assert fit.exponent == pytest.approx(a, abs=1e-9)


def test_fit_sqrt_rho_plus():
    x = np.geomspace(1e-4, 1.0, 300)
    assert fit_rate(x, x**0.5).agrees(0.5, 0.02)


def test_fit_dominant_term():
    x = np.geomspace(1e-6, 1.0, 400)
    fit = fit_rate(x, 2.0 * x**0.3 + 5.0 * x**0.8, window=(1e-6, 10**-4.5))
    assert fit.exponent == pytest.approx(0.3, abs=0.05)


def test_fit_rejections():
    x = np.geomspace(1e-4, 1.0, 200)
    with pytest.raises(ConfigError):
        fit_rate(x, x, window=(1e-3, 1e-2))
    with pytest.raises(ConfigError):
        fit_rate(x, x, edge="axis")
    with pytest.raises(DataError):
        fit_rate(x, np.sin(40 * np.log(x)) * x)
    with pytest.raises(DataError):
        fit_rate(x[:20], x[:20])


# -- horizon trace -------------------------------------------------------

def test_trace_of_zero_field():
    g = _grid(33)
    tr = ch_trace(FieldGrid(g, np.zeros(g.shape)))
    assert np.all(tr.values == 0)


def test_free_wave_trace_and_error_bound():
    fg = _free(257)
    tr = ch_trace(fg)
    err = np.abs(tr.values - (F(0.0) + G(fg.grid.v)))
    assert err.max() < 1e-8
    assert np.all(err <= tr.error + 1e-12)
    assert tr.method == "aitken"


def test_trace_uniform_grid_quadratic():
    g = Grid(u=np.linspace(-1, -1e-4, 2001), v=np.linspace(0.2, 0.5, 5))
    fg = FieldGrid(g, F(g.U) + G(g.V))
    tr = ch_trace(fg)
    assert tr.method == "quadratic"
    assert np.max(np.abs(tr.values - F(0) - G(g.v))) < 1e-8


def test_trace_needs_horizon_proximity():
    g = _grid(33, u_eps=1e-2)
    with pytest.raises(ConfigError):
        ch_trace(FieldGrid(g, np.zeros(g.shape)))


# -- sharp probe ---------------------------------------------------------

def _synthetic(terms):
    g = _grid(513, v_max=0.1, u_eps=1e-6, v_min=1e-8)
    au = np.abs(g.U)
    psi = np.cos(g.V) + 0.01 * g.U + sum(c * au**e for c, e in terms)
    return FieldGrid(g, psi)


def test_probe_two_term_sharp():
    pr = sharp_regularity_probe(_synthetic([(1.0, 1.25), (0.3, 1.5)]), 0.25, delta=0.25)
    assert pr.raw.exponent == pytest.approx(1.25, abs=0.1)
    assert pr.remainder.exponent > 1.35
    assert pr.verdict == "sharp"
    assert pr.coefficient == pytest.approx(1.0, rel=1e-2)


def test_probe_close_subleading_not_sharp():
    pr = sharp_regularity_probe(_synthetic([(1.0, 1.25), (0.5, 1.3)]), 0.25, delta=0.25)
    assert pr.verdict == "not sharp"


def test_probe_integer_and_dimension():
    fg = _synthetic([(1.0, 1.25)])
    assert sharp_regularity_probe(fg, 0.0).verdict == INTEGER_VERDICT
    g = _grid(33, d=4)
    with pytest.raises(UnsupportedError):
        sharp_regularity_probe(FieldGrid(g, np.zeros(g.shape)), 0.25)


def test_subtract_leading_exact():
    au = np.geomspace(1e-5, 1e-2, 100)
    D = 2.0 * au**1.25 - 0.7 * au + 0.1 * au**1.6
    rem, c1, cs, q = subtract_leading(au, D, 1.25)
    assert c1 == pytest.approx(2.0, rel=1e-2) and cs == pytest.approx(0.7, rel=1e-2)
    assert q == pytest.approx(1.6, abs=0.03)


# -- weak extension -----------------------------------------------------

def test_zero_field_zero_extension():
    g = _grid(129)
    ext = extend_across_ch(FieldGrid(g, np.zeros(g.shape)), "zero", split=LIN)
    assert np.all(ext.extension.psi == 0) and ext.max_residual == 0


def test_free_wave_extension_small_and_seeds_distinct():
    fg = _free(513)
    a = extend_across_ch(fg, "zero", split=LIN)
    b = extend_across_ch(fg, "quadratic", split=LIN)
    assert a.max_residual < 1e-6 and b.max_residual < 1e-6
    assert np.max(np.abs(a.extension.psi - b.extension.psi)) > 1e-6


def test_weak_residual_linear_in_test_function():
    fg = _free(257)
    ext = extend_across_ch(fg, "linear", split=LIN)
    u, v, psi = ext.glued.grid.u, ext.glued.grid.v, ext.glued.psi
    t = default_battery(ext.eps, v[0], v[-1])
    r1, _ = weak_residual([(u, v, psi)], LIN, t[:1])
    scaled = TestFunction(t[0].uc, t[0].wu, t[0].vc, t[0].wv)
    r2, _ = weak_residual([(u, v, 3.0 * psi)], LIN, [scaled])
    assert r2[0] == pytest.approx(3.0 * r1[0], rel=1e-9, abs=1e-15)


def test_test_functions_vanish_off_support():
    t = TestFunction(0.0, 0.1, 0.5, 0.1)
    assert t(np.array([0.2]), np.array([0.5]))[0] == 0
    assert t(np.array([0.0]), np.array([0.5]))[0] == pytest.approx(1.0)


def test_extension_strip_validation():
    fg = _free(65)
    with pytest.raises(ConfigError):
        extend_across_ch(fg, eps=10.0, split=LIN)
    with pytest.raises(ConfigError):
        extend_across_ch(fg)


# -- exporters ----------------------------------------------------------

def test_exporters(tmp_path):
    x = np.geomspace(1e-3, 1, 5)
    p = write_dat(tmp_path / "a.dat", {"x": x, "y": x**2})
    head = p.read_text().splitlines()[0]
    assert head.startswith("#") and head.split()[1:] == ["x", "y"]
    assert np.allclose(np.loadtxt(p), np.column_stack([x, x**2]))
    c = ratefit_csv(x, x**2, tmp_path / "a.csv")
    assert "log10" in c.read_text().splitlines()[0]
