import math

import numpy as np
import pytest

from cauchylab.analysis import fit_rate
from cauchylab.chardata import (build_transversal_jet, free_wave_data, peel, perturb_trace, regular_corner_coeffs,
                                smooth_step)
from cauchylab.errors import ConfigError, OrderError
from cauchylab.models import EquationSpec, nonlinearity_split
from cauchylab.profiles import Profile

F = lambda u: u**3 + 0.5 * u**2 - u  # noqa: E731
G = lambda v: 0.3 * v**2 + v**3  # noqa: E731
G_DERIVS = [0.0, 0.0, 0.6, 6.0]


def _power(fam="WMS", d=3, a=0.3, m=3, **kw):
    spec = EquationSpec(fam, d, **kw)
    sp = nonlinearity_split(spec)
    data = perturb_trace(Profile.zero(d), "power_tail", a=a, m=m, d=d, split=sp)
    return build_transversal_jet(data, sp, m, conormal_cap=False), sp


def test_zero_traces_give_zero_jets():
    spec = EquationSpec("NW", 3, p=5)
    data = build_transversal_jet(perturb_trace(Profile.zero(3), "none", m=3), spec, 3)
    u = -np.geomspace(1e-3, 1.0, 30)
    for k in range(4):
        assert np.all(data.jet(k, u) == 0)


def test_free_wave_first_jet_closed_form():
    data = build_transversal_jet(free_wave_data(F, G, G_DERIVS), EquationSpec("LINEAR", 3), 3)
    u = -np.linspace(0.05, 1.0, 40)
    r = -u
    exact = G_DERIVS[1] / r - (F(u) + G(0.0)) / r**2
    assert np.max(np.abs(data.jet(1, u) - exact)) < 1e-10


def test_power_trace_and_corner():
    data = perturb_trace(Profile.zero(3), "power_tail", a=0.25, m=2)
    r = np.geomspace(1e-4, 1.0, 20)
    assert np.allclose(data.trace_C(-r), r**0.25, rtol=1e-14)
    assert data.trace_Cbar(0.0) == pytest.approx(data.trace_C(-1.0), abs=1e-12)


def test_jet_one_scaling_near_corner():
    data, _ = _power(m=2)
    r = np.geomspace(1e-3, 10**-1.5, 60)
    assert fit_rate(r, data.jet(1, -r), "C").exponent == pytest.approx(0.3 - 1.0, abs=0.05)


def test_type_ii_trace_exponent():
    data = perturb_trace(Profile.type_ii_tail(2.0, d=2), "profile", d=2, m=2)
    r = np.geomspace(1e-4, 1.0, 300)
    fit = fit_rate(r, data.trace_C(-r) - math.pi, "C")
    assert fit.exponent == pytest.approx(1.0, abs=0.05)


def test_type_ii_amplitude_scales_tail():
    a = perturb_trace(Profile.type_ii_tail(2.0, d=2), "profile", d=2, m=2)
    b = perturb_trace(Profile.type_ii_tail(2.0, d=2), "profile", d=2, m=2, amplitude=2.0)
    u = -np.geomspace(1e-3, 1.0, 10)
    assert np.allclose(b.tail_C(u), 2.0 * a.tail_C(u))


def test_conormal_cap_recorded():
    sp = nonlinearity_split(EquationSpec("NW", 3, p=5))
    data = perturb_trace(Profile.zero(3), "power_tail", a=0.25, m=3, split=sp)
    out = build_transversal_jet(data, sp, 3)
    assert out.m == 1 and out.meta["jet_cap"] == 1


def test_perturb_trace_errors():
    with pytest.raises(ConfigError):
        perturb_trace(Profile.zero(3), "power_tail")
    with pytest.raises(ConfigError):
        perturb_trace(Profile.zero(3), "sawtooth", a=0.1)
    with pytest.raises(ConfigError):
        perturb_trace(Profile.zero(3), "profile")


def test_regular_corner_leading_coefficient():
    g = regular_corner_coeffs(0.7, 0.0, 3, amplitude=2.5)
    assert g[0] == pytest.approx(2.5)


def test_smooth_step_plateaus():
    s = np.linspace(0, 1, 101)
    y = smooth_step(s, 0.25, 0.5)
    assert np.all(y[s <= 0.25] == 1.0) and np.all(y[s >= 0.5] == 0.0)


def test_peel_zero_order_is_cut_off_trace():
    data, _ = _power(m=1)
    ap = peel(data, 0)
    u = -np.linspace(0.1, 1.0, 10)
    assert np.allclose(ap(u, 0.0 * u), data.tail_C(u), rtol=1e-12)
    # support stays inside v <= |u|/2
    assert np.all(ap(u, 0.6 * np.abs(u)) == 0)
    assert np.all(ap(u, 2.0 * np.abs(u)) == 0)


def test_peel_order_checks():
    data, _ = _power(m=2)
    with pytest.raises(OrderError):
        peel(data, 3)
    with pytest.raises(OrderError):
        peel(data, -1)


def test_peel_two_residual_exponent():
    data, sp = _power(m=3)
    ap = peel(data, 2)
    u0 = -0.5
    rm = np.geomspace(1e-3, 10**-1.5, 60)
    v = rm * abs(u0) / (1 - rm)
    res = ap.residual(np.full_like(v, u0), v, sp)
    assert fit_rate(rm, res, "C").exponent >= 1.8
