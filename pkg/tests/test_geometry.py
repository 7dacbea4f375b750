import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cauchylab.errors import BoundaryError, ConfigError, DomainError
from cauchylab.geometry import (DomainSpec, DoubleNullPoint, Grid, WeightVector, apply_vf, build_grid,
                                compactify, decompactify, diff_axis, rho_eval, rho_zero_global, vf_array)

neg = st.floats(-50.0, -1e-3)
pos = st.floats(1e-3, 50.0)


def test_rho_at_unit_point():
    assert rho_eval((-1.0, 1.0)) == pytest.approx((0.5, 2.0, 0.5), abs=0)


def test_rho_on_backward_cone():
    assert rho_eval(DoubleNullPoint(-1.0, 0.0)) == (0.0, 1.0, 1.0)


def test_rho_rejects_degenerate_point():
    with pytest.raises(DomainError):
        rho_eval((0.5, 0.5))


@given(neg, pos)
def test_rho_minus_plus_sum_to_one(u, v):
    rm, r0, rp = rho_eval((u, v))
    assert rm + rp == pytest.approx(1.0, rel=1e-14)
    assert r0 == pytest.approx(v - u)


def test_global_weight_blows_up_on_cones():
    assert rho_zero_global((-1.0, 1.0)) == pytest.approx(2.0)
    with pytest.raises(BoundaryError):
        rho_zero_global((0.0, 1.0))


def test_compactify_fixed_point_and_sample():
    p = compactify((-1.0, 1.0))
    assert (p.u, p.v) == (-1.0, 1.0)
    q = compactify((-0.5, 0.25))
    assert (q.u, q.v) == pytest.approx((-4.0, 2.0))
    back = decompactify(q)
    assert (back.u, back.v) == pytest.approx((-0.5, 0.25))


def test_compactify_round_trip_many_points():
    rng = np.random.default_rng(7)
    u = -rng.uniform(1e-3, 10.0, 10_000)
    v = rng.uniform(1e-3, 10.0, 10_000)
    uu, vv = decompactify(compactify((u, v)))
    assert np.max(np.abs(uu - u) / np.abs(u)) < 1e-14
    assert np.max(np.abs(vv - v) / np.abs(v)) < 1e-14


def test_compactify_boundaries():
    with pytest.raises(BoundaryError):
        compactify((0.0, 1.0))
    with pytest.raises(DomainError):
        compactify((0.5, 1.0))


def test_weight_vector_rejects_nan():
    with pytest.raises(ConfigError):
        WeightVector(0.0, float("nan"), 0.0)


def test_weight_vector_product():
    w = WeightVector(1.0, 2.0, -1.0)
    assert w.weight(-1.0, 1.0) == pytest.approx(0.5 * 4.0 * 2.0)


def test_uniform_two_by_two_grid():
    g = build_grid(DomainSpec(u_left=-1.0, v_min=0.25, v_max=0.5, Nu=2, Nv=2, stretching="uniform", u_eps=0.5))
    assert g.u.tolist() == [-1.0, -0.5]
    assert g.v.tolist() == [0.25, 0.5]


def test_geometric_ratios_constant():
    g = build_grid(DomainSpec(Nu=101, Nv=101, v_min=1e-6, v_max=0.5))
    for axis in ("u", "v"):
        q = g.spacing_ratios(axis)
        assert np.ptp(q) < 1e-12 * q.mean() * 100


def test_mu_b_volume_closed_form():
    g = Grid(u=np.linspace(-1.0, -0.5, 65), v=np.linspace(0.25, 0.5, 65))
    assert g.mu_b_volume() == pytest.approx(math.log(2.0) ** 2, rel=1e-13)


@pytest.mark.parametrize("kw", [dict(v_min=0.0), dict(Nu=1), dict(stretching="cubic"), dict(u_eps=2.0)])
def test_domain_spec_validation(kw):
    with pytest.raises(ConfigError):
        DomainSpec(**kw)


def test_refined_keeps_endpoints():
    s = DomainSpec(Nu=9, Nv=9)
    r = s.refined()
    assert (r.Nu, r.Nv) == (17, 17)
    g, h = build_grid(s), build_grid(r)
    assert np.allclose(h.u[::2], g.u) and np.allclose(h.v[::2], g.v)


def test_grid_csv_round_trip(tmp_path):
    g = build_grid(DomainSpec(Nu=17, Nv=9))
    g.to_csv(tmp_path / "g.csv")
    h = Grid.from_csv(tmp_path / "g.csv")
    assert np.array_equal(g.u, h.u) and np.array_equal(g.v, h.v)


def test_diff_axis_exact_on_quadratics():
    x = np.sort(np.random.default_rng(1).uniform(0, 1, 30))
    f = 3 * x**2 - x + 2
    assert np.allclose(diff_axis(f, x, 0), 6 * x - 1, atol=1e-9)


def test_vector_fields():
    g = Grid(u=np.linspace(-1.0, -0.5, 129), v=np.linspace(0.25, 0.5, 129))
    f = g.U * g.V
    assert np.array_equal(vf_array("identity", f, g), f)
    assert np.allclose(vf_array("u∂u", f, g), f, atol=1e-12)
    assert np.allclose(vf_array("v_dv", f, g), f, atol=1e-12)
    c = np.full(g.shape, 3.0)
    for tag in ("u_du", "v_dv", "rotation", "edge_angular"):
        assert np.max(np.abs(vf_array(tag, c, g))) < 1e-12
    assert apply_vf("u_du", f, (5, 5), grid=g) == pytest.approx(f[5, 5], abs=1e-12)
    with pytest.raises(BoundaryError):
        apply_vf("u_du", f, (0, 5), grid=g)
    with pytest.raises(ValueError):
        vf_array("shear", f, g)
