import numpy as np
import pytest
from hypothesis import given, strategies as st

from cauchylab.currents import (Multiplier, audit, c_d, coercivity_check, current, default_multipliers,
                                divergence_residual, divergence_rhs, flux_balance,
                                residual_histogram, tensor_arrays, tensor_eval, window_residual)
from cauchylab.errors import BoundaryError, ConfigError, DomainError
from cauchylab.geometry import Grid
from cauchylab.solver import FieldGrid


def _smooth(N, d=3, free=False):
    g = Grid(u=np.linspace(-1, -0.3, N), v=np.linspace(0.2, 0.8, N), d=d)
    U, V = g.U, g.V
    psi = (U**3 + 0.5 * U + np.sin(V)) if free else np.sin(2 * U + 1) * np.cos(1.5 * V) + 0.3 * U * V
    return FieldGrid(grid=g, psi=psi)


MULTS = {
    "killing": Multiplier.killing(),
    "Jminus": Multiplier.jminus(0.6, 0.0, 1.0),
    "Jplus": Multiplier.jplus(-0.1, 0.2, 10.0),
    "Jp": Multiplier.jp(0.25, 0.0),
    "custom": Multiplier.custom(lambda u, v: np.exp(u) * v, lambda u, v: u * u + v),
}


def test_c_d_sign_facts():
    assert c_d(3) == 0.0
    assert c_d(2) == -0.25
    assert all(c_d(d) > 0 for d in range(4, 30))


def test_zero_field_components():
    g = Grid(u=np.linspace(-1, -0.3, 9), v=np.linspace(0.2, 0.8, 9))
    fg = FieldGrid(g, np.zeros(g.shape))
    for m in MULTS.values():
        Ju, Jv = current(fg, m)
        assert np.all(Ju == 0) and np.all(Jv == 0)
        assert np.all(divergence_rhs(fg, m) == 0)
    assert all(np.all(t == 0) for t in tensor_arrays(fg))
    fb = flux_balance(fg, Multiplier.killing())
    assert (fb.volume, fb.boundary, fb.mismatch) == (0.0, 0.0, 0.0)


def test_twist_term_for_constant_phi():
    g = Grid(u=np.linspace(-1, -0.3, 9), v=np.linspace(0.2, 0.8, 9), d=3)
    phi = 0.7
    fg = FieldGrid(g, phi * g.R)
    s = tensor_eval(fg, (4, 4))
    r = g.v[4] - g.u[4]
    assert s.T_uu == pytest.approx((1 / r) ** 2 * phi**2, rel=1e-10)
    assert s.T_vv == pytest.approx(s.T_uu, rel=1e-10)
    assert s.T_uv == 0.0
    with pytest.raises(BoundaryError):
        tensor_eval(fg, (0, 4))


@pytest.mark.parametrize("d", [3, 4, 5])
def test_tensor_positive_when_c_d_nonnegative(d):
    Tuu, Tvv, Tuv = tensor_arrays(_smooth(33, d))
    assert np.all(Tuu >= 0) and np.all(Tvv >= 0) and np.all(Tuv >= 0)


@pytest.mark.parametrize("d", [2, 3, 4])
@pytest.mark.parametrize("name", list(MULTS))
def test_divergence_identity_converges(d, name):
    m = MULTS[name]
    e = [np.abs(divergence_residual(_smooth(N, d), m)).max() for N in (33, 65, 129)]
    assert e[0] > e[1] > e[2]
    assert np.log2(e[1] / e[2]) >= 1.0


def test_killing_on_free_wave():
    fg = _smooth(129, 3, free=True)
    assert np.max(np.abs(divergence_rhs(fg, Multiplier.killing()))) < 1e-8
    assert flux_balance(fg, Multiplier.killing()).relative < 1e-6


def test_flux_mismatch_shrinks_under_refinement():
    m = MULTS["Jminus"]
    rel = [abs(flux_balance(_smooth(N), m).mismatch) for N in (33, 65, 129)]
    assert rel[0] > rel[1] > rel[2]
    assert np.log2(rel[1] / rel[2]) > 1.5


def test_flux_box_validation():
    fg = _smooth(33)
    with pytest.raises(DomainError):
        flux_balance(fg, Multiplier.killing(), box=(-2.0, -0.5, 0.3, 0.6))
    fb = flux_balance(fg, Multiplier.killing(), box=(-0.9, -0.5, 0.3, 0.6))
    assert fb.box[0] == pytest.approx(-0.9, abs=0.03)


@pytest.mark.parametrize("a_plus", [0.0, 0.5, 0.6, -0.1])
def test_jp_precondition(a_plus):
    with pytest.raises(ConfigError):
        Multiplier.jp(a_plus, 0.0)


@given(st.floats(1e-6, 0.5 - 1e-6, exclude_max=True))
def test_jp_interior_accepted(a_plus):
    assert Multiplier.jp(a_plus, 0.0).kind == "Jp"


def test_custom_derivatives_match_analytic():
    m = Multiplier.jminus(0.7, 0.1, 2.0)
    c = Multiplier.custom(m.f_u, m.f_v)
    u, v = np.array([-0.7, -0.4]), np.array([0.3, 0.6])
    for a, b in zip(m.derivs(u, v), c.derivs(u, v)):
        assert np.allclose(a, b, rtol=1e-6)


def test_coercivity_on_free_wave():
    fg = _smooth(65, 3, free=True)
    for m, region in ((Multiplier.jminus(0.6, 0.0, 0.0), "D-"), (Multiplier.jplus(-0.1, 0.0, 0.0), "D+"),
                      (Multiplier.jp(0.25, 0.5), "D+")):
        ver = coercivity_check(fg, m, region)
        assert ver.holds and ver.constant > 0 and not ver.degenerate


def test_coercivity_zero_field_trivial():
    g = Grid(u=np.linspace(-1, -0.3, 9), v=np.linspace(0.2, 0.8, 9))
    ver = coercivity_check(FieldGrid(g, np.zeros(g.shape)), Multiplier.jminus(0.6, 0.0), "D-")
    assert ver.holds


def test_coercivity_region_checks():
    fg = _smooth(17)
    with pytest.raises(ConfigError):
        coercivity_check(fg, Multiplier.jminus(0.6, 0.0), "D+")
    with pytest.raises(ConfigError):
        coercivity_check(fg, Multiplier.killing(), "D-")


def test_audit_serializable():
    import json

    res = audit(_smooth(33, free=True), default_multipliers())
    assert set(res) == {"killing", "Jminus", "Jplus", "Jp"}
    json.dumps(res, default=float)
    assert residual_histogram(np.zeros(3))["max"] == 0.0


def test_window_residual_requires_horizon():
    with pytest.raises(DomainError):
        window_residual(_smooth(17), Multiplier.killing())
