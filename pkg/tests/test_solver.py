import numpy as np
import pytest
from hypothesis import given, strategies as st

from cauchylab.chardata import build_transversal_jet, perturb_trace
from cauchylab.errors import BlowUpError, ConfigError, OrderError
from cauchylab.geometry import DomainSpec, Grid, build_grid
from cauchylab.models import EquationSpec, nonlinearity_split
from cauchylab.profiles import Profile
from cauchylab.solver import (FieldGrid, convergence_study, equation_residual, evolve, evolve_boundary, march,
                              nodal_derivatives, run_manufactured)

F = lambda u: u**3 + 0.5 * u**2 - u  # noqa: E731
G = lambda v: 0.3 * v**2 + v**3  # noqa: E731


def _free(N, stretching="geometric"):
    g = build_grid(DomainSpec(d=3, Nu=N, Nv=N, v_max=0.5, u_eps=1e-5, v_min=1e-6, stretching=stretching))
    sp = nonlinearity_split(EquationSpec("LINEAR", 3))
    return evolve_boundary(g, sp, lambda v: F(g.u[0]) + G(v), lambda u: F(u) + G(g.v[0]))


@pytest.mark.parametrize("spec", [EquationSpec("NW", 3, p=5), EquationSpec("WMS", 2), EquationSpec("NULLFORM", 3)])
def test_zero_data_zero_field(spec):
    data = build_transversal_jet(perturb_trace(Profile.zero(spec.d), "none", d=spec.d, m=2), spec, 2)
    fg = evolve(data, spec, DomainSpec(d=spec.d, Nu=33, Nv=33, v_max=0.2, v_min=1e-6, u_eps=1e-4))
    assert np.all(fg.psi == 0)


def test_free_wave_exact():
    fg = _free(257)
    assert np.max(np.abs(fg.psi - F(fg.grid.U) - G(fg.grid.V))) < 1e-10


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-2, 2))
def test_free_wave_linear_in_data(a, b, c):
    g = Grid(u=np.linspace(-1, -0.1, 17), v=np.linspace(0.1, 0.5, 17))
    sp = nonlinearity_split(EquationSpec("LINEAR", 3))
    fg = evolve_boundary(g, sp, lambda v: a + b * v**2 + c * g.u[0], lambda u: a + b * g.v[0] ** 2 + c * u)
    assert np.allclose(fg.psi, a + b * g.V**2 + c * g.U, atol=1e-12)


def test_nodal_derivative_order():
    errs = []
    for N in (257, 513, 1025):
        fg = _free(N)
        pv = nodal_derivatives(fg.grid, fg.psi)[1]
        errs.append(np.max(np.abs(pv - (0.6 * fg.grid.V + 3 * fg.grid.V**2))))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2.0) < 0.1)


@pytest.mark.parametrize("spec", [EquationSpec("NW", 3, p=5), EquationSpec("WMS", 3)])
def test_manufactured_order(spec):
    e = [run_manufactured(spec, n)[1] for n in (33, 65, 129)]
    assert np.log2(e[1] / e[2]) == pytest.approx(2.0, abs=0.1)


def test_convergence_study_exact_and_inconclusive():
    zero = lambda n: FieldGrid(Grid(u=np.linspace(-1, -0.5, n), v=np.linspace(0.2, 0.5, n)), np.zeros((n, n)))  # noqa: E731
    rep = convergence_study(zero, [9, 17, 33], {"max": lambda f: np.abs(f.psi).max()}, exact={"max": 0.0})
    assert rep.observables["max"].verdict == "exact"
    # an observable that does not converge
    noisy = convergence_study(zero, [9, 17, 33, 65], {"n": lambda f: (-1) ** f.grid.u.size * f.grid.u.size})
    assert noisy.observables["n"].verdict == "inconclusive"
    with pytest.raises(ConfigError):
        convergence_study(zero, [9, 17], {})


def test_convergence_study_reports_order():
    rep = convergence_study(lambda n: run_manufactured(EquationSpec("NW", 3, p=5), n)[0], [17, 33, 65, 129],
                            {"corner": lambda f: f.psi[-1, -1]})
    assert rep.order("corner") == pytest.approx(2.0, abs=0.2)


def test_corner_mismatch_rejected():
    g = Grid(u=np.linspace(-1, -0.5, 5), v=np.linspace(0.2, 0.5, 5))
    sp = nonlinearity_split(EquationSpec("LINEAR", 3))
    with pytest.raises(ConfigError):
        march(g, sp, np.zeros(5), np.ones(5))


def test_blow_up_detected():
    spec = EquationSpec("NW", 3, p=5)
    g = Grid(u=np.linspace(-1, -0.01, 65), v=np.linspace(0.01, 2.0, 65))
    sp = nonlinearity_split(spec)
    with pytest.raises(BlowUpError) as exc:
        evolve_boundary(g, sp, lambda v: 3.0 * np.sin(3 * v), lambda u: 3.0 * np.sin(0.03) + 0 * u)
    assert exc.value.last_finite is not None


def test_evolve_requires_jets():
    data = perturb_trace(Profile.zero(3), "power_tail", a=0.25, m=1)
    with pytest.raises(OrderError):
        evolve(data, EquationSpec("NW", 3, p=5), DomainSpec(Nu=9, Nv=9))


def test_residual_and_round_trip(tmp_path):
    spec = EquationSpec("NW", 3, p=5)
    sp = nonlinearity_split(spec)
    data = build_transversal_jet(perturb_trace(Profile.zero(3), "power_tail", a=0.25, m=2), sp, 2)
    res = []
    for N in (65, 129, 257):
        fg = evolve(data, sp, DomainSpec(Nu=N, Nv=N, v_max=0.1, v_min=1e-8, u_eps=1e-6))
        res.append(np.max(np.abs(equation_residual(fg, sp))))
    assert res[0] > res[1] > res[2]
    assert np.log2(res[1] / res[2]) > 1.0
    fg.save(tmp_path / "f")
    back = FieldGrid.load(tmp_path / "f.npz")
    assert np.array_equal(back.psi, fg.psi) and back.meta["case_id"] == fg.meta["case_id"]
    n = fg.slice_csv(tmp_path / "s.csv", "v", 0.1)
    assert n == 257
