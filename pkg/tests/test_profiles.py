import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from cauchylab.errors import ConfigError, UnsupportedError
from cauchylab.profiles import (Profile, ode_A, ode_B, ode_residual, profile_eval, solve_self_similar_profile,
                                spacetime_residual)


@pytest.fixture(scope="module")
def typeI():
    return solve_self_similar_profile(d=3, K=1)


def test_axis_value_exact(typeI):
    assert typeI.Phi(np.array([0.0]))[0] == 0.0


def test_ode_residual_small(typeI):
    assert ode_residual(typeI) < 1e-6


def test_monotone_through_horizon(typeI):
    y = np.linspace(0.0, 1.0, 2001)
    assert np.all(np.diff(typeI.Phi(y)) > 0)
    # the profile passes pi where t = 0 (y = 1/2)
    assert typeI.Phi(np.array([0.5]))[0] == pytest.approx(math.pi, abs=1e-5)


def test_matches_independent_stiff_integration(typeI):
    kappa = 2.0
    b = typeI.meta["shooting_parameter"]
    y0 = 1e-6

    def f(y, z):
        return [z[1], (kappa / 2 * math.sin(2 * z[0]) - ode_B(y, 3) * z[1]) / ode_A(y)]

    sol = solve_ivp(f, (y0, 0.3), [b * y0, b], method="Radau", rtol=1e-10, atol=1e-12, dense_output=True)
    y = np.linspace(0.05, 0.3, 26)
    assert np.max(np.abs(sol.sol(y)[0] - typeI.Phi(y))) < 1e-5


def test_spacetime_residual_on_grid(typeI):
    u, v = np.meshgrid(-np.geomspace(1e-3, 1.0, 200), np.geomspace(1e-4, 0.5, 200), indexing="ij")
    assert np.max(np.abs(spacetime_residual(typeI, u, v))) < 1e-6


def test_csv_round_trip(typeI, tmp_path):
    typeI.to_csv(tmp_path / "p.csv")
    q = Profile.from_csv(tmp_path / "p.csv")
    y = np.linspace(0, 1.5, 50)
    assert np.allclose(q.Phi(y), typeI.Phi(y), atol=1e-14)


def test_unsupported_dimensions():
    with pytest.raises(UnsupportedError):
        solve_self_similar_profile(d=5)
    with pytest.raises(ConfigError):
        solve_self_similar_profile(d=2)


def test_simple_profiles():
    e = profile_eval(Profile.equatorial(), -0.3, 0.2, 1)
    assert e[(0, 0)] == pytest.approx(math.pi / 2) and e[(1, 0)] == 0 and e[(0, 1)] == 0
    assert Profile.zero().value(np.array([-0.5]), np.array([0.3]))[0] == 0
    tail = Profile.type_ii_tail(2.0).value(-0.1, 0.0)
    assert abs(tail - (math.pi - 0.2)) < 4e-3
