import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cauchylab.errors import ConfigError, DomainError
from cauchylab.geometry import WeightVector
from cauchylab.models import (EquationSpec, a0_threshold, check_exponents, default_weights, exponent_constants,
                              nonlinearity_split)
from cauchylab.profiles import Profile


def test_family_validation():
    with pytest.raises(ConfigError):
        EquationSpec("KG", 3)
    with pytest.raises(ConfigError):
        EquationSpec("NW", 3, p=None)
    with pytest.raises(ConfigError):
        EquationSpec("NW", 2, p=5)
    with pytest.raises(ConfigError):
        EquationSpec("WMS", 3, K=0)
    assert EquationSpec("wms", 3).K == 1


def test_wms_potential_coefficient():
    sp = nonlinearity_split(EquationSpec("WMS", 3, K=1))
    assert sp.V(-1.0, 1.0) == pytest.approx(2.0 / 4.0)
    assert sp.V_coeff(np.array([-0.3]), np.array([0.1]))[0] == pytest.approx(2.0)


def test_nw_split():
    sp = nonlinearity_split(EquationSpec("NW", 3, p=5))
    phi = np.linspace(-1, 1, 11)
    assert np.allclose(sp.N(-1.0, 0.5, phi), -(phi**5))
    assert np.all(sp.V(-1.0, 0.5 + 0 * phi) == 0)
    # the equation reads box phi = -phi^5
    assert sp.rhs(-1.0, 0.5, 0.5) == pytest.approx(sp.F_full(-1.0, 0.5, 0.5))


@pytest.mark.parametrize("spec", [EquationSpec("NW", 3, p=5), EquationSpec("NW", 4, p=3),
                                  EquationSpec("WMS", 2), EquationSpec("WMS", 3), EquationSpec("NULLFORM", 3)])
def test_remainder_vanishes_at_zero(spec):
    sp = nonlinearity_split(spec)
    u, v = np.array([-0.7, -0.2]), np.array([0.1, 0.4])
    assert np.all(sp.N(u, v, 0.0 * u, 0.0 * u, 0.0 * u) == 0)


@given(st.floats(-1.5, 1.5), st.floats(-0.9, -0.05), st.floats(0.01, 0.9))
def test_split_reassembles_full_equation(phi, u, v):
    prof = Profile.constant(0.7, d=3)
    spec = EquationSpec("WMS", 3, background="constant")
    sp = nonlinearity_split(spec, prof)
    full = sp.F_full(u, v, 0.7 + phi) - sp.F_full(u, v, 0.7)
    assert sp.rhs(u, v, phi) == pytest.approx(full, rel=1e-9, abs=1e-9)


def test_admissibility_examples():
    nw = EquationSpec("NW", 3, p=5)
    assert check_exponents(nw, WeightVector(1.5, -0.25, -0.1)).admissible
    bad = check_exponents(nw, WeightVector(1.5, -0.5, -0.1))
    assert not bad and "5a_0+2>a_0 fails" in bad.reason and "boundary" in bad.reason
    w = check_exponents(EquationSpec("WMS", 3), WeightVector(2.0, 0.0, -0.1))
    assert not w and "a_0>0 required" in w.reason


@given(st.floats(-0.49, 3.0))
def test_nw_interior_gap_positive(a0):
    v = check_exponents(EquationSpec("NW", 3, p=5), WeightVector(a0 + 2.5, a0, -0.1))
    assert v.admissible and v.delta > 0


def test_thresholds():
    assert a0_threshold(EquationSpec("NW", 3, p=5)) == pytest.approx(-0.5)
    assert a0_threshold(EquationSpec("NW", 4, p=3)) == pytest.approx(-1.0)
    assert a0_threshold(EquationSpec("WMS", 3)) == 0.0
    w = default_weights(EquationSpec("NW", 3, p=5))
    assert check_exponents(EquationSpec("NW", 3, p=5), w).admissible


def test_exponent_constants():
    c = exponent_constants("NW", 7, 3)
    assert c.c_pd == pytest.approx(2.0)
    assert c.residuals(7, 3)["c_pd"] < 1e-12
    g = exponent_constants("WMS", 7)
    assert g.gamma == pytest.approx(2.0)
    assert exponent_constants("NW", 3, 5).c == 1.0 and g.c == 0.0
    with pytest.raises(DomainError):
        exponent_constants("WMS", 5)
