import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kreinheat.asymptotics import krein_constant
from kreinheat.errors import ValidationError
from kreinheat.model import INFINITY, ExtensionParam, make_spec
from kreinheat.spectrum import (
    MeshPolicy,
    bessel_eigenvalues,
    eigenvalues,
    eigenvalues_calogero,
    required_lambda_max,
    shooting_function,
    weyl_count,
)


@pytest.mark.parametrize("theta", [1.0, -0.5, 3.0])
def test_finite_theta_against_bessel(theta):
    nu = 0.7
    ext = ExtensionParam(theta)
    lam = eigenvalues(make_spec(nu), ext, 2000.0).eigenvalues
    exact = bessel_eigenvalues(nu, ext, 1.0, 10)
    np.testing.assert_allclose(lam[lam > 0][:10], exact, rtol=1e-9)


def test_deep_bound_state():
    # theta < 0 binds a level at 1 + theta c z^-nu = 0; the wall at R = 1 is negligible
    nu, theta = 0.3, -20.0
    lam = eigenvalues(make_spec(nu), ExtensionParam(theta), 500.0).eigenvalues
    expect = -((-theta * krein_constant(nu)) ** (1 / nu))
    assert lam[0] == pytest.approx(expect, rel=1e-9)
    assert lam[1] > 0


@settings(max_examples=5, deadline=None)
@given(st.sampled_from([0.2, 0.45, 0.8]), st.lists(st.floats(-2, 2), max_size=3))
def test_interlacing_and_theta_monotonicity(nu, coeffs):
    spec = make_spec(nu, coeffs)
    levels = [eigenvalues(spec, ExtensionParam(t), 1500.0).eigenvalues for t in (0.0, 0.5, 4.0)]
    inf = eigenvalues(spec, INFINITY, 1500.0).eigenvalues
    n = min(map(len, levels + [inf])) - 1
    a, b, c = (v[:n] for v in levels)
    assert np.all(a < b) and np.all(b < c) and np.all(c < inf[:n])
    assert np.all(inf[: n - 1] < a[1:n])


def test_scaling_covariance():
    nu, theta, s = 0.7, 0.8, 2.0
    base = eigenvalues(make_spec(nu), ExtensionParam(theta), 800.0).eigenvalues[:8]
    scaled = eigenvalues(make_spec(nu, trunc_radius=1 / s), ExtensionParam(theta * s ** (2 * nu)), 800.0 * s**2)
    np.testing.assert_allclose(scaled.eigenvalues[:8] / s**2, base, rtol=1e-9)
    # the s^+2 prefactor is dimensionally inconsistent
    assert not np.allclose(scaled.eigenvalues[:8] * s**2, base, rtol=1e-3)


def test_calogero_ladder_small():
    nu = 0.3
    spec = make_spec(nu, (0.0, 0.0, 1.0), trunc_radius=8.0)
    lam = eigenvalues(spec, ExtensionParam(0.0), 300.0).eigenvalues[:6]
    np.testing.assert_allclose(lam, eigenvalues_calogero(nu, "theta_zero", 6), rtol=1e-9)


def test_error_estimates_and_residuals():
    r = eigenvalues(make_spec(0.3, (0.0, 1.0)), ExtensionParam(1.0), 1000.0)
    assert np.all(r.error_estimates < 1e-6 * np.abs(r.eigenvalues))
    assert np.all(r.residuals < 1e-8)
    assert np.all(np.diff(r.eigenvalues) > 0)


def test_shooting_function_vanishes_at_eigenvalue():
    spec = make_spec(0.3)
    lam1 = bessel_eigenvalues(0.3, INFINITY, 1.0, 1)[0]
    assert abs(shooting_function(spec, INFINITY, lam1)) < 1e-9
    assert abs(shooting_function(spec, INFINITY, lam1 + 1.0)) > 1e-3


def test_weyl_count_and_cutoff():
    w = weyl_count(make_spec(0.3), 1e4)
    assert w == pytest.approx(100.0 / np.pi, rel=0.05)
    assert required_lambda_max(1e-3) == 4e4


def test_mesh_refinement_is_consistent():
    spec = make_spec(0.3, (0.0, 1.0))
    fine = eigenvalues(spec, INFINITY, 500.0)
    coarse = eigenvalues(spec, INFINITY, 500.0, mesh=MeshPolicy(h_max=0.02))
    np.testing.assert_allclose(fine.eigenvalues, coarse.eigenvalues, rtol=1e-9)


def test_bad_window():
    with pytest.raises(ValidationError):
        eigenvalues(make_spec(0.3), INFINITY, 10.0, lambda_min=20.0)
