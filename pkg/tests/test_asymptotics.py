import math

import numpy as np
import pytest

from kreinheat.asymptotics import (
    expansion_coefficients,
    extract_base_trace_series,
    extract_H_series,
    fit_trace_curve,
    krein_constant,
    lattice_basis,
    predict_heat_expansion,
    seed_exponent,
)
from kreinheat.errors import ValidationError
from kreinheat.heattrace import TraceCurve, default_t_grid
from kreinheat.model import make_spec
from kreinheat.series import FractionalSeries, LatticeExponent

Z = np.geomspace(100.0, 1e4, 16)


def synthetic(nu=0.3, t=None):
    t = default_t_grid(40, 1e-3, 0.05) if t is None else t
    return TraceCurve(t, 2.0 + 3.0 * t**nu, np.full(t.size, 1e-12))


@pytest.fixture(scope="module")
def free_series():
    nu = 0.3
    spec = make_spec(nu, mode="halfline")
    H = extract_H_series(spec, Z)
    B, _ = extract_base_trace_series(spec, Z)
    return nu, H, B


def test_krein_constant():
    assert krein_constant(0.5) == pytest.approx(2.0 * math.gamma(1.5) / math.gamma(0.5))


def test_synthetic_fixed_fit():
    f = fit_trace_curve(synthetic(), [LatticeExponent(0, 0), LatticeExponent(0, 1)], nu=0.3)
    assert f.coefficient_at(0.0) == pytest.approx(2.0, rel=1e-10)
    assert f.coefficient_at(0.3) == pytest.approx(3.0, rel=1e-10)
    assert not f.suppressed


def test_synthetic_free_exponent_from_half():
    f = fit_trace_curve(synthetic(), [0.0], free_exponent=0.5)
    assert f.free_exponent == pytest.approx(0.3, abs=1e-6)
    lo, hi = f.free_ci
    assert lo <= 0.3 <= hi


def test_seed_exponent():
    assert seed_exponent(synthetic()) == pytest.approx(0.3, abs=0.01)
    with pytest.raises(ValidationError):
        seed_exponent(TraceCurve(np.array([1e-3, 1e-2, 1e-1]), np.ones(3), np.zeros(3)))


def test_ill_conditioned_fit_is_suppressed():
    f = fit_trace_curve(synthetic(), [0.0, 1e-6, 2e-6, 3e-6], nu=0.3)
    assert f.suppressed and all(c == 0.0 for c in f.coefficients)


def test_H_is_one_for_free_case(free_series):
    _, H, _ = free_series
    assert all(abs(c) < 1e-6 for (p, _, _), c in H.terms.items() if p > 0)


def test_H_constant_shift():
    # V = v0: K = c (z + v0)^-nu, so H = (1 + v0/z)^nu = 1 + nu v0 / z + ...
    nu, v0 = 0.3, 2.0
    H = extract_H_series(make_spec(nu, (v0,), mode="halfline"), Z)
    assert H.coefficient(2) == pytest.approx(nu * v0, rel=1e-3)
    # last fitted term absorbs the truncated tail
    assert H.coefficient(4) == pytest.approx(nu * (nu - 1) / 2 * v0**2, rel=0.05)


def test_free_prediction_is_mittag_leffler(free_series):
    # V = 0: nu E_nu(-theta c t^nu) has coefficients nu (-theta c)^N / Gamma(1 + N nu)
    nu, H, B = free_series
    theta = 0.7
    P = predict_heat_expansion(nu, theta, H, B)
    for N in range(5):
        expect = nu * (-theta * krein_constant(nu)) ** N / math.gamma(1 + N * nu)
        assert P.coefficient(0, N) == pytest.approx(expect, rel=1e-6)


def test_prediction_linear_in_theta(free_series):
    nu, H, B = free_series
    c1 = predict_heat_expansion(nu, 0.05, H, B).coefficient(0, 1)
    c2 = predict_heat_expansion(nu, 0.1, H, B).coefficient(0, 1)
    assert c2 / c1 == pytest.approx(2.0, rel=1e-12)
    b = expansion_coefficients(predict_heat_expansion(nu, 0.05, H, B))["b"]
    assert (1, 1) in b and b[(1, 1)] == pytest.approx(c1 / 0.05)


def test_large_theta_route(free_series):
    # about infinity: 1/(1 + theta c t^..) resums as powers of 1/theta
    nu, H, B = free_series
    P = predict_heat_expansion(nu, 50.0, H, B, about="infinity")
    assert all(n < 0 for (_, _, n) in P.terms)
    # nu z^-1 z^nu / (theta c) -> nu t^-nu / (theta c Gamma(1 - nu))
    lead = P.coefficient(0, -1, N=-1)
    assert lead == pytest.approx(nu / (krein_constant(nu) * math.gamma(1 - nu)), rel=1e-6)


def test_calogero_taylor():
    # theta = 0, V = x^2: sinh(2 nu t)/sinh(2t) = nu + (2/3) nu (nu^2 - 1) t^2 + O(t^4)
    nu = 0.3
    spec = make_spec(nu, (0.0, 0.0, 1.0), mode="halfline")
    H = extract_H_series(spec, Z)
    B, _ = extract_base_trace_series(spec, Z, max_k=5, truncation=3.5)
    P = predict_heat_expansion(nu, 0.0, H, B, truncation=2.0)
    assert P.coefficient(0) == pytest.approx(nu, rel=1e-6)
    assert P.coefficient(4) == pytest.approx(2 / 3 * nu * (nu**2 - 1), rel=1e-2)
    assert abs(P.coefficient(1)) < 1e-4 and abs(P.coefficient(2)) < 1e-3


def test_lattice_basis_filters_by_contribution():
    s = FractionalSeries("t", 0.3, {(0, 0, 0): 1.0, (0, 1, 0): 1e-3, (0, 4, 0): 1e-8}, 3.0)
    assert len(lattice_basis(s, 2.0)) == 3
    assert len(lattice_basis(s, 2.0, min_abs=1e-7, t_max=0.05)) == 2
    assert len(lattice_basis(s, 0.1)) == 1


def test_report_json():
    import json

    f = fit_trace_curve(synthetic(), [LatticeExponent(0, 0), LatticeExponent(0, 1)], nu=0.3)
    d = json.loads(f.to_json())
    assert d["coefficients"] == pytest.approx([2.0, 3.0], rel=1e-10)
    assert f.coefficient_of(LatticeExponent(0, 1)) == pytest.approx(3.0, rel=1e-10)
