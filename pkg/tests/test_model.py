import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kreinheat.errors import ValidationError
from kreinheat.model import (
    INFINITY,
    ExtensionParam,
    Finite,
    Potential,
    ProblemSpec,
    is_scale_invariant,
    make_spec,
    validate,
)

coeff = st.floats(-5, 5, allow_nan=False)


@given(st.floats(0.05, 0.95), st.lists(coeff, max_size=9), st.floats(0.1, 5.0))
def test_validate_idempotent(nu, coeffs, R):
    if abs(nu - 0.5) <= 1e-6 and any(coeffs):
        return
    s = validate(ProblemSpec(nu=nu, potential=Potential(tuple(coeffs)), trunc_radius=R))
    assert validate(s) == s


@pytest.mark.parametrize("nu", [0.0, 1.0, -0.2, 1.5, math.nan])
def test_order_out_of_range(nu):
    with pytest.raises(ValidationError, match="order out of"):
        make_spec(nu)


def test_extreme_order_needs_opt_in():
    with pytest.raises(ValidationError):
        make_spec(0.01)
    assert make_spec(0.01, allow_extreme_nu=True).nu == 0.01


def test_resonant_order_with_potential():
    assert make_spec(0.5).nu == 0.5
    with pytest.raises(ValidationError, match="resonant"):
        make_spec(0.5, (0.0, 1.0))


@pytest.mark.parametrize(
    "kw",
    [
        {"trunc_radius": 0.0},
        {"far_cutoff": 10.0},
        {"far_offset": -1.0},
        {"mode": "periodic"},
    ],
)
def test_bad_fields(kw):
    with pytest.raises(ValidationError):
        make_spec(0.3, **kw)


def test_degree_limit():
    with pytest.raises(ValidationError):
        make_spec(0.3, [0.0] * 9 + [1.0])


def test_halfline_unbounded_below():
    with pytest.raises(ValidationError):
        make_spec(0.3, (0.0, -1.0), mode="halfline")
    make_spec(0.3, (0.0, -1.0))


def test_potential_trailing_zeros_and_eval():
    p = Potential((1.0, 2.0, 0.0, 0.0))
    assert p.degree == 1
    assert p(3.0) == 7.0
    np.testing.assert_allclose(p(np.array([0.0, 1.0])), [1.0, 3.0])
    assert p.derivative(5.0) == 2.0
    assert Potential().is_zero


def test_extension_parsing():
    assert ExtensionParam.parse("inf").is_infinite
    assert ExtensionParam.parse(" 0.5 ").theta == 0.5
    assert ExtensionParam.parse(2).label() == "2"
    with pytest.raises(ValidationError):
        ExtensionParam.parse("abc")
    with pytest.raises(ValidationError):
        ExtensionParam(-math.inf)
    with pytest.raises(ValidationError):
        Finite(math.inf)


def test_scale_invariance():
    assert is_scale_invariant(INFINITY)
    assert is_scale_invariant(ExtensionParam(0.0))
    assert not is_scale_invariant(ExtensionParam(1.0))


def test_singular_coefficient():
    s = make_spec(0.3, (1.0,))
    assert s.singular_coeff == pytest.approx(0.09 - 0.25)
    assert s.q(2.0) == pytest.approx((0.09 - 0.25) / 4 + 1.0)
