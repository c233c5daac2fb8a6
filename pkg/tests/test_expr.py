import numpy as np
import pytest
from hypothesis import given, strategies as st

from anisolab.expr import ExpressionError, eval_expression, parse_expression


@pytest.mark.parametrize("text, want", [
    ("2^3^2", 512.0),
    ("abs(-3) + min(1,2)", 4.0),
    ("-2^2", 4.0),
    ("(2^3)^2", 64.0),
    ("1 - 2 - 3", -4.0),
    ("8 / 4 / 2", 1.0),
    ("2 * 3 + 4 * 5", 26.0),
    ("max(-1, -2) + sqrt(16) + exp(0) + cos(0)", 5.0),
    ("1.5e2 + .5", 150.5),
    ("2 + 0.5*sin(pi)", 2.0 + 0.5 * np.sin(np.pi)),
])
def test_literals(text, want):
    assert eval_expression(text, {}) == pytest.approx(want, rel=1e-15)


def test_sin_at_half_pi():
    e = parse_expression("sin(x1)")
    assert abs(e(x1=np.pi / 2) - 1.0) <= 1e-15
    assert e.variables == ("x1",)


def test_vectorised_bindings():
    e = parse_expression("x1^2 + xi2*s")
    x = np.linspace(-1, 1, 7)
    out = e(x1=x, xi2=2.0, s=x)
    np.testing.assert_allclose(out, x**2 + 2 * x)
    assert parse_expression("3").variables == ()
    assert eval_expression("3", {"x1": np.zeros((2, 2))}).shape == (2, 2)


@pytest.mark.parametrize("text, col", [
    ("1 / (x1 - 1)", 3),
    ("0^(-1)", 2),
    ("sqrt(-1)", 1),
    ("(-2)^0.5", 5),
])
def test_domain_errors_carry_position(text, col):
    with pytest.raises(ExpressionError) as err:
        eval_expression(text, {"x1": 1.0})
    assert err.value.pos == col
    assert f"column {col}" in str(err.value)


@pytest.mark.parametrize("text", ["", "1 +", "2 ** 3", "foo(1)", "sin", "min(1)", "(1", "1 $ 2", "3 4"])
def test_parse_errors(text):
    with pytest.raises(ExpressionError):
        parse_expression(text)


def test_unbound_variable():
    with pytest.raises(ExpressionError, match="unbound"):
        eval_expression("x1 + y", {"x1": 1.0})


small = st.floats(-100, 100, allow_nan=False).map(lambda v: round(v, 3))


@given(small, small, small)
def test_arithmetic_matches_python(a, b, c):
    text = f"({a}) + ({b}) * ({c}) - ({a}) / 7"
    assert eval_expression(text, {}) == pytest.approx(a + b * c - a / 7, rel=1e-12, abs=1e-12)


@given(st.floats(0.1, 3), st.floats(0.1, 2), st.floats(-2, 2))
def test_power_right_associative(a, b, c):
    got = parse_expression("x1^x2^x3")(x1=a, x2=b, x3=c)
    assert got == pytest.approx(a ** (b ** c), rel=1e-12)
