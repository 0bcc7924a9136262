import math
import random

import numpy as np
import pytest

from greensign.coeffexpr import (
    Bin,
    Const,
    DomainError,
    ExprSyntaxError,
    Fun,
    UnknownIdentifierError,
    differentiate,
    eval_expr,
    parse_expr,
    unparse,
)


def fd(e, t, h=1e-6):
    return (eval_expr(e, t + h) - eval_expr(e, t - h)) / (2 * h)


def test_zero_literal():
    e = parse_expr("0")
    assert isinstance(e, Const) and e.value == 0.0


def test_constant_eval():
    assert eval_expr(parse_expr("5"), 3.0) == 5.0


def test_cubic_at_one():
    assert eval_expr(parse_expr("t^3-3*t^2+3*t"), 1.0) == pytest.approx(1.0, abs=1e-15)


def test_product_structure_and_values():
    e = parse_expr("exp(2*t)*sin(2*t)")
    assert isinstance(e, Bin) and e.op == "*"
    assert isinstance(e.left, Fun) and e.left.name == "exp"
    assert isinstance(e.right, Fun) and e.right.name == "sin"
    assert eval_expr(e, 0.0) == 0.0
    assert eval_expr(e, 0.5) == pytest.approx(math.exp(1.0) * math.sin(1.0), rel=1e-15)


def test_pi_power():
    assert eval_expr(parse_expr("pi^4"), 0.3) == pytest.approx(math.pi**4, rel=1e-15)


def test_precedence():
    assert eval_expr(parse_expr("2*3+4"), 0.0) == 10.0
    assert eval_expr(parse_expr("2+3*4"), 0.0) == 14.0
    assert eval_expr(parse_expr("2^3^2"), 0.0) == 512.0  # right-associative
    assert eval_expr(parse_expr("-2^2"), 0.0) == -4.0  # ^ binds above unary minus
    assert eval_expr(parse_expr("2^-1"), 0.0) == 0.5
    assert eval_expr(parse_expr("(2+3)*4"), 0.0) == 20.0
    assert eval_expr(parse_expr("8/4/2"), 0.0) == 1.0  # left-associative


def test_vector_eval():
    grid = np.linspace(0.0, 1.0, 7)
    vals = eval_expr(parse_expr("t^2+1"), grid)
    assert np.allclose(vals, grid**2 + 1)


def test_implicit_multiplication_rejected():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("2t")
    assert err.value.position == 1


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError, match="'x'"):
        parse_expr("sin(x)")


@pytest.mark.parametrize(
    "text",
    ["", "   ", "1+", "sin(t", "(1+2", "1 2", "t t", "sin t", "1..2"],
)
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse_expr(text)


def test_non_ascii_rejected():
    with pytest.raises(ExprSyntaxError):
        parse_expr("t\u00b2")


@pytest.mark.parametrize(
    "text,point",
    [
        ("log(t)", 0.0),
        ("log(t)", -1.0),
        ("1/t", 0.0),
        ("sqrt(t)", -0.5),
        ("t^(0-2)", 0.0),  # 0^negative
        ("exp(1/t)", 0.0),
    ],
)
def test_domain_errors(text, point):
    with pytest.raises(DomainError):
        eval_expr(parse_expr(text), point)


def test_overflow_is_domain_error():
    with pytest.raises(DomainError):
        eval_expr(parse_expr("exp(t)"), 1.0e4)


def test_power_rule():
    d = differentiate(parse_expr("t^2"))
    for t in (0.0, 0.5, -1.3, 2.0):
        assert eval_expr(d, t) == pytest.approx(2 * t, abs=1e-14)


def test_product_derivative_value():
    e = parse_expr("exp(2*t)*sin(2*t)")
    d = differentiate(e)
    assert eval_expr(d, 0.0) == pytest.approx(2.0, abs=1e-13)
    assert eval_expr(d, 0.0) == pytest.approx(fd(e, 0.0), abs=1e-8)


def test_constant_derivative_is_zero():
    d = differentiate(parse_expr("3.5"))
    assert isinstance(d, Const) and d.value == 0.0
    d = differentiate(parse_expr("pi"))
    assert isinstance(d, Const) and d.value == 0.0


def test_abs_derivative():
    d = differentiate(parse_expr("abs(t)"))
    assert eval_expr(d, 3.0) == 1.0
    assert eval_expr(d, -2.0) == -1.0
    with pytest.raises(DomainError):
        eval_expr(d, 0.0)


def test_general_power_derivative():
    # base and exponent both variable: t^t at t = 1.5
    e = parse_expr("t^t")
    d = differentiate(e)
    t = 1.5
    expected = t**t * (math.log(t) + 1.0)
    assert eval_expr(d, t) == pytest.approx(expected, rel=1e-12)


def test_second_derivatives_closed():
    e = parse_expr("sin(2*t)/(t^2+1)")
    d2 = differentiate(differentiate(e))
    for t in (0.0, 0.4, 1.1):
        step = 1e-4
        approx = (eval_expr(e, t + step) - 2 * eval_expr(e, t) + eval_expr(e, t - step)) / step**2
        assert eval_expr(d2, t) == pytest.approx(approx, abs=1e-5 * (1 + abs(approx)))


def test_expressions_are_immutable():
    e = parse_expr("t+1")
    with pytest.raises(AttributeError):
        e.op = "-"


ROUND_TRIP_FIXTURES = [
    "0",
    "exp(2*t)*sin(2*t)",
    "t^3-3*t^2+3*t",
    "-t^2+4/(1+t)",
    "1.5e-3*t - 2.25",
    "cos(pi*t)^2 - sin(pi*t)^2",
    "tanh(t)/cosh(t)",
    "sqrt(t^2+1)",
    "abs(t-0.5)+log(t+2)",
    "-(t+1)^3",
]


@pytest.mark.parametrize("text", ROUND_TRIP_FIXTURES)
def test_round_trip(text):
    e = parse_expr(text)
    again = parse_expr(unparse(e))
    pts = np.linspace(0.05, 1.95, 20)
    v1 = eval_expr(e, pts)
    v2 = eval_expr(again, pts)
    assert np.allclose(v1, v2, rtol=1e-14, atol=0.0)


def _random_expr_text(rng, depth):
    if depth == 0:
        return rng.choice(["t", "pi", f"{rng.uniform(-3, 3):.3f}", str(rng.randint(1, 4))])
    kind = rng.randint(0, 6)
    inner = _random_expr_text(rng, depth - 1)
    if kind == 0:
        return f"sin({inner})"
    if kind == 1:
        return f"cos({inner})"
    if kind == 2:
        return f"tanh({inner})"
    if kind == 3:
        return f"exp(0.25*({inner}))"
    other = _random_expr_text(rng, depth - 1)
    if kind == 4:
        return f"({inner}) + ({other})"
    if kind == 5:
        return f"({inner}) * ({other})"
    return f"({inner}) / (({other})^2 + 2)"


def test_derivative_matches_finite_differences_randomized():
    rng = random.Random(20240817)
    checked = 0
    for _ in range(100):
        text = _random_expr_text(rng, rng.randint(1, 3))
        e = parse_expr(text)
        d = differentiate(e)
        for _ in range(10):
            t = rng.uniform(0.1, 2.1)
            value = eval_expr(d, t)
            approx = fd(e, t)
            assert value == pytest.approx(approx, abs=1e-5 * (1.0 + abs(value))), text
            checked += 1
    assert checked == 1000


def test_unparser_output_always_reparses():
    rng = random.Random(99)
    pts = np.linspace(0.1, 2.0, 20)
    for _ in range(100):
        e = parse_expr(_random_expr_text(rng, rng.randint(1, 3)))
        text = unparse(e)
        again = parse_expr(text)
        assert np.allclose(eval_expr(e, pts), eval_expr(again, pts), rtol=1e-14, atol=0.0)
        # derivatives stay inside the grammar too
        d_text = unparse(differentiate(e))
        parse_expr(d_text)
