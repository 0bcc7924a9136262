"""Shared fixtures: problem builders and transcendental root oracles.

The reference m-values are recomputed here by bisecting their defining
transcendental equations, independently of the ODE machinery under test.
"""

import math

import pytest

from greensign.coeffexpr import parse_expr
from greensign.problem import ProblemSpec
from greensign.spectral import SearchConfig

S3 = math.sqrt(3.0)

# search windows that keep the first root well inside the first scan cells
CFG4 = SearchConfig(lambda_max=5000.0)
CFG6 = SearchConfig(lambda_max=1.0e5)


def make_spec(n, sigma, epsilon, p=None, a=0.0, b=1.0, m_bar=0.0):
    texts = p if p is not None else ["0"] * n
    exprs = tuple(parse_expr(text) for text in texts)
    return ProblemSpec(
        n=n, a=a, b=b, p=exprs, m_bar=m_bar, sigma=tuple(sigma), epsilon=tuple(epsilon)
    )


def t4_base(m_bar=0.0):
    return make_spec(4, (0, 2), (1, 2), m_bar=m_bar)


def t2_dirichlet():
    return make_spec(2, (0,), (0,))


def t2_mixed():
    return make_spec(2, (0,), (1,))


def t4_nc():
    """Fourth order with the oscillating-exponential third-derivative coefficient."""
    return make_spec(4, (0, 2), (1, 2), p=["exp(2*t)*sin(2*t)", "0", "0", "0"])


def bisect_root(f, lo, hi, iters=200):
    flo = f(lo)
    fhi = f(hi)
    assert flo * fhi < 0, f"no bracket: f({lo})={flo}, f({hi})={fhi}"
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _m8_eq(m):
    em = math.exp(m)
    return (
        S3 * math.exp(m / 2) * (math.exp(2 * m) + 1)
        - 3 * (em + 1) ** 2 * (em - 1) * math.sin(S3 * m / 2)
        + S3 * (em + 1) * (em - 1) ** 2 * math.cos(S3 * m / 2)
        - 2 * S3 * math.exp(1.5 * m) * math.cos(S3 * m)
    )


def _m9_eq(m):
    em = math.exp(m)
    return (
        -S3 * math.exp(m / 2) * (math.exp(2 * m) + 1)
        - 3 * (em + 1) ** 2 * (em - 1) * math.sin(S3 * m / 2)
        - S3 * (em + 1) * (em - 1) ** 2 * math.cos(S3 * m / 2)
        + 2 * S3 * math.exp(1.5 * m) * math.cos(S3 * m)
    )


@pytest.fixture(scope="session")
def roots():
    """Reference m-values from their defining transcendental equations."""
    tan_eq_tanh = bisect_root(
        lambda x: math.tan(x) - math.tanh(x), math.pi + 1e-6, 1.5 * math.pi - 1e-6
    )
    return {
        # tan m + tanh m = 0
        "m1": bisect_root(
            lambda m: math.tan(m) + math.tanh(m), math.pi / 2 + 1e-6, math.pi - 1e-6
        ),
        # tan(m/sqrt2) = tanh(m/sqrt2)
        "m2": math.sqrt(2.0) * tan_eq_tanh,
        # tan m = tanh m
        "m3": tan_eq_tanh,
        # exp(-m) + 2 exp(m/2) cos(sqrt3 m / 2) = 0
        "m4": bisect_root(
            lambda m: math.exp(-m) + 2 * math.exp(m / 2) * math.cos(S3 * m / 2), 1.0, 2.0
        ),
        "m5": bisect_root(
            lambda m: math.exp(-m)
            - math.exp(m / 2) * (math.cos(S3 * m / 2) + S3 * math.sin(S3 * m / 2)),
            2.9,
            3.1,
        ),
        "m6": bisect_root(
            lambda m: math.exp(-m)
            - math.exp(m / 2) * (math.cos(S3 * m / 2) - S3 * math.sin(S3 * m / 2)),
            4.0,
            4.4,
        ),
        "m7": bisect_root(
            lambda m: math.cos(S3 * m)
            - math.cosh(m)
            + 8 * math.cos(S3 * m / 2) * math.sinh(m / 2) ** 2 * math.cosh(m / 2),
            5.3,
            5.6,
        ),
        "m8": bisect_root(_m8_eq, 4.0, 4.3),
        "m9": bisect_root(_m9_eq, 3.0, 3.3),
    }
