import math

import numpy as np
import pytest

from conftest import make_spec, t2_dirichlet, t4_base, t4_nc
from greensign.coeffexpr import eval_expr
from greensign.odecore import (
    IntegrationOverflowError,
    eval_solution,
    integrate_fundamental,
    markov_decomposition,
    wronskians,
)
from greensign.problem import ValidationError


def test_identity_snapshot_at_a():
    fs = integrate_fundamental(t4_base(), 0.0, steps=64)
    assert np.array_equal(fs.snapshots[0], np.eye(4))
    for i in range(1, 5):
        for j in range(4):
            assert eval_solution(fs, i, 0.0, j) == (1.0 if j == i - 1 else 0.0)


def test_polynomial_solutions_exact():
    # u'' = 0: columns are 1 and t - a; one RK4 step is exact for the
    # nilpotent companion matrix
    fs = integrate_fundamental(t2_dirichlet(), 0.0, steps=64)
    assert np.allclose(fs.snapshots[-1], [[1.0, 1.0], [0.0, 1.0]], atol=1e-15)


def test_quartic_primitive_column():
    fs = integrate_fundamental(t4_base(), 0.0, steps=128)
    for t in (0.25, 0.5, 1.0):
        assert eval_solution(fs, 4, t, 0) == pytest.approx(t**3 / 6.0, abs=1e-14)
    assert eval_solution(fs, 4, 0.77, 3) == pytest.approx(1.0, abs=1e-13)
    # order-n derivative comes from the differential relation
    assert eval_solution(fs, 4, 0.77, 4) == pytest.approx(0.0, abs=1e-13)


def test_sine_column_closed_form():
    fs = integrate_fundamental(t2_dirichlet(), math.pi**2, steps=4096)
    assert abs(eval_solution(fs, 2, 1.0, 0)) <= 1e-10  # sin(pi)/pi
    assert eval_solution(fs, 2, 1.0, 1) == pytest.approx(-1.0, abs=1e-9)  # cos(pi)
    # dense evaluation between nodes
    t = 0.333333311111
    assert eval_solution(fs, 2, t, 0) == pytest.approx(math.sin(math.pi * t) / math.pi, abs=1e-11)


def test_eval_solution_range_errors():
    fs = integrate_fundamental(t2_dirichlet(), 0.0, steps=64)
    with pytest.raises(ValueError):
        eval_solution(fs, 1, 1.5, 0)
    with pytest.raises(ValueError):
        eval_solution(fs, 1, 0.5, 3)
    with pytest.raises(ValueError):
        eval_solution(fs, 3, 0.5, 0)
    with pytest.raises(ValidationError):
        integrate_fundamental(t2_dirichlet(), 0.0, steps=32)


def test_wronskians_identity_and_constant():
    fs0 = integrate_fundamental(t2_dirichlet(), 0.0, steps=128)
    assert np.allclose(wronskians(fs0, 0.0), [1.0, 1.0])
    for t in (0.3, 0.75, 1.0):
        assert wronskians(fs0, t)[1] == pytest.approx(1.0, abs=1e-13)
    # u'' - u = 0 from identity data: cosh, sinh; W2 = cosh^2 - sinh^2 = 1
    fsm = integrate_fundamental(t2_dirichlet(), -1.0, steps=256)
    for t in (0.2, 0.7, 1.0):
        w = wronskians(fsm, t)
        assert w[0] == pytest.approx(math.cosh(t), rel=1e-10)
        assert w[1] == pytest.approx(1.0, rel=1e-10)


def test_markov_trivial_factors():
    fs = integrate_fundamental(t2_dirichlet(), 0.0, steps=128)
    dec = markov_decomposition(fs)
    assert dec.full and dec.window == (0.0, 1.0)
    assert np.allclose(dec.v[0], 1.0, atol=1e-13)
    assert np.allclose(dec.v[1], 1.0, atol=1e-12)


def test_markov_cosh_factors():
    fs = integrate_fundamental(t2_dirichlet(), -1.0, steps=256)
    dec = markov_decomposition(fs)
    assert dec.full
    t = dec.nodes
    assert np.allclose(dec.v[0], np.cosh(t), rtol=1e-10)
    assert np.allclose(dec.v[1], 1.0 / np.cosh(t) ** 2, rtol=1e-9)


def test_markov_positive_window_oscillating_first_derivative_term():
    # fourth order with a first-derivative coefficient at the edge of the
    # factorization range: the canonical system still has positive Wronskians
    nval = -math.pi / math.sqrt(3.0)
    spec = make_spec(4, (0, 2), (1, 2), p=["0", "0", repr(nval**3), "0"])
    dec = markov_decomposition(integrate_fundamental(spec, 0.0, steps=1024))
    assert dec.full
    assert dec.first_failure is None
    assert float(np.min(dec.v)) > 0.0


def test_markov_window_shrinks_and_reports_failure():
    # strong negative shift makes W2 of the sine system cross zero inside
    spec = t2_dirichlet()
    fs = integrate_fundamental(spec, (4.0 * math.pi) ** 2, steps=512)
    dec = markov_decomposition(fs)
    assert not dec.full
    t_fail, k_fail = dec.first_failure
    # W1 = cos(4 pi t) crosses at t = 1/8
    assert k_fail == 1
    assert t_fail == pytest.approx(0.125, abs=3e-3)
    assert dec.window[1] <= 0.125 + 3e-3


def test_liouville_wronskian_constancy():
    spec = t4_nc()
    steps = 2048
    fs = integrate_fundamental(spec, 0.0, steps=steps)
    w_n = np.linalg.det(fs.snapshots)
    half = np.linspace(0.0, 1.0, 2 * steps + 1)
    p1 = eval_expr(spec.p[0], half)
    h = 1.0 / steps
    cumulative = np.zeros(steps + 1)
    for i in range(1, steps + 1):
        cumulative[i] = cumulative[i - 1] + (h / 6.0) * (
            p1[2 * i - 2] + 4.0 * p1[2 * i - 1] + p1[2 * i]
        )
    product = w_n * np.exp(cumulative)
    assert np.max(np.abs(product - 1.0)) <= 1e-6


def test_step_halving_fourth_order_ratio():
    spec = t2_dirichlet()
    values = {}
    for steps in (64, 128, 256):
        fs = integrate_fundamental(spec, math.pi**2, steps=steps)
        values[steps] = eval_solution(fs, 2, 0.75, 0)
    first = abs(values[64] - values[128])
    second = abs(values[128] - values[256])
    assert 8.0 <= first / second <= 32.0


def test_overflow_guard():
    with pytest.raises(IntegrationOverflowError):
        integrate_fundamental(t2_dirichlet(), -1.0e10, steps=256)


def test_snapshots_read_only():
    fs = integrate_fundamental(t2_dirichlet(), 0.0, steps=64)
    with pytest.raises(ValueError):
        fs.snapshots[0, 0, 0] = 5.0
