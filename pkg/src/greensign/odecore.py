"""Fundamental systems, Wronskians and the first-order factor decomposition.

Integration is classical fixed-step RK4 over the companion system; dense
values between nodes come from a single RK4 step of the remaining fraction,
which preserves the order of the method.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import _kernels
from .coeffexpr import eval_expr
from .problem import AdjointOperator, ProblemSpec, ValidationError

__all__ = [
    "IntegrationOverflowError",
    "WronskianCollapseError",
    "FundamentalSystem",
    "MarkovDecomposition",
    "integrate_fundamental",
    "eval_solution",
    "wronskians",
    "markov_decomposition",
]

DEFAULT_STEPS = 4096

Operator = Union[ProblemSpec, AdjointOperator]


class IntegrationOverflowError(ArithmeticError):
    """A state magnitude exceeded the 1e300 stiffness guard."""


class WronskianCollapseError(ArithmeticError):
    """The full Wronskian lost its sign, so the integration is untrustworthy."""


_coeff_cache: dict[tuple, np.ndarray] = {}


def coefficient_samples(op: Operator, steps: int) -> np.ndarray:
    """Half-step-grid samples carr[j, i] = coefficient of u^(i) at t_j.

    carr[:, i] holds p_{n-i}; the shift M is not included (the kernels add
    it to the u coefficient).  Cached per operator and step count.
    """
    key = (op.fingerprint(), steps)
    cached = _coeff_cache.get(key)
    if cached is not None:
        return cached
    n = op.n
    half_grid = np.linspace(op.a, op.b, 2 * steps + 1)
    carr = np.empty((2 * steps + 1, n))
    for i in range(n):
        carr[:, i] = eval_expr(op.p[n - 1 - i], half_grid)
    carr.flags.writeable = False
    _coeff_cache[key] = carr
    return carr


@dataclass(frozen=True)
class FundamentalSystem:
    """Canonical fundamental matrix on a uniform node grid.

    Column c (1-based) is the solution with u^(c-1)(a) = 1 and all other
    derivatives zero at a; snapshots[k] stacks (u, u', ..., u^(n-1)) of all
    columns at node k.  The snapshot at a is exactly the identity.
    """

    op: Operator
    m: float
    steps: int
    nodes: np.ndarray  # (steps+1,)
    snapshots: np.ndarray  # (steps+1, n, n)

    @property
    def n(self) -> int:
        return self.op.n

    @property
    def a(self) -> float:
        return self.op.a

    @property
    def b(self) -> float:
        return self.op.b

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.steps


def integrate_fundamental(op: Operator, m: float, steps: int = DEFAULT_STEPS) -> FundamentalSystem:
    """Integrate the companion system from identity data at a.

    Args:
        op: problem (or normalized adjoint operator) supplying coefficients.
        m: shift added to the u coefficient.
        steps: number of RK4 steps, at least 64.
    """
    if steps < 64:
        raise ValidationError(f"steps must be >= 64, got {steps}")
    carr = coefficient_samples(op, steps)
    h = (op.b - op.a) / steps
    status, snaps = _kernels.rk4_snapshots(carr, m, h, steps, stride=1)
    if status != 0:
        raise IntegrationOverflowError(
            f"state magnitude exceeded {_kernels.OVERFLOW_LIMIT:g} during integration "
            f"(m={m!r}); the problem is too stiff for this interval"
        )
    # the full Wronskian equals exp(-integral of the (n-1)-coefficient), so a
    # zero or sign flip on the grid can only come from numerical collapse
    full_wronskian = np.linalg.det(snaps)
    if not np.all(full_wronskian > 0.0):
        bad = int(np.argmax(full_wronskian <= 0.0))
        raise WronskianCollapseError(
            f"full Wronskian reached {full_wronskian[bad]:g} at "
            f"t={op.a + bad * h:.6g}; increase steps or shrink the interval"
        )
    nodes = np.linspace(op.a, op.b, steps + 1)
    nodes.flags.writeable = False
    snaps.flags.writeable = False
    return FundamentalSystem(op=op, m=m, steps=steps, nodes=nodes, snapshots=snaps)


def _dense_step(fs: FundamentalSystem, state: np.ndarray, t0: float, dt: float) -> np.ndarray:
    """One RK4 step of size dt from t0, evaluating coefficients on the fly."""
    n = fs.n
    op = fs.op

    def rhs(t, y):
        out = np.empty_like(y)
        out[:-1] = y[1:]
        coeffs = np.array([eval_expr(op.p[n - 1 - i], t) for i in range(n)])
        out[-1] = -(coeffs @ y + fs.m * y[0])
        return out

    k1 = rhs(t0, state)
    k2 = rhs(t0 + 0.5 * dt, state + 0.5 * dt * k1)
    k3 = rhs(t0 + 0.5 * dt, state + 0.5 * dt * k2)
    k4 = rhs(t0 + dt, state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def state_at(fs: FundamentalSystem, t: float) -> np.ndarray:
    """Full (n, n) state matrix at t, via the nearest left node."""
    if not (fs.a <= t <= fs.b):
        raise ValueError(f"t={t} outside [{fs.a}, {fs.b}]")
    idx = int(np.floor((t - fs.a) / fs.h))
    idx = min(max(idx, 0), fs.steps)
    t_node = fs.nodes[idx]
    state = fs.snapshots[idx]
    if t == t_node:
        return state.copy()
    return _dense_step(fs, state.copy(), t_node, t - t_node)


def eval_solution(fs: FundamentalSystem, column: int, t: float, d: int = 0) -> float:
    """d-th derivative of a fundamental column at t.

    column is 1-based; d may equal n, in which case the value comes from
    the differential relation u^(n) = -(sum p_j u^(n-j)) - m u.
    """
    n = fs.n
    if not (1 <= column <= n):
        raise ValueError(f"column must be in 1..{n}, got {column}")
    if not (0 <= d <= n):
        raise ValueError(f"derivative order must be in 0..{n}, got {d}")
    state = state_at(fs, t)[:, column - 1]
    if d < n:
        return float(state[d])
    coeffs = np.array([eval_expr(fs.op.p[n - 1 - i], t) for i in range(n)])
    return float(-(coeffs @ state + fs.m * state[0]))


def wronskians(fs: FundamentalSystem, t: float) -> np.ndarray:
    """W_1..W_n at t: determinants of the leading principal blocks."""
    state = state_at(fs, t)
    return np.array([np.linalg.det(state[:k, :k]) for k in range(1, fs.n + 1)])


@dataclass(frozen=True)
class MarkovDecomposition:
    """Samples of the positive first-order factors v_1..v_n.

    window is the maximal interval [a, t_end] on which every leading
    Wronskian stayed strictly positive; the factors are only meaningful
    there.  first_failure reports the first offending node (t, k) when the
    window is not the whole interval.
    """

    nodes: np.ndarray  # (m,)
    v: np.ndarray  # (n, m)
    window: tuple[float, float]
    full: bool
    first_failure: Optional[tuple[float, int]]


def markov_decomposition(fs: FundamentalSystem) -> MarkovDecomposition:
    """Factor samples v_1 = W_1, v_k = W_k W_{k-2} / W_{k-1}^2 (W_0 = 1)."""
    n = fs.n
    snaps = fs.snapshots
    w = np.empty((snaps.shape[0], n))
    for k in range(1, n + 1):
        w[:, k - 1] = np.linalg.det(snaps[:, :k, :k])
    bad = np.where(np.any(w <= 0.0, axis=1))[0]
    if bad.size:
        stop = int(bad[0])
        k_bad = int(np.argmax(w[stop] <= 0.0)) + 1
        first_failure = (float(fs.nodes[stop]), k_bad)
        full = False
    else:
        stop = snaps.shape[0]
        first_failure = None
        full = True
    if stop == 0:
        raise AssertionError("identity snapshot at a cannot have W <= 0")
    nodes = fs.nodes[:stop].copy()
    wk = w[:stop]
    v = np.empty((n, stop))
    v[0] = wk[:, 0]
    for k in range(2, n + 1):
        w_km2 = wk[:, k - 3] if k >= 3 else np.ones(stop)
        v[k - 1] = wk[:, k - 1] * w_km2 / wk[:, k - 2] ** 2
    nodes.flags.writeable = False
    v.flags.writeable = False
    return MarkovDecomposition(
        nodes=nodes,
        v=v,
        window=(fs.a, float(nodes[-1])),
        full=full,
        first_failure=first_failure,
    )
