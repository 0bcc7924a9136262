"""Problem specification, boundary index bookkeeping and adjoint conditions.

A problem is the operator u^(n) + p1(t) u^(n-1) + ... + (pn(t) + M) u on
[a, b] together with vanishing-derivative conditions u^(s)(a) = 0 for s in
sigma and u^(e)(b) = 0 for e in epsilon.  Everything downstream (eigenvalue
searches, Green's functions, sign intervals) is phrased in terms of the
index sets derived here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .coeffexpr import (
    CoefficientExpr,
    Const,
    DomainError,
    derivatives,
    eval_expr,
    unparse,
    _add,
    _mul,
    _neg,
    _sub,
)

__all__ = [
    "ValidationError",
    "SpaceCollisionError",
    "ProblemSpec",
    "DerivedIndices",
    "BoundaryFunctional",
    "SpaceDescriptor",
    "SpaceVariant",
    "AdjointOperator",
    "check_na",
    "derive_indices",
    "build_space",
    "adjoint_boundary_conditions",
    "adjoint_operator",
    "greens_matrix_coeffs",
]


class ValidationError(ValueError):
    """A problem specification violates its invariants."""


class SpaceCollisionError(ValueError):
    """Requested space modification is undefined for these index sets."""


def _as_index_set(values: Sequence[int], n: int, what: str) -> tuple[int, ...]:
    out = tuple(sorted(set(int(v) for v in values)))
    if len(out) != len(tuple(values)):
        raise ValidationError(f"{what} has duplicate entries: {tuple(values)}")
    if out and (out[0] < 0 or out[-1] > n - 1):
        raise ValidationError(f"{what} entries must lie in 0..{n - 1}: {out}")
    return out


@dataclass(frozen=True)
class SpaceDescriptor:
    """Index sets (sigma_set at a, epsilon_set at b) naming a boundary-value space."""

    sigma_set: tuple[int, ...]
    epsilon_set: tuple[int, ...]

    def __post_init__(self):
        if not self.sigma_set and not self.epsilon_set:
            raise ValidationError("space needs at least one condition")
        n = len(self.sigma_set) + len(self.epsilon_set)
        object.__setattr__(self, "sigma_set", _as_index_set(self.sigma_set, n, "sigma_set"))
        object.__setattr__(self, "epsilon_set", _as_index_set(self.epsilon_set, n, "epsilon_set"))

    def label(self) -> str:
        return f"X[{list(self.sigma_set)};{list(self.epsilon_set)}]"


@dataclass(frozen=True)
class BoundaryFunctional:
    """Linear condition c0*v + c1*v' + ... + c_{n-1}*v^(n-1) = 0 at one endpoint.

    Coefficients are normalized so the highest-order one equals 1.
    """

    endpoint: str  # "a" or "b"
    coefficients: tuple[float, ...]

    def __post_init__(self):
        if self.endpoint not in ("a", "b"):
            raise ValidationError(f"endpoint must be 'a' or 'b', got {self.endpoint!r}")
        coeffs = [float(c) for c in self.coefficients]
        if not any(c != 0.0 for c in coeffs):
            raise ValidationError("boundary functional has all-zero coefficients")
        top = max(d for d, c in enumerate(coeffs) if c != 0.0)
        lead = coeffs[top]
        object.__setattr__(self, "coefficients", tuple(c / lead for c in coeffs))

    @property
    def order(self) -> int:
        """Highest derivative order with a nonzero coefficient."""
        for d in range(len(self.coefficients) - 1, -1, -1):
            if self.coefficients[d] != 0.0:
                return d
        raise AssertionError("unreachable")


@dataclass(frozen=True)
class ProblemSpec:
    """Operator order, interval, coefficients, reference shift and index sets.

    p[j-1] is the coefficient of u^(n-j); the shift M is added to p[n-1].
    """

    n: int
    a: float
    b: float
    p: tuple[CoefficientExpr, ...]
    m_bar: float
    sigma: tuple[int, ...]
    epsilon: tuple[int, ...]

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError(f"order must be >= 2, got {self.n}")
        if not (math.isfinite(self.a) and math.isfinite(self.b) and self.a < self.b):
            raise ValidationError(f"need a < b, got [{self.a}, {self.b}]")
        if len(self.p) != self.n:
            raise ValidationError(f"expected {self.n} coefficients, got {len(self.p)}")
        object.__setattr__(self, "p", tuple(self.p))
        sigma = _as_index_set(self.sigma, self.n, "sigma")
        epsilon = _as_index_set(self.epsilon, self.n, "epsilon")
        k = len(sigma)
        if not (1 <= k <= self.n - 1):
            raise ValidationError(f"need 1 <= |sigma| <= n-1, got {k}")
        if k + len(epsilon) != self.n:
            raise ValidationError(
                f"|sigma| + |epsilon| must equal n={self.n}, got {k}+{len(epsilon)}"
            )
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "epsilon", epsilon)
        self._spot_check_coefficients()

    def _spot_check_coefficients(self):
        grid = np.linspace(self.a, self.b, 64)
        for j, expr in enumerate(self.p, start=1):
            try:
                for d, deriv in enumerate(derivatives(expr, self.n - j)):
                    eval_expr(deriv, grid)
            except DomainError as exc:
                raise ValidationError(
                    f"coefficient p{j} is not finitely evaluable (derivative {d}) "
                    f"on [{self.a}, {self.b}]: {exc}"
                ) from exc

    @property
    def k(self) -> int:
        return len(self.sigma)

    def base_space(self) -> SpaceDescriptor:
        return SpaceDescriptor(self.sigma, self.epsilon)

    def fingerprint(self) -> tuple:
        return (
            self.n,
            self.a,
            self.b,
            self.m_bar,
            tuple(unparse(e) for e in self.p),
            self.sigma,
            self.epsilon,
        )


@dataclass(frozen=True)
class DerivedIndices:
    """Secondary indices computed from (sigma, epsilon, n).

    alpha/beta: lowest derivative order at a (resp. b) not forced to vanish.
    eta/gamma: the same for the adjoint sets tau/delta.
    alpha2/beta2: top of the contiguous run of conditions ending at the
    largest member (-1 sentinel when the set is an initial segment).
    mu = max(alpha2, beta2) bounds which conditions may be relaxed to
    inequalities in the non-homogeneous characterization.
    """

    alpha: int
    beta: int
    eta: int
    gamma: int
    tau: tuple[int, ...]
    delta: tuple[int, ...]
    alpha2: int
    beta2: int
    mu: int


def check_na(sigma: Sequence[int], epsilon: Sequence[int], n: int) -> bool:
    """Counting condition: enough low-order conditions at every level h.

    True iff for every h in 1..n-1 the number of sigma entries below h plus
    the number of epsilon entries below h is at least h.
    """
    sigma = set(sigma)
    epsilon = set(epsilon)
    for h in range(1, n):
        have = sum(1 for s in sigma if s < h) + sum(1 for e in epsilon if e < h)
        if have < h:
            return False
    return True


def _mex(indices: Sequence[int]) -> int:
    """Smallest non-negative integer not in the set."""
    members = set(indices)
    m = 0
    while m in members:
        m += 1
    return m


def _complement_reflect(indices: Sequence[int], n: int) -> tuple[int, ...]:
    members = set(indices)
    return tuple(sorted(n - 1 - c for c in range(n) if c not in members))


def _top_gap(indices: Sequence[int]) -> int:
    """Largest index below max(indices) not in the set, or -1 if none."""
    members = set(indices)
    top = max(members)
    for i in range(top - 1, -1, -1):
        if i not in members:
            return i
    return -1


def derive_indices(spec: ProblemSpec) -> DerivedIndices:
    n, sigma, epsilon = spec.n, spec.sigma, spec.epsilon
    alpha = _mex(sigma)
    beta = _mex(epsilon)
    eta = n - 1 - sigma[-1]
    gamma = n - 1 - epsilon[-1]
    tau = _complement_reflect(sigma, n)
    delta = _complement_reflect(epsilon, n)
    # alpha must agree with the reflected complements; both computations are
    # kept and cross-checked.
    if alpha != n - 1 - tau[-1] or beta != n - 1 - delta[-1]:
        raise AssertionError(
            f"index cross-check failed: alpha={alpha}, tau={tau}, beta={beta}, delta={delta}"
        )
    alpha2 = _top_gap(sigma)
    beta2 = _top_gap(epsilon)
    return DerivedIndices(
        alpha=alpha,
        beta=beta,
        eta=eta,
        gamma=gamma,
        tau=tau,
        delta=delta,
        alpha2=alpha2,
        beta2=beta2,
        mu=max(alpha2, beta2),
    )


class SpaceVariant(Enum):
    BASE = "base"
    DROP_SIGMA_K_ADD_BETA = "drop-sigma-add-beta"
    ADD_ALPHA_DROP_EPS_LAST = "add-alpha-drop-eps"
    DROP_SIGMA_K_ADD_ALPHA = "drop-sigma-add-alpha"
    DROP_EPS_LAST_ADD_BETA = "drop-eps-add-beta"
    CUSTOM = "custom"


def _insert(indices: tuple[int, ...], value: int, what: str) -> tuple[int, ...]:
    if value in indices:
        raise SpaceCollisionError(f"{what}: index {value} already present in {indices}")
    return tuple(sorted(indices + (value,)))


def _drop_last(indices: tuple[int, ...]) -> tuple[int, ...]:
    return indices[:-1]


def build_space(
    spec: ProblemSpec,
    variant: SpaceVariant,
    custom_sigma: Optional[Sequence[int]] = None,
    custom_epsilon: Optional[Sequence[int]] = None,
) -> SpaceDescriptor:
    """Construct the base space or one of its four canonical modifications.

    DROP_SIGMA_K_ADD_ALPHA and DROP_EPS_LAST_ADD_BETA are undefined when the
    respective index set is an initial segment (sigma_k = k-1, resp.
    eps_last = n-k-1); a SpaceCollisionError is raised in that case.
    """
    ind = derive_indices(spec)
    sigma, epsilon = spec.sigma, spec.epsilon
    k, n = spec.k, spec.n
    if variant is SpaceVariant.BASE:
        return SpaceDescriptor(sigma, epsilon)
    if variant is SpaceVariant.DROP_SIGMA_K_ADD_BETA:
        return SpaceDescriptor(_drop_last(sigma), _insert(epsilon, ind.beta, "add beta"))
    if variant is SpaceVariant.ADD_ALPHA_DROP_EPS_LAST:
        return SpaceDescriptor(_insert(sigma, ind.alpha, "add alpha"), _drop_last(epsilon))
    if variant is SpaceVariant.DROP_SIGMA_K_ADD_ALPHA:
        if sigma[-1] == k - 1:
            raise SpaceCollisionError(
                "drop-sigma-add-alpha undefined when sigma is the initial segment "
                f"{sigma} (alpha={ind.alpha} would close it back up)"
            )
        return SpaceDescriptor(_insert(_drop_last(sigma), ind.alpha, "add alpha"), epsilon)
    if variant is SpaceVariant.DROP_EPS_LAST_ADD_BETA:
        if epsilon[-1] == (n - k) - 1:
            raise SpaceCollisionError(
                "drop-eps-add-beta undefined when epsilon is the initial segment "
                f"{epsilon} (beta={ind.beta} would close it back up)"
            )
        return SpaceDescriptor(sigma, _insert(_drop_last(epsilon), ind.beta, "add beta"))
    if variant is SpaceVariant.CUSTOM:
        if custom_sigma is None or custom_epsilon is None:
            raise ValidationError("custom variant needs custom_sigma and custom_epsilon")
        return SpaceDescriptor(tuple(custom_sigma), tuple(custom_epsilon))
    raise ValidationError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# Adjoint boundary conditions and the adjoint operator
# ---------------------------------------------------------------------------


def _functional_coefficients(
    spec: ProblemSpec,
    order: int,
    at: float,
    reduce_below: int,
    p_derivs: list[list[CoefficientExpr]],
) -> tuple[float, ...]:
    """Coefficient vector of the adjoint condition with leading order `order`.

    The condition is v^(order) + sum over lower orders of Leibniz terms in
    the p_j and their derivatives, evaluated at `at`.  Coefficients on
    derivatives below `reduce_below` are dropped: those orders already carry
    pure vanishing conditions, so the reduced set is equivalent.
    """
    n = spec.n
    coeffs = [0.0] * n
    coeffs[order] = 1.0
    for m in range(order):  # derivative order of (p * v) term
        jj = order - m  # index of the coefficient p_jj, 1-based
        sign = -1.0 if jj % 2 else 1.0
        for i in range(m + 1):
            deriv = p_derivs[jj - 1][m - i]
            value = eval_expr(deriv, at)
            coeffs[i] += sign * math.comb(m, i) * value
    for i in range(min(reduce_below, n)):
        if i != order:
            coeffs[i] = 0.0
    return tuple(coeffs)


def adjoint_boundary_conditions(spec: ProblemSpec) -> tuple[BoundaryFunctional, ...]:
    """Conditions satisfied by the adjoint problem: n-k functionals at a
    (leading orders tau) followed by k functionals at b (leading orders
    delta).  Leibniz coefficients are computed symbolically and evaluated
    at the endpoint; each functional's leading coefficient is 1.
    """
    ind = derive_indices(spec)
    max_order = max(ind.tau[-1], ind.delta[-1], 0)
    p_derivs = [derivatives(expr, max_order) for expr in spec.p]
    out = []
    for t_ord in ind.tau:
        out.append(
            BoundaryFunctional(
                "a",
                _functional_coefficients(spec, t_ord, spec.a, ind.eta, p_derivs),
            )
        )
    for d_ord in ind.delta:
        out.append(
            BoundaryFunctional(
                "b",
                _functional_coefficients(spec, d_ord, spec.b, ind.gamma, p_derivs),
            )
        )
    return tuple(out)


@dataclass(frozen=True)
class AdjointOperator:
    """The adjoint problem, normalized to unit leading coefficient.

    The normalized operator is v^(n) + q1 v^(n-1) + ... + (qn + m_sign*M) v,
    where m_sign = (-1)^n; its Green's function times m_sign is the adjoint
    Green's function, i.e. the transpose of the base one.
    """

    base: ProblemSpec
    p: tuple[CoefficientExpr, ...]
    m_sign: int
    functionals: tuple[BoundaryFunctional, ...]

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def a(self) -> float:
        return self.base.a

    @property
    def b(self) -> float:
        return self.base.b

    @property
    def m_bar(self) -> float:
        return self.base.m_bar

    def fingerprint(self) -> tuple:
        return ("adjoint",) + self.base.fingerprint()


def adjoint_operator(spec: ProblemSpec) -> AdjointOperator:
    """Build the normalized adjoint operator and its boundary functionals."""
    n = spec.n
    sign_n = -1.0 if n % 2 else 1.0
    p_derivs = [derivatives(expr, n - 1) for expr in spec.p]
    coeff_of = [Const(0.0) for _ in range(n)]  # coeff_of[i] multiplies v^(i)
    for j in range(1, n):
        sign = Const(-1.0 if (n + j) % 2 else 1.0)
        for i in range(j + 1):
            term = _mul(sign, _mul(Const(float(math.comb(j, i))), p_derivs[n - j - 1][j - i]))
            coeff_of[i] = _add(coeff_of[i], term)
    coeff_of[0] = _add(coeff_of[0], _mul(Const(sign_n), spec.p[n - 1]))
    q = tuple(coeff_of[n - jj] for jj in range(1, n + 1))
    return AdjointOperator(
        base=spec,
        p=q,
        m_sign=int(sign_n),
        functionals=adjoint_boundary_conditions(spec),
    )


# ---------------------------------------------------------------------------
# Green's-matrix coefficient recurrence
# ---------------------------------------------------------------------------


def greens_matrix_coeffs(spec: ProblemSpec, j: int) -> tuple[CoefficientExpr, ...]:
    """Symbolic coefficients alpha_i^j, i = 0..j-1, of the derivative
    recurrence that expresses the lower Green's-matrix rows through the
    scalar kernel.  Level j+1 follows from level j by
    alpha_0 -> p_{j+1} - alpha_0' and alpha_i -> -(alpha_{i-1} + alpha_i').
    """
    if not (1 <= j <= spec.n - 1):
        raise ValidationError(f"need 1 <= j <= n-1, got j={j}")
    from .coeffexpr import differentiate

    level: list[CoefficientExpr] = []
    for step in range(j):
        new = [None] * (step + 1)
        prev0 = level[0] if level else Const(0.0)
        new[0] = _sub(spec.p[step], differentiate(prev0))
        for i in range(1, step + 1):
            below = level[i - 1]
            same = differentiate(level[i]) if i < len(level) else Const(0.0)
            new[i] = _neg(_add(below, same))
        level = new
    return tuple(level)
