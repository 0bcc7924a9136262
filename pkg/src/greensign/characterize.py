"""Constant-sign intervals, nonexistence flags and non-homogeneous variants.

The shift interval on which the kernel keeps one strict sign is bounded by
eigenvalues of the operator at its reference shift in the base space and in
the modified spaces that trade the top condition of one endpoint for the
lowest free derivative of the other.  All eigenvalue searches anchor at the
reference shift m_bar.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .coeffexpr import is_zero
from .greenfn import SIN, SIP
from .odecore import DEFAULT_STEPS, integrate_fundamental, markov_decomposition
from .problem import (
    ProblemSpec,
    SpaceDescriptor,
    SpaceVariant,
    build_space,
    check_na,
    derive_indices,
)
from .spectral import Direction, Eigenvalue, SearchConfig, find_eigenvalue

__all__ = [
    "NaViolationError",
    "TildeFormError",
    "SubsetError",
    "DisconjugacyError",
    "Endpoint",
    "EndpointProvenance",
    "SignCharacterization",
    "NecessaryInterval",
    "NonexistenceFlags",
    "constant_sign_interval",
    "nonexistence_check",
    "necessary_interval",
    "nonhomogeneous_interval",
    "closed_form_shifted_eigen",
]

CERTIFIED = "certified-by-decompose"
ASSERTED = "user-asserted"


class NaViolationError(ValueError):
    """The index sets fail the counting property; the reference is singular."""


class TildeFormError(ValueError):
    """Operator coefficients clash with the truncated form required here."""


class SubsetError(ValueError):
    """Relaxed-condition subsets violate their ordering constraints."""


class DisconjugacyError(RuntimeError):
    """The factorization certificate failed at the reference shift."""


@dataclass(frozen=True)
class Endpoint:
    value: Optional[float]
    closed: bool
    infinite: bool = False

    def render(self) -> str:
        if self.infinite:
            return "-inf"
        return f"{self.value:.6g}"


@dataclass(frozen=True)
class EndpointProvenance:
    name: str
    eigenvalue: Eigenvalue


@dataclass(frozen=True)
class SignCharacterization:
    """Exact parameter interval for one strict kernel sign.

    Endpoints are m_bar minus the located eigenvalues, bitwise; provenance
    records which eigenvalue and space produced each finite endpoint.
    """

    classification: str
    lower: Endpoint
    upper: Endpoint
    lower_provenance: Optional[EndpointProvenance]
    upper_provenance: Optional[EndpointProvenance]
    hypothesis: str
    warnings: tuple[str, ...] = ()

    def contains(self, m: float) -> bool:
        if not self.lower.infinite:
            if m < self.lower.value or (m == self.lower.value and not self.lower.closed):
                return False
        if not self.upper.infinite:
            if m > self.upper.value or (m == self.upper.value and not self.upper.closed):
                return False
        return True

    def render(self) -> str:
        lo = "(" if not self.lower.closed else "["
        hi = ")" if not self.upper.closed else "]"
        return f"{lo}{self.lower.render()}, {self.upper.render()}{hi}"


@dataclass(frozen=True)
class NecessaryInterval:
    """Necessary (not sufficient) shift range for the opposite kernel sign."""

    classification: str
    lower: Endpoint
    upper: Endpoint
    lower_provenance: Optional[EndpointProvenance]
    upper_provenance: Optional[EndpointProvenance]
    hypothesis: str
    sufficient: bool = False

    def render(self) -> str:
        lo = "(" if not self.lower.closed else "["
        hi = ")" if not self.upper.closed else "]"
        return f"{lo}{self.lower.render()}, {self.upper.render()}{hi}"


@dataclass(frozen=True)
class NonexistenceFlags:
    no_inverse_negative: bool
    no_inverse_positive: bool
    trigger: tuple[str, ...]


def _require_na(spec: ProblemSpec):
    if not check_na(spec.sigma, spec.epsilon, spec.n):
        raise NaViolationError(
            f"index sets sigma={spec.sigma}, epsilon={spec.epsilon} fail the counting "
            "property; the reference problem is singular and no interval exists"
        )


def _hypothesis(spec: ProblemSpec, td: str, steps: int) -> str:
    if td == "assert":
        return ASSERTED
    if td != "check":
        raise ValueError(f"td must be 'assert' or 'check', got {td!r}")
    fs = integrate_fundamental(spec, spec.m_bar, steps)
    dec = markov_decomposition(fs)
    if not dec.full:
        t_fail, k_fail = dec.first_failure
        raise DisconjugacyError(
            f"factorization certificate failed at the reference shift: W_{k_fail} <= 0 "
            f"at t={t_fail:.6g}; positivity holds only on [{dec.window[0]:.6g}, "
            f"{dec.window[1]:.6g}].  Pass td='assert' to proceed on your own authority."
        )
    return CERTIFIED


def _find(spec, space, direction, cfg, steps, name) -> EndpointProvenance:
    ev = find_eigenvalue(spec, space, direction, cfg, steps)
    return EndpointProvenance(name=name, eigenvalue=ev)


def _pick(records: Sequence[EndpointProvenance], want_max: bool) -> EndpointProvenance:
    key = lambda r: r.eigenvalue.lam
    return max(records, key=key) if want_max else min(records, key=key)


def constant_sign_interval(
    spec: ProblemSpec,
    cfg: Optional[SearchConfig] = None,
    td: str = "check",
    steps: int = DEFAULT_STEPS,
) -> SignCharacterization:
    """Exact interval of shifts with a strictly one-signed kernel.

    n-k even gives the strictly-positive interval (m_bar - lam1,
    m_bar - lam2]; n-k odd the strictly-negative [m_bar - lam2,
    m_bar - lam1), with the degenerate k = 1, k = n-1 and n = 2 branches
    dropping the eigenvalue their modified space does not support.
    """
    _require_na(spec)
    hypothesis = _hypothesis(spec, td, steps)
    n, k = spec.n, spec.k
    base = spec.base_space()
    even = (n - k) % 2 == 0
    warnings: list[str] = []

    if even:
        lam1 = _find(spec, base, Direction.LEAST_POSITIVE, cfg, steps, "lambda1")
        candidates = []
        if k > 1:
            candidates.append(
                _find(
                    spec,
                    build_space(spec, SpaceVariant.DROP_SIGMA_K_ADD_BETA),
                    Direction.BIGGEST_NEGATIVE,
                    cfg,
                    steps,
                    "lambda2_prime",
                )
            )
        if k < n - 1:
            candidates.append(
                _find(
                    spec,
                    build_space(spec, SpaceVariant.ADD_ALPHA_DROP_EPS_LAST),
                    Direction.BIGGEST_NEGATIVE,
                    cfg,
                    steps,
                    "lambda2_double_prime",
                )
            )
        lam2 = _pick(candidates, want_max=True)
        warnings.extend(lam1.eigenvalue.warnings + lam2.eigenvalue.warnings)
        return SignCharacterization(
            classification=SIP,
            lower=Endpoint(spec.m_bar - lam1.eigenvalue.lam, closed=False),
            upper=Endpoint(spec.m_bar - lam2.eigenvalue.lam, closed=True),
            lower_provenance=lam1,
            upper_provenance=lam2,
            hypothesis=hypothesis,
            warnings=tuple(warnings),
        )

    lam1 = _find(spec, base, Direction.BIGGEST_NEGATIVE, cfg, steps, "lambda1")
    if n == 2:
        return SignCharacterization(
            classification=SIN,
            lower=Endpoint(None, closed=False, infinite=True),
            upper=Endpoint(spec.m_bar - lam1.eigenvalue.lam, closed=False),
            lower_provenance=None,
            upper_provenance=lam1,
            hypothesis=hypothesis,
            warnings=tuple(lam1.eigenvalue.warnings),
        )
    candidates = []
    if k > 1:
        candidates.append(
            _find(
                spec,
                build_space(spec, SpaceVariant.DROP_SIGMA_K_ADD_BETA),
                Direction.LEAST_POSITIVE,
                cfg,
                steps,
                "lambda2_prime",
            )
        )
    if k < n - 1:
        candidates.append(
            _find(
                spec,
                build_space(spec, SpaceVariant.ADD_ALPHA_DROP_EPS_LAST),
                Direction.LEAST_POSITIVE,
                cfg,
                steps,
                "lambda2_double_prime",
            )
        )
    lam2 = _pick(candidates, want_max=False)
    warnings.extend(lam1.eigenvalue.warnings + lam2.eigenvalue.warnings)
    return SignCharacterization(
        classification=SIN,
        lower=Endpoint(spec.m_bar - lam2.eigenvalue.lam, closed=True),
        upper=Endpoint(spec.m_bar - lam1.eigenvalue.lam, closed=False),
        lower_provenance=lam2,
        upper_provenance=lam1,
        hypothesis=hypothesis,
        warnings=tuple(warnings),
    )


def nonexistence_check(spec: ProblemSpec) -> NonexistenceFlags:
    """Flags for signs no shift can ever achieve, per the initial-segment test."""
    n, k = spec.n, spec.k
    trigger = []
    if spec.sigma[-1] == k - 1:
        trigger.append("sigma_k == k-1")
    if spec.epsilon[-1] == (n - k) - 1:
        trigger.append("eps_last == n-k-1")
    fired = bool(trigger)
    even = (n - k) % 2 == 0
    return NonexistenceFlags(
        no_inverse_negative=fired and even,
        no_inverse_positive=fired and not even,
        trigger=tuple(trigger),
    )


def necessary_interval(
    spec: ProblemSpec,
    cfg: Optional[SearchConfig] = None,
    td: str = "check",
    steps: int = DEFAULT_STEPS,
) -> Optional[NecessaryInterval]:
    """Necessary shift range for the opposite-parity sign, or None.

    Returns None when one of the index sets is an initial segment (the
    nonexistence flags apply and no shift can give that sign).  The result
    is necessary only; it carries sufficient=False.
    """
    _require_na(spec)
    n, k = spec.n, spec.k
    if spec.sigma[-1] == k - 1 or spec.epsilon[-1] == (n - k) - 1:
        return None
    hypothesis = _hypothesis(spec, td, steps)
    even = (n - k) % 2 == 0
    direction = Direction.LEAST_POSITIVE if even else Direction.BIGGEST_NEGATIVE
    lam1 = _find(spec, spec.base_space(), direction, cfg, steps, "lambda1")
    lam3p = _find(
        spec,
        build_space(spec, SpaceVariant.DROP_SIGMA_K_ADD_ALPHA),
        direction,
        cfg,
        steps,
        "lambda3_prime",
    )
    lam3pp = _find(
        spec,
        build_space(spec, SpaceVariant.DROP_EPS_LAST_ADD_BETA),
        direction,
        cfg,
        steps,
        "lambda3_double_prime",
    )
    lam3 = _pick([lam3p, lam3pp], want_max=not even)
    if even:
        return NecessaryInterval(
            classification=SIN,
            lower=Endpoint(spec.m_bar - lam3.eigenvalue.lam, closed=True),
            upper=Endpoint(spec.m_bar - lam1.eigenvalue.lam, closed=False),
            lower_provenance=lam3,
            upper_provenance=lam1,
            hypothesis=hypothesis,
        )
    return NecessaryInterval(
        classification=SIP,
        lower=Endpoint(spec.m_bar - lam1.eigenvalue.lam, closed=False),
        upper=Endpoint(spec.m_bar - lam3.eigenvalue.lam, closed=True),
        lower_provenance=lam1,
        upper_provenance=lam3,
        hypothesis=hypothesis,
    )


def _validate_subset(subset, members, top, mu, what) -> tuple[int, ...]:
    sub = tuple(sorted(set(int(v) for v in subset)))
    if len(sub) != len(tuple(subset)):
        raise SubsetError(f"{what} subset has duplicates: {tuple(subset)}")
    if not sub:
        raise SubsetError(f"{what} subset must not be empty")
    if not set(sub) <= set(members):
        raise SubsetError(f"{what} subset {sub} is not contained in {members}")
    if sub[-1] != top:
        raise SubsetError(f"{what} subset must contain the top condition {top}")
    for v in sub[:-1]:
        if v >= mu:
            raise SubsetError(
                f"{what} subset member {v} must lie below mu={mu} "
                "(only conditions under the coefficient gap may be relaxed)"
            )
    return sub


def nonhomogeneous_interval(
    spec: ProblemSpec,
    sigma_subset: Sequence[int],
    epsilon_subset: Sequence[int],
    cfg: Optional[SearchConfig] = None,
    td: str = "check",
    steps: int = DEFAULT_STEPS,
) -> SignCharacterization:
    """Sign interval when the chosen conditions become one-sided inequalities.

    The singleton subsets {sigma_k}, {eps_last} reproduce the homogeneous
    interval exactly.  Larger subsets need the truncated operator form
    (coefficients p_{n-mu}..p_n identically zero) and only their smallest
    members feed the second endpoint, per the eigenvalue orderings across
    subset members.
    """
    _require_na(spec)
    ind = derive_indices(spec)
    n, k = spec.n, spec.k
    sig_sub = _validate_subset(sigma_subset, spec.sigma, spec.sigma[-1], ind.mu, "sigma")
    eps_sub = _validate_subset(epsilon_subset, spec.epsilon, spec.epsilon[-1], ind.mu, "epsilon")
    if sig_sub == (spec.sigma[-1],) and eps_sub == (spec.epsilon[-1],):
        return constant_sign_interval(spec, cfg, td, steps)

    for j in range(max(1, n - ind.mu), n + 1):
        if not is_zero(spec.p[j - 1]):
            raise TildeFormError(
                f"coefficient p{j} must be syntactically zero for relaxed subsets "
                f"(truncated form requires p{max(1, n - ind.mu)}..p{n} absent)"
            )

    hypothesis = _hypothesis(spec, td, steps)
    even = (n - k) % 2 == 0
    dir1 = Direction.LEAST_POSITIVE if even else Direction.BIGGEST_NEGATIVE
    dir2 = Direction.BIGGEST_NEGATIVE if even else Direction.LEAST_POSITIVE
    lam1 = _find(spec, spec.base_space(), dir1, cfg, steps, "lambda1")

    def sigma_side() -> EndpointProvenance:
        space = SpaceDescriptor(
            tuple(x for x in spec.sigma if x != sig_sub[0]),
            tuple(sorted(spec.epsilon + (ind.beta,))),
        )
        return _find(spec, space, dir2, cfg, steps, "lambda2_sigma")

    def epsilon_side() -> EndpointProvenance:
        space = SpaceDescriptor(
            tuple(sorted(spec.sigma + (ind.alpha,))),
            tuple(x for x in spec.epsilon if x != eps_sub[0]),
        )
        return _find(spec, space, dir2, cfg, steps, "lambda2_epsilon")

    if even:
        candidates = [epsilon_side()] if k == 1 else [sigma_side(), epsilon_side()]
        lam2 = _pick(candidates, want_max=True)
        return SignCharacterization(
            classification=SIP,
            lower=Endpoint(spec.m_bar - lam1.eigenvalue.lam, closed=False),
            upper=Endpoint(spec.m_bar - lam2.eigenvalue.lam, closed=True),
            lower_provenance=lam1,
            upper_provenance=lam2,
            hypothesis=hypothesis,
        )
    if k == 1:
        candidates = [epsilon_side()]
    elif k == n - 1:
        candidates = [sigma_side()]
    else:
        candidates = [sigma_side(), epsilon_side()]
    lam2 = _pick(candidates, want_max=False)
    return SignCharacterization(
        classification=SIN,
        lower=Endpoint(spec.m_bar - lam2.eigenvalue.lam, closed=True),
        upper=Endpoint(spec.m_bar - lam1.eigenvalue.lam, closed=False),
        lower_provenance=lam2,
        upper_provenance=lam1,
        hypothesis=hypothesis,
    )


def closed_form_shifted_eigen(p: float, a: float, b: float) -> float:
    """Least positive eigenvalue of u'''' - p u'' under simple support.

    Closed form (pi/(b-a))**4 + p*(pi/(b-a))**2, used as an independent
    oracle against the determinant search for p >= 0.
    """
    if p < 0:
        raise ValueError(f"p must be >= 0, got {p}")
    w = math.pi / (b - a)
    return w**4 + p * w**2
