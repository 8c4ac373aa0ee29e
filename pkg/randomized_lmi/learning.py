"""Statistical learning bounds: VC dimension of the violation indicators,
sample complexity of the scenario design and the sequential validation
bound.

``lg`` is the base-2 logarithm, ``ln`` the natural one. VC bounds enter the
sample formulas unrounded; only the final sample counts are ceiled.
"""
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np


class ParameterError(ValueError):
    pass


@dataclass(frozen=True)
class ProbabilisticLevels:
    epsilon: float
    delta: float
    rho: float = 0.0

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ParameterError(
                f"epsilon must be in (0,1), got {self.epsilon}"
            )
        if not 0 < self.delta < 1:
            raise ParameterError(f"delta must be in (0,1), got {self.delta}")
        if not 0 <= self.rho < 1:
            raise ParameterError(f"rho must be in [0,1), got {self.rho}")


class BoundReport(NamedTuple):
    d: float
    N: int
    formula: str
    inputs: Dict[str, object]


def _positive(**values):
    for name, value in values.items():
        if value < 1:
            raise ParameterError(f"{name} must be >= 1, got {value}")


# ______________________________________________________________________________
# VC dimension


def boolean_vc_bound(gamma: int, eta: int, m_theta: int) -> float:
    """VC bound 2·m·lg(4eγη) of a (γ,η)-Boolean function family."""
    _positive(gamma=gamma, eta=eta, m_theta=m_theta)
    return 2 * m_theta * math.log2(4 * math.e * gamma * eta)


def vc_bound_strict(m_theta: int, n: int) -> float:
    """Strict inequalities: n leading minors of degree at most n."""
    return boolean_vc_bound(n, n, m_theta)


def vc_bound_nonstrict(m_theta: int, n: int) -> float:
    """Nonstrict inequalities: 2^n principal minors of degree at most n."""
    _positive(m_theta=m_theta, n=n)
    if n > 1000:
        raise ParameterError(f"n must be <= 1000, got {n}")
    return 2 * m_theta * (math.log2(4 * math.e * n) + n)


def vc_bound(m_theta: int, n: int, strict: bool) -> float:
    if strict:
        return vc_bound_strict(m_theta, n)
    return vc_bound_nonstrict(m_theta, n)


# ______________________________________________________________________________
# Sample complexity


def two_sided_failure_bound(N: int, epsilon: float, d: float) -> float:
    """4·e^{2ε}·(2eN/d)^d·e^{-Nε²}, evaluated in log space and clamped
    to [0, 1]."""
    _positive(N=N)
    if d <= 0:
        raise ParameterError(f"d must be positive, got {d}")
    log_bound = (
        math.log(4)
        + 2 * epsilon
        + d * math.log(2 * math.e * N / d)
        - N * epsilon**2
    )
    return math.exp(min(0.0, log_bound))


def sample_bound_two_sided(
    levels: ProbabilisticLevels, m_theta: int, n: int, strict: bool = True
) -> BoundReport:
    eps, delta = levels.epsilon, levels.delta
    d = vc_bound(m_theta, n, strict)
    raw = (
        1.2
        / eps**2
        * (math.log(4 * math.exp(2 * eps) / delta) + d * math.log(12 / eps**2))
    )
    return BoundReport(
        d,
        max(1, math.ceil(raw)),
        "two-sided",
        dict(levels=levels, m_theta=m_theta, n=n, strict=strict),
    )


def sample_bound_one_sided(
    levels: ProbabilisticLevels, m_theta: int, n: int, strict: bool = True
) -> BoundReport:
    eps, delta = levels.epsilon, levels.delta
    level = levels.rho + levels.epsilon
    d = vc_bound(m_theta, n, strict)
    raw = (
        5
        * level
        / eps**2
        * (math.log(4 / delta) + d * math.log(40 * level / eps**2))
    )
    return BoundReport(
        d,
        max(1, math.ceil(raw)),
        "one-sided",
        dict(levels=levels, m_theta=m_theta, n=n, strict=strict),
    )


def sample_bound(
    levels: ProbabilisticLevels,
    m_theta: int,
    n: int,
    strict: bool = True,
    sided: str = "one",
) -> BoundReport:
    if sided == "one":
        return sample_bound_one_sided(levels, m_theta, n, strict)
    if sided == "two":
        return sample_bound_two_sided(levels, m_theta, n, strict)
    raise ParameterError(f"sided must be 'one' or 'two', got {sided!r}")


# ______________________________________________________________________________
# Sequential validation


def default_constants(rho: float) -> Tuple[float, float]:
    """(a, α): (∞, 0.1) when ρ = 0, (3.05, 0.9) otherwise."""
    if rho == 0:
        return math.inf, 0.1
    return 3.05, 0.9


def p_series(k_t: int, alpha: float) -> float:
    """S_{k_t}(α) = Σ_{k=1}^{k_t} k^{-α}, summed directly."""
    _positive(k_t=k_t)
    if alpha <= 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    terms = np.arange(1, k_t + 1, dtype=float) ** -alpha
    return math.fsum(terms)


def _validation_denominator(levels: ProbabilisticLevels, a: float) -> float:
    level = levels.rho + levels.epsilon
    if math.isinf(a):
        if levels.rho != 0:
            raise ParameterError("a = inf is admitted only with rho = 0")
        return -math.log1p(-levels.epsilon)
    if a < 1:
        raise ParameterError(f"a must be >= 1, got {a}")
    inner = level * a ** (levels.rho - 1) + a**levels.rho * (1 - level)
    denominator = -math.log(inner)
    if denominator <= 0:
        raise ParameterError(
            f"vacuous validation bound for a={a} and levels {levels}"
        )
    return denominator


def validation_bound(
    k: int,
    k_t: int,
    levels: ProbabilisticLevels,
    alpha: Optional[float] = None,
    a: Optional[float] = None,
    series: Optional[float] = None,
) -> int:
    """Validation samples M_k needed at iteration k of k_t."""
    if not 1 <= k <= k_t:
        raise ParameterError(f"need 1 <= k <= k_t, got k={k}, k_t={k_t}")
    default_a, default_alpha = default_constants(levels.rho)
    a = default_a if a is None else a
    alpha = default_alpha if alpha is None else alpha
    if series is None:
        series = p_series(k_t, alpha)
    numerator = (
        alpha * math.log(k) + math.log(series) + math.log(1 / levels.delta)
    )
    return math.ceil(numerator / _validation_denominator(levels, a))


@dataclass(frozen=True)
class ValidationSchedule:
    k_t: int
    alpha: float
    a: float
    levels: ProbabilisticLevels
    series: float
    sizes: Tuple[int, ...] = field(repr=False)

    def __getitem__(self, k) -> int:
        """M_k, 1-based."""
        return self.sizes[k - 1]


def validation_schedule(
    k_t: int,
    levels: ProbabilisticLevels,
    alpha: Optional[float] = None,
    a: Optional[float] = None,
) -> ValidationSchedule:
    default_a, default_alpha = default_constants(levels.rho)
    a = default_a if a is None else a
    alpha = default_alpha if alpha is None else alpha
    series = p_series(k_t, alpha)
    sizes = tuple(
        validation_bound(k, k_t, levels, alpha, a, series)
        for k in range(1, k_t + 1)
    )
    return ValidationSchedule(k_t, alpha, a, levels, series, sizes)


def design_sample_schedule(N: int, k_t: int) -> List[int]:
    """N_k = ⌈N·k/k_t⌉ for k = 1..k_t."""
    _positive(N=N)
    if k_t < 2:
        raise ParameterError(f"k_t must be > 1, got {k_t}")
    return [-(-N * k // k_t) for k in range(1, k_t + 1)]


# ______________________________________________________________________________
# Bound tables

REFERENCE_LEVELS = [
    (0.2, 1e-2),
    (0.1, 1e-4),
    (0.05, 1e-6),
    (0.01, 1e-8),
    (0.005, 1e-10),
]

BOUND_COLUMNS = [
    "epsilon",
    "delta",
    "rho",
    "m_theta",
    "n",
    "strictness",
    "d",
    "N_two_sided",
    "N_one_sided",
]


def bound_row(levels: ProbabilisticLevels, m_theta, n, strict) -> Dict:
    one = sample_bound_one_sided(levels, m_theta, n, strict)
    two = sample_bound_two_sided(levels, m_theta, n, strict)
    return dict(
        epsilon=levels.epsilon,
        delta=levels.delta,
        rho=levels.rho,
        m_theta=m_theta,
        n=n,
        strictness="strict" if strict else "nonstrict",
        d=one.d,
        N_two_sided=two.N,
        N_one_sided=one.N,
    )


def bound_table(
    epsilons: Iterable[float],
    deltas: Iterable[float],
    m_thetas: Iterable[int],
    ns: Iterable[int],
    rho: float = 0.0,
    strictness: Iterable[bool] = (True, False),
) -> List[Dict]:
    """One row per grid point, strict and nonstrict."""
    deltas, m_thetas, ns, strictness = (
        list(deltas),
        list(m_thetas),
        list(ns),
        list(strictness),
    )
    return [
        bound_row(ProbabilisticLevels(eps, delta, rho), m, n, strict)
        for eps in epsilons
        for delta in deltas
        for m in m_thetas
        for n in ns
        for strict in strictness
    ]


def reference_rows(m_theta=13, n=11) -> List[Dict]:
    return [
        bound_row(ProbabilisticLevels(eps, delta), m_theta, n, True)
        for eps, delta in REFERENCE_LEVELS
    ]


def sweep_rows(m_theta=13, delta=1e-8) -> List[Dict]:
    epsilons = np.geomspace(0.005, 0.2, 25)
    return bound_table(epsilons.tolist(), [delta], [m_theta], [10, 50, 100])
