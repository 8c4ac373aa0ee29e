"""Seeded i.i.d. multisamples over the parameter box and empirical
violation estimates."""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional

import numpy as np
import scipy.stats
from more_itertools import chunked

from .problem import ParamTable, UncertainProblem, indicators

logger = logging.getLogger(__name__)

PURPOSES = {"design": 0, "validation": 1, "audit": 2, "restart": 3}
CHUNK_SIZE = 4096


def stream(seed: int, purpose: str, k: int = 0) -> np.random.Generator:
    """Independent generator for (master seed, purpose, k).

    The purpose and the iteration enter the spawn key, so streams of
    different purposes never overlap even with the same master seed.
    """
    try:
        code = PURPOSES[purpose]
    except KeyError:
        raise ValueError(f"unknown purpose {purpose!r}") from None
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(code, k))
    return np.random.default_rng(sequence)


@dataclass(frozen=True, eq=False)
class ScenarioSet:
    names: List[str]
    samples: np.ndarray
    seed: Optional[int] = None
    purpose: str = "design"
    k: int = 0
    distribution: str = "uniform"

    def __len__(self):
        return self.samples.shape[0]

    def assignment(self) -> Dict[str, np.ndarray]:
        return {name: self.samples[:, i] for i, name in enumerate(self.names)}

    def subset(self, rows) -> "ScenarioSet":
        return ScenarioSet(
            self.names,
            self.samples[rows],
            self.seed,
            self.purpose,
            self.k,
            self.distribution,
        )


def draw(
    table: ParamTable, N: int, seed: int, purpose: str = "design", k: int = 0
) -> ScenarioSet:
    """N samples, each coordinate uniform on its box."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    lower, upper = table.lower, table.upper
    samples = stream(seed, purpose, k).uniform(
        lower, upper, size=(N, len(table))
    )
    samples = np.clip(samples, lower, upper)
    logger.debug("drew %d %s samples (seed %s, k %d)", N, purpose, seed, k)
    return ScenarioSet(table.names, samples, seed, purpose, k)


def nominal_scenarios(table: ParamTable) -> ScenarioSet:
    return ScenarioSet(table.names, table.nominal[None, :], purpose="nominal")


def empirical_violation(
    p: UncertainProblem, theta, s: ScenarioSet, chunk_size: int = CHUNK_SIZE
) -> float:
    """Fraction of samples at which some block fails its check."""
    violations = count_violations(p, theta, s, chunk_size)
    return violations / len(s)


def count_violations(
    p: UncertainProblem, theta, s: ScenarioSet, chunk_size: int = CHUNK_SIZE
) -> int:
    total = 0
    for rows in chunked(range(len(s)), chunk_size):
        part = s.subset(slice(rows[0], rows[-1] + 1))
        flags = indicators(p, theta, part.assignment(), len(part))
        total += int(flags.sum())
    return total


class ViolationEstimate(NamedTuple):
    estimate: float
    lower: float
    upper: float
    violations: int
    M: int
    confidence: float


def clopper_pearson(violations: int, M: int, confidence: float = 0.99):
    """Exact binomial interval for a violation frequency."""
    alpha = 1 - confidence
    lower = (
        scipy.stats.beta.ppf(alpha / 2, violations, M - violations + 1)
        if violations > 0
        else 0.0
    )
    upper = (
        scipy.stats.beta.ppf(1 - alpha / 2, violations + 1, M - violations)
        if violations < M
        else 1.0
    )
    return float(lower), float(upper)


def violation_estimate(
    p: UncertainProblem,
    theta,
    table: ParamTable,
    M: int,
    seed: int,
    confidence: float = 0.99,
) -> ViolationEstimate:
    """A-posteriori check of θ on a fresh multisample of size M."""
    s = draw(table, M, seed, purpose="audit")
    violations = count_violations(p, theta, s)
    lower, upper = clopper_pearson(violations, M, confidence)
    return ViolationEstimate(
        violations / M, lower, upper, violations, M, confidence
    )


# ______________________________________________________________________________
# CSV export


def write_scenarios(s: ScenarioSet, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(s.names)
        writer.writerows([repr(float(v)) for v in row] for row in s.samples)


def read_scenarios(path, table: Optional[ParamTable] = None) -> ScenarioSet:
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or len(rows) < 2:
        raise ValueError(f"{Path(path).name}: no samples")
    names, data = rows[0], rows[1:]
    samples = np.array(data, dtype=float)
    if table is not None:
        if names != table.names:
            raise ValueError(f"{Path(path).name}: header differs from table")
        outside = (samples < table.lower) | (samples > table.upper)
        if outside.any():
            raise ValueError(f"{Path(path).name}: samples outside the box")
    return ScenarioSet(names, samples, purpose="imported")


def derived_seeds(seed: int, count: int) -> List[int]:
    """Independent per-run seeds for repeated runs under one master seed."""
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1)[0]) for child in children]
