"""Sequential design and validation.

Each iteration k solves the scenario program on N_k = ⌈N·k/k_t⌉ fresh
design samples and checks the candidate on M_k independent validation
samples. The run stops at the first candidate whose validation violation is
at most ρ, at the first infeasible design set, or at k = k_t.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, NamedTuple, Optional

import numpy as np

from .benchmark import stopwatch
from .learning import (
    ParameterError,
    ProbabilisticLevels,
    design_sample_schedule,
    sample_bound_one_sided,
    validation_schedule,
)
from .expr import EvaluationError
from .problem import ModelError, ParamTable, UncertainProblem
from .sampling import draw, empirical_violation, violation_estimate
from .solver import SolverError, SolverOptions, Status, solve_scenario

logger = logging.getLogger(__name__)


class Outcome(str, Enum):
    PROBABILISTIC_SOLUTION = "ProbabilisticSolution"
    INFEASIBLE = "Infeasible"
    EXIT_AT_LAST_ITERATION = "ExitAtLastIteration"

    def __str__(self):
        return self.value


class SequentialError(RuntimeError):
    def __init__(self, message, log):
        super().__init__(message)
        self.log = log


@dataclass(frozen=True)
class SequentialConfig:
    levels: ProbabilisticLevels
    k_t: int = 10
    alpha: Optional[float] = None
    a: Optional[float] = None
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    m_theta: Optional[int] = None
    n: Optional[int] = None
    strict: Optional[bool] = None

    def __post_init__(self):
        if self.k_t < 2:
            raise ParameterError(f"k_t must be > 1, got {self.k_t}")
        if self.a is not None and math.isinf(self.a) and self.levels.rho:
            raise ParameterError("a = inf is admitted only with rho = 0")

    def resolved(self, p: UncertainProblem) -> "SequentialConfig":
        """m_θ, n and strictness taken from the problem when unset."""
        return replace(
            self,
            m_theta=p.m_theta if self.m_theta is None else self.m_theta,
            n=p.dimension if self.n is None else self.n,
            strict=p.strict if self.strict is None else self.strict,
        )


class IterationRecord(NamedTuple):
    k: int
    N_k: int
    design_status: str
    objective: float
    M_k: Optional[int]
    validation_violation: Optional[float]
    wall_time_s: float
    theta: np.ndarray
    decision: Optional[Outcome] = None
    message: str = ""

    def to_dict(self) -> Dict:
        record = self._asdict()
        record["theta"] = [float(v) for v in self.theta]
        record["design_status"] = str(self.design_status)
        if self.decision is not None:
            record["decision"] = str(self.decision)
        return record


@dataclass(frozen=True, eq=False)
class SequentialOutcome:
    status: Outcome
    theta: Optional[np.ndarray]
    k: int
    log: List[IterationRecord]
    N: int
    levels: ProbabilisticLevels
    seed: int
    k_t: int

    @property
    def objective(self) -> float:
        return self.log[-1].objective

    @property
    def design_status(self) -> str:
        """Solver status of the exit iteration; AllRestartsFailed tells a
        BMI that found no feasible point from an infeasible design set."""
        return str(self.log[-1].design_status)

    @property
    def design_samples(self) -> int:
        """Design samples at the exit iteration."""
        return self.log[-1].N_k

    @property
    def total_design_samples(self) -> int:
        return sum(record.N_k for record in self.log)

    @property
    def validation_samples(self) -> Optional[int]:
        """Validation samples at the exit iteration."""
        return self.log[-1].M_k

    @property
    def total_validation_samples(self) -> int:
        return sum(record.M_k or 0 for record in self.log)


def one_shot_bound(cfg: SequentialConfig) -> int:
    """N of the one-sided bound, nonstrict when any block is nonstrict."""
    return sample_bound_one_sided(
        cfg.levels, cfg.m_theta, cfg.n, cfg.strict
    ).N


def sequential_iterations(p: UncertainProblem, cfg: SequentialConfig):
    """Yield one IterationRecord per iteration; the last one carries the
    decision."""
    cfg = cfg.resolved(p)
    levels = cfg.levels
    N = one_shot_bound(cfg)
    design_sizes = design_sample_schedule(N, cfg.k_t)
    validation_sizes = validation_schedule(cfg.k_t, levels, cfg.alpha, cfg.a)
    options = replace(cfg.solver, seed=cfg.seed)
    log = []
    logger.info(
        "sequential run: N=%d, k_t=%d, M_1=%d, seed %d",
        N,
        cfg.k_t,
        validation_sizes[1],
        cfg.seed,
    )
    for k in range(1, cfg.k_t + 1):
        N_k = design_sizes[k - 1]
        try:
            with stopwatch(f"iteration {k}") as watch:
                design = draw(p.parameters, N_k, cfg.seed, "design", k)
                result = solve_scenario(p, design, options)
                M_k = violation = decision = None
                if result.status in (
                    Status.INFEASIBLE,
                    Status.ALL_RESTARTS_FAILED,
                ):
                    decision = Outcome.INFEASIBLE
                elif not result.ok:
                    raise SequentialError(
                        f"design step {k} ended with {result.status}:"
                        f" {result.message}",
                        log,
                    )
                elif k == cfg.k_t:
                    decision = Outcome.EXIT_AT_LAST_ITERATION
                else:
                    M_k = validation_sizes[k]
                    validation = draw(
                        p.parameters, M_k, cfg.seed, "validation", k
                    )
                    violation = empirical_violation(
                        p, result.theta, validation
                    )
                    if violation <= levels.rho:
                        decision = Outcome.PROBABILISTIC_SOLUTION
        except (SolverError, EvaluationError, ModelError) as e:
            raise SequentialError(f"iteration {k}: {e}", log) from e
        if result.status == Status.ALL_RESTARTS_FAILED:
            logger.warning(
                "k=%d: no BMI restart found a feasible point; the run ends"
                " as %s although the sampled problem may be feasible",
                k,
                Outcome.INFEASIBLE,
            )
        record = IterationRecord(
            k,
            N_k,
            result.status,
            result.objective,
            M_k,
            violation,
            watch.duration_s,
            result.theta,
            decision,
            result.message,
        )
        log.append(record)
        logger.info(
            "k=%d N_k=%d %s objective=%.6g M_k=%s violation=%s",
            k,
            N_k,
            result.status,
            result.objective,
            M_k,
            violation,
        )
        yield record
        if decision is not None:
            return


def run_sequential(
    p: UncertainProblem,
    cfg: SequentialConfig,
    on_iteration: Optional[Callable[[IterationRecord], None]] = None,
) -> SequentialOutcome:
    N = one_shot_bound(cfg.resolved(p))
    log = []
    for record in sequential_iterations(p, cfg):
        log.append(record)
        if on_iteration is not None:
            on_iteration(record)
    last = log[-1]
    theta = None if last.decision == Outcome.INFEASIBLE else last.theta
    return SequentialOutcome(
        last.decision, theta, last.k, log, N, cfg.levels, cfg.seed, cfg.k_t
    )


# ______________________________________________________________________________
# Audit


class AuditReport(NamedTuple):
    label: str
    estimate: float
    lower: float
    upper: float
    M: int
    within_level: bool
    rho: float
    epsilon: float

    def to_dict(self) -> Dict:
        return self._asdict()


def audit(
    outcome: SequentialOutcome,
    p: UncertainProblem,
    table: ParamTable,
    M: int,
    seed: int,
    confidence: float = 0.99,
) -> AuditReport:
    """Fresh a-posteriori violation estimate of the returned θ̂."""
    if M < 1:
        raise ParameterError(f"M must be >= 1, got {M}")
    levels = outcome.levels
    if outcome.status == Outcome.INFEASIBLE or outcome.theta is None:
        nan = float("nan")
        return AuditReport(
            "infeasible", nan, nan, nan, M, False, levels.rho, levels.epsilon
        )
    estimate = violation_estimate(
        p, outcome.theta, table, M, seed, confidence
    )
    label = (
        "certified"
        if outcome.status == Outcome.PROBABILISTIC_SOLUTION
        else "uncertified"
    )
    return AuditReport(
        label,
        estimate.estimate,
        estimate.lower,
        estimate.upper,
        M,
        estimate.estimate <= levels.rho + levels.epsilon,
        levels.rho,
        levels.epsilon,
    )


# ______________________________________________________________________________
# Outcome files and summaries


def outcome_to_dict(outcome: SequentialOutcome) -> Dict:
    return dict(
        status=str(outcome.status),
        design_status=outcome.design_status,
        theta=None
        if outcome.theta is None
        else [float(v) for v in outcome.theta],
        k=outcome.k,
        N=outcome.N,
        epsilon=outcome.levels.epsilon,
        delta=outcome.levels.delta,
        rho=outcome.levels.rho,
        seed=outcome.seed,
        k_t=outcome.k_t,
        log=[record.to_dict() for record in outcome.log],
    )


def outcome_from_dict(document: Dict) -> SequentialOutcome:
    log = [
        IterationRecord(
            **{
                **record,
                "theta": np.array(record["theta"], dtype=float),
                "decision": None
                if record["decision"] is None
                else Outcome(record["decision"]),
            }
        )
        for record in document.get("log", [])
    ]
    theta = document.get("theta")
    return SequentialOutcome(
        Outcome(document["status"]),
        None if theta is None else np.array(theta, dtype=float),
        document["k"],
        log,
        document["N"],
        ProbabilisticLevels(
            document["epsilon"], document["delta"], document["rho"]
        ),
        document["seed"],
        document["k_t"],
    )


SUMMARY_METRICS = [
    "design_samples",
    "total_design_samples",
    "validation_samples",
    "objective",
    "iteration",
]
SUMMARY_COLUMNS = (
    ["epsilon", "delta", "rho", "k_t", "runs"]
    + [
        f"{metric}_{stat}"
        for metric in SUMMARY_METRICS
        for stat in ("mean", "std", "worst")
    ]
    + ["certified", "exit_at_last_iteration", "infeasible"]
)


def _stats(values):
    values = np.array([v for v in values if v is not None], dtype=float)
    if not len(values):
        return math.nan, math.nan, math.nan
    std = float(np.std(values, ddof=1)) if len(values) > 1 else math.nan
    return float(values.mean()), std, float(values.max())


def summarize(outcomes: List[SequentialOutcome]) -> Dict:
    """Mean, sample standard deviation and worst case over repeated runs.
    Objectives come from runs that returned a solution."""
    if not outcomes:
        raise ValueError("nothing to summarize")
    first = outcomes[0]
    solved = [o for o in outcomes if o.status != Outcome.INFEASIBLE]
    metrics = dict(
        design_samples=[o.design_samples for o in outcomes],
        total_design_samples=[o.total_design_samples for o in outcomes],
        validation_samples=[o.validation_samples for o in outcomes],
        objective=[o.objective for o in solved],
        iteration=[o.k for o in outcomes],
    )
    summary = dict(
        epsilon=first.levels.epsilon,
        delta=first.levels.delta,
        rho=first.levels.rho,
        k_t=first.k_t,
        runs=len(outcomes),
    )
    for metric in SUMMARY_METRICS:
        mean, std, worst = _stats(metrics[metric])
        summary[f"{metric}_mean"] = mean
        summary[f"{metric}_std"] = std
        summary[f"{metric}_worst"] = worst
    counts = {status: 0 for status in Outcome}
    for o in outcomes:
        counts[o.status] += 1
    summary["certified"] = counts[Outcome.PROBABILISTIC_SOLUTION]
    summary["exit_at_last_iteration"] = counts[Outcome.EXIT_AT_LAST_ITERATION]
    summary["infeasible"] = counts[Outcome.INFEASIBLE]
    return summary
