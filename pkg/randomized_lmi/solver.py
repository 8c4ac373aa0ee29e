"""Scenario programs: minimise c_θᵀθ subject to every block at every
sampled parameter value.

LMIs are solved by a log-det barrier method (phase 1 for a strictly feasible
start, then Newton centering along the central path). BMIs are reduced to
LMIs by fixing one group of variables at a time and alternating.
"""
import logging
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg
from more_itertools import pairwise

from .benchmark import stopwatch
from .problem import (
    ConstraintStack,
    UncertainProblem,
    constraint_matrices,
    definiteness_mask,
    inf_norm,
    instantiate,
    instantiate_many,
    min_eigenvalue,
    with_nominal_box,
)
from .sampling import ScenarioSet, nominal_scenarios, stream

logger = logging.getLogger(__name__)

CHUNK_ELEMENTS = 1 << 21


class SolverError(RuntimeError):
    pass


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITERATION_LIMIT = "IterationLimit"
    NUMERICAL_FAILURE = "NumericalFailure"
    UNBOUNDED = "Unbounded"
    ALL_RESTARTS_FAILED = "AllRestartsFailed"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SolverOptions:
    margin_scale: float = 1e-6
    margin: Optional[float] = None
    gap_tol: float = 1e-7
    newton_tol: float = 1e-9
    mu: float = 0.2
    initial_t: float = 1.0
    max_newton_steps: int = 500
    max_outer: int = 100
    armijo: float = 0.25
    shrink: float = 0.5
    max_theta_norm: float = 1e9
    feasibility_radius: float = 1e4
    restarts: int = 5
    restart_spread: float = 0.2
    feasibility_rounds: int = 20
    alternation_tol: float = 1e-5
    max_rounds: int = 50
    max_variables: int = 200
    max_stacked_dimension: int = 500_000
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise ValueError(f"mu must be in (0,1), got {self.mu}")
        if not 0 < self.armijo < 0.5:
            raise ValueError(f"armijo must be in (0,0.5), got {self.armijo}")
        if not 0 < self.shrink < 1:
            raise ValueError(f"shrink must be in (0,1), got {self.shrink}")
        if self.restarts < 1:
            raise ValueError("at least one restart is needed")
        if self.restart_spread < 0:
            raise ValueError(
                f"restart_spread must be >= 0, got {self.restart_spread}"
            )


class SolveResult(NamedTuple):
    status: Status
    theta: np.ndarray
    objective: float
    min_eigenvalue: float
    newton_steps: int = 0
    rounds: int = 0
    restarts: int = 0
    duration_s: float = 0.0
    message: str = ""
    history: tuple = ()

    @property
    def ok(self):
        return self.status == Status.OPTIMAL


# ______________________________________________________________________________
# Scenario programs


@dataclass(frozen=True, eq=False)
class ScenarioProgram:
    """Every block instantiated at every sample. Strict blocks carry the
    margin σ: the solver enforces λ_min(F) ≥ σ instead of F ≻ 0."""

    problem: UncertainProblem
    scenarios: ScenarioSet
    stacks: List[ConstraintStack]
    margins: np.ndarray

    @property
    def objective(self) -> np.ndarray:
        return self.problem.objective

    @property
    def layout(self):
        return self.problem.layout

    @property
    def constraint_count(self) -> int:
        return len(self.scenarios) * len(self.stacks)

    @property
    def stacked_dimension(self) -> int:
        return len(self.scenarios) * sum(s.dim for s in self.stacks)

    def constraints(self):
        """(sample index, block name, instantiated block), sample-major."""
        for k in range(len(self.scenarios)):
            for stack in self.stacks:
                yield k, stack.block, stack.at(k)

    def violations(self, theta) -> int:
        failed = np.zeros(len(self.scenarios), dtype=bool)
        for stack in self.stacks:
            matrices = constraint_matrices(stack, theta)
            failed |= ~definiteness_mask(matrices, stack.strict)
        return int(failed.sum())

    def min_eigenvalue(self, theta) -> float:
        return min(
            float(min_eigenvalue(constraint_matrices(stack, theta)).min())
            for stack in self.stacks
        )


def strictness_margins(p: UncertainProblem, options: SolverOptions):
    """σ per block: 1e-6·(1 + |F0(q_nominal)|∞) for strict blocks, 0 for
    nonstrict ones, unless an absolute margin is configured."""
    nominal = instantiate(p, p.parameters.nominal_point())
    margins = []
    for block in nominal:
        if not block.strict:
            margins.append(0.0)
        elif options.margin is not None:
            margins.append(options.margin)
        else:
            scale = float(inf_norm(block.constant[None])[0])
            margins.append(options.margin_scale * (1 + scale))
    return np.array(margins)


def check_size(p: UncertainProblem, N: int, options: SolverOptions):
    """SolverError when m_θ or the stacked dimension N·n is over the
    configured limits."""
    if p.m_theta > options.max_variables:
        raise SolverError(
            f"{p.m_theta} decision variables exceed the limit of"
            f" {options.max_variables}"
        )
    stacked = N * p.dimension
    if stacked > options.max_stacked_dimension:
        raise SolverError(
            f"stacked dimension {stacked} exceeds the limit of"
            f" {options.max_stacked_dimension}"
        )


def assemble(
    p: UncertainProblem,
    scenarios: ScenarioSet,
    options: Optional[SolverOptions] = None,
) -> ScenarioProgram:
    options = options or SolverOptions()
    check_size(p, len(scenarios), options)
    stacks = instantiate_many(p, scenarios.assignment(), len(scenarios))
    return ScenarioProgram(
        p, scenarios, stacks, strictness_margins(p, options)
    )


# ______________________________________________________________________________
# Log-det barrier


class AffineStack(NamedTuple):
    """Slack S(θ) = constant + Σ θ_i linear[:, i] for a stack of samples."""

    constant: np.ndarray
    linear: np.ndarray


class BarrierResult(NamedTuple):
    status: str
    theta: np.ndarray
    steps: int
    message: str = ""


class LogDetBarrier:
    """Minimise cᵀθ - (1/t) Σ log det S_k(θ) for increasing t."""

    def __init__(
        self, c: np.ndarray, stacks: List[AffineStack], options: SolverOptions
    ):
        self.c = np.asarray(c, dtype=float)
        self.stacks = stacks
        self.options = options
        self.degree = sum(
            s.constant.shape[0] * s.constant.shape[-1] for s in stacks
        )
        self.steps = 0

    def slacks(self, theta):
        return [
            s.constant + np.einsum("i,kiab->kab", theta, s.linear)
            for s in self.stacks
        ]

    def factor(self, theta):
        """Cholesky factors of every slack, None outside the domain."""
        try:
            return [np.linalg.cholesky(S) for S in self.slacks(theta)]
        except np.linalg.LinAlgError:
            return None

    def is_interior(self, theta) -> bool:
        return self.factor(theta) is not None

    def value(self, theta, t, factors) -> float:
        log_det = sum(
            2 * np.log(np.diagonal(L, axis1=-2, axis2=-1)).sum()
            for L in factors
        )
        return t * float(self.c @ theta) - log_det

    def derivatives(self, theta, t):
        m = len(theta)
        gradient = t * self.c.copy()
        hessian = np.zeros((m, m))
        for S, stack in zip(self.slacks(theta), self.stacks):
            S_inv = np.linalg.inv(S)
            count, _, n, _ = stack.linear.shape
            rows = max(1, CHUNK_ELEMENTS // max(1, m * n * n))
            # W holds S⁻¹·∂S/∂θ_i for one chunk of samples at a time
            for start in range(0, count, rows):
                part = slice(start, start + rows)
                W = np.einsum(
                    "kab,kibc->kiac", S_inv[part], stack.linear[part]
                )
                gradient -= np.einsum("kiaa->i", W)
                hessian += np.einsum("kiab,kjba->ij", W, W, optimize=True)
        return gradient, (hessian + hessian.T) / 2

    def newton_direction(self, gradient, hessian):
        """None when the objective decreases along a direction that leaves
        every slack unchanged."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            try:
                return scipy.linalg.solve(hessian, -gradient, assume_a="pos")
            except (np.linalg.LinAlgError, ValueError):
                pass
        direction = scipy.linalg.lstsq(hessian, -gradient)[0]
        residual = np.linalg.norm(hessian @ direction + gradient)
        if residual > 1e-8 * max(1.0, np.linalg.norm(gradient)):
            return None
        return direction

    def line_search(self, theta, t, direction, slope):
        o = self.options
        current = self.value(theta, t, self.factor(theta))
        step = 1.0
        while step > 1e-14:
            candidate = theta + step * direction
            factors = self.factor(candidate)
            if factors is not None and self.value(
                candidate, t, factors
            ) <= current + o.armijo * step * slope:
                return step
            step *= o.shrink
        return None

    def center(self, theta, t, stop=None) -> BarrierResult:
        o = self.options
        for _ in range(o.max_newton_steps):
            gradient, hessian = self.derivatives(theta, t)
            direction = self.newton_direction(gradient, hessian)
            if direction is None:
                return BarrierResult(
                    Status.UNBOUNDED, theta, self.steps, "recession direction"
                )
            decrement = -float(gradient @ direction)
            if decrement < -1e-12 * max(1.0, np.linalg.norm(gradient)):
                return BarrierResult(
                    Status.NUMERICAL_FAILURE,
                    theta,
                    self.steps,
                    "non-descent Newton direction",
                )
            if decrement / 2 <= o.newton_tol:
                return BarrierResult("Centered", theta, self.steps)
            step = self.line_search(theta, t, direction, -decrement)
            if step is None:
                return BarrierResult(
                    Status.NUMERICAL_FAILURE,
                    theta,
                    self.steps,
                    "line search failed",
                )
            theta = theta + step * direction
            self.steps += 1
            logger.debug(
                "newton step %d: t=%g decrement=%.3e step=%g",
                self.steps,
                t,
                decrement,
                step,
            )
            if np.linalg.norm(theta) > o.max_theta_norm:
                return BarrierResult(
                    Status.UNBOUNDED, theta, self.steps, "|θ| exceeded"
                )
            if stop is not None and stop(theta):
                return BarrierResult("Stopped", theta, self.steps)
        return BarrierResult(
            Status.ITERATION_LIMIT,
            theta,
            self.steps,
            "centering did not converge",
        )

    def minimize(
        self, theta, stop: Optional[Callable] = None
    ) -> BarrierResult:
        """Follow the central path from a strictly feasible θ."""
        o = self.options
        t = o.initial_t
        for _ in range(o.max_outer):
            result = self.center(theta, t, stop)
            if result.status != "Centered":
                return result
            theta = result.theta
            objective = float(self.c @ theta)
            if self.degree / t <= o.gap_tol * (1 + abs(objective)):
                return BarrierResult(Status.OPTIMAL, theta, self.steps)
            t /= o.mu
        return BarrierResult(
            Status.ITERATION_LIMIT, theta, self.steps, "outer loop limit"
        )


def trust_region(center: np.ndarray, radius: float) -> AffineStack:
    """‖θ - center‖ < radius as [[r, dᵀ], [d, r·I]] ≻ 0, d = θ - center.
    The block lives in (θ, s) space and does not involve s."""
    m = len(center)
    constant = radius * np.eye(m + 1)
    constant[0, 1:] = constant[1:, 0] = -center
    linear = np.zeros((1, m + 1, m + 1, m + 1))
    for i in range(m):
        linear[0, i, 0, i + 1] = linear[0, i, i + 1, 0] = 1.0
    return AffineStack(constant[None], linear)


def find_interior(
    stacks: List[AffineStack], start: np.ndarray, options: SolverOptions
) -> BarrierResult:
    """Phase 1: minimise s subject to S(θ) + sI ≻ 0, s > -1 and
    ‖θ - start‖ < R, stopping as soon as s < 0. R grows while the phase 1
    minimum sits on the ball."""
    barrier = LogDetBarrier(np.zeros(len(start)), stacks, options)
    if barrier.is_interior(start):
        return BarrierResult(Status.OPTIMAL, start, 0)
    if not len(start):
        return BarrierResult(
            Status.INFEASIBLE, start, 0, "constant blocks fail the check"
        )
    lowest = min(
        float(np.linalg.eigvalsh(S)[..., 0].min())
        for S in barrier.slacks(start)
    )
    augmented = []
    for s in stacks:
        count, m, n, _ = s.linear.shape
        identity = np.broadcast_to(np.eye(n), (count, 1, n, n))
        augmented.append(
            AffineStack(s.constant, np.concatenate([s.linear, identity], 1))
        )
    m = len(start)
    bound = np.zeros((1, m + 1, 1, 1))
    bound[0, m] = 1.0
    augmented.append(AffineStack(np.ones((1, 1, 1)), bound))
    c = np.zeros(m + 1)
    c[m] = 1.0
    radius = options.feasibility_radius * max(1.0, np.abs(start).max())
    steps = 0
    while True:
        phase1 = LogDetBarrier(
            c, augmented + [trust_region(start, radius)], options
        )
        result = phase1.minimize(
            np.append(start, 1.0 - lowest), stop=lambda point: point[-1] < 0
        )
        steps += result.steps
        theta, s = result.theta[:-1], result.theta[-1]
        if s < 0 and barrier.is_interior(theta):
            return BarrierResult(Status.OPTIMAL, theta, steps)
        if result.status == "Stopped":
            return BarrierResult(
                Status.NUMERICAL_FAILURE,
                theta,
                steps,
                "phase 1 point fails the Cholesky check",
            )
        if result.status != Status.OPTIMAL:
            return BarrierResult(result.status, theta, steps, result.message)
        on_ball = np.linalg.norm(theta - start) > (1 - 1e-3) * radius
        if not on_ball or radius >= options.max_theta_norm:
            return BarrierResult(
                Status.INFEASIBLE,
                theta,
                steps,
                f"phase 1 minimum s = {s:.3e} >= 0: no strictly feasible"
                " point for the sampled constraints",
            )
        radius *= 100
        logger.debug("phase 1 on the ball, radius raised to %g", radius)


def minimize_affine(
    c, stacks: List[AffineStack], start, options: SolverOptions
) -> BarrierResult:
    start = np.asarray(start, dtype=float)
    interior = find_interior(stacks, start, options)
    if interior.status != Status.OPTIMAL:
        return interior
    if not np.any(c):
        return interior
    barrier = LogDetBarrier(c, stacks, options)
    result = barrier.minimize(interior.theta)
    return result._replace(steps=result.steps + interior.steps)


# ______________________________________________________________________________
# LMI subproblems


def reduce(
    sp: ScenarioProgram, free: Sequence[int], theta: np.ndarray
) -> List[AffineStack]:
    """Slacks affine in θ[free] with every other entry fixed at θ.

    A bilinear term becomes linear once one of its two factors is fixed;
    both factors free is an error."""
    free = list(free)
    position = {index: k for k, index in enumerate(free)}
    fixed = np.array([i not in position for i in range(len(theta))])
    theta_fixed = np.where(fixed, theta, 0.0)
    stacks = []
    for stack, sigma in zip(sp.stacks, sp.margins):
        n = stack.dim
        constant = stack.constant - sigma * np.eye(n)
        constant = constant + np.einsum(
            "i,kiab->kab", theta_fixed, stack.linear
        )
        linear = stack.linear[:, free].copy()
        for (i, j), h in stack.bilinear.items():
            if i in position and j in position:
                raise SolverError(
                    "bilinear term with both factors free in an LMI step"
                )
            if i in position:
                linear[:, position[i]] += theta[j] * h
            elif j in position:
                linear[:, position[j]] += theta[i] * h
            else:
                constant = constant + theta[i] * theta[j] * h
        stacks.append(AffineStack(constant, linear))
    return stacks


def solve_subproblem(
    sp: ScenarioProgram,
    free: Sequence[int],
    theta: np.ndarray,
    options: SolverOptions,
) -> BarrierResult:
    free = list(free)
    theta = np.asarray(theta, dtype=float)
    stacks = reduce(sp, free, theta)
    c = sp.objective[free]
    result = minimize_affine(c, stacks, theta[free], options)
    full = theta.copy()
    full[free] = result.theta
    return result._replace(theta=full)


def _finish(sp: ScenarioProgram, status, theta, steps, watch, **extra):
    theta = np.asarray(theta, dtype=float)
    message = extra.pop("message", "")
    if status == Status.OPTIMAL and sp.violations(theta):
        status = Status.NUMERICAL_FAILURE
        message = "solution fails the definiteness check on the design set"
    return SolveResult(
        status,
        theta,
        float(sp.objective @ theta),
        sp.min_eigenvalue(theta),
        steps,
        duration_s=watch.duration_s,
        message=message,
        **extra,
    )


def solve_scenario_lmi(
    sp: ScenarioProgram,
    options: Optional[SolverOptions] = None,
    start: Optional[np.ndarray] = None,
) -> SolveResult:
    options = options or SolverOptions()
    if any(stack.bilinear for stack in sp.stacks):
        raise SolverError("bilinear terms need solve_scenario_bmi")
    m = sp.layout.m_theta
    start = np.zeros(m) if start is None else start
    with stopwatch("solve_scenario_lmi") as watch:
        result = solve_subproblem(sp, range(m), start, options)
    solved = _finish(
        sp,
        result.status,
        result.theta,
        result.steps,
        watch,
        message=result.message,
    )
    logger.info(
        "LMI scenario program (%d constraints): %s, objective %.6g",
        sp.constraint_count,
        solved.status,
        solved.objective,
    )
    return solved


# ______________________________________________________________________________
# BMI alternation


def _groups(sp: ScenarioProgram):
    """x-step and y-step index sets. The y-step also frees every x-variable
    that appears in no bilinear term."""
    layout = sp.layout
    coupled = set(sp.problem.bilinear_x_indices)
    x_step = layout.x_indices
    y_step = sorted(
        layout.y_indices + [i for i in layout.x_indices if i not in coupled]
    )
    return x_step, y_step


def restart_points(
    sp: ScenarioProgram, anchor: np.ndarray, options: SolverOptions
):
    """Starting θ per restart: the anchor itself, then its y-entries
    perturbed by up to restart_spread relative to their size (absolute for
    zero entries)."""
    y_indices = sp.layout.y_indices
    y = anchor[y_indices]
    scale = np.where(y != 0, np.abs(y), 1.0)
    for restart in range(options.restarts):
        theta = anchor.copy()
        if restart:
            rng = stream(options.seed, "restart", restart)
            u = rng.uniform(-1, 1, size=len(y_indices))
            theta[y_indices] = y + options.restart_spread * scale * u
        yield theta


def deficit(sp: ScenarioProgram, theta) -> float:
    """Σ over blocks of how far the worst sample falls short of the margin."""
    total = 0.0
    for stack, sigma in zip(sp.stacks, sp.margins):
        lowest = min_eigenvalue(constraint_matrices(stack, theta)).min()
        total += max(0.0, sigma - float(lowest))
    return total


def is_interior(sp: ScenarioProgram, theta, options: SolverOptions) -> bool:
    """Every slack minus its margin factorises at θ."""
    barrier = LogDetBarrier(np.zeros(0), reduce(sp, [], theta), options)
    return barrier.is_interior(np.zeros(0))


def feasible_start(sp: ScenarioProgram, theta, options: SolverOptions):
    """Phase 1 over the two variable groups in turn until θ is strictly
    feasible. Each step only sees the blocks that depend on its free group,
    so the others keep their slack. Returns (θ or None, Newton steps)."""
    theta = np.asarray(theta, dtype=float).copy()
    shortfall = deficit(sp, theta)
    steps = 0
    for round_ in range(1, options.feasibility_rounds + 1):
        previous = shortfall
        for free in _groups(sp):
            stacks = [s for s in reduce(sp, free, theta) if np.any(s.linear)]
            if not stacks:
                continue
            result = find_interior(stacks, theta[free], options)
            steps += result.steps
            if result.status not in (Status.OPTIMAL, Status.INFEASIBLE):
                logger.debug("feasibility round %d: %s", round_, result.status)
                return None, steps
            candidate = theta.copy()
            candidate[free] = result.theta
            candidate_shortfall = deficit(sp, candidate)
            # an interior point for the dependent blocks never adds deficit
            if result.status == Status.OPTIMAL or candidate_shortfall < (
                shortfall
            ):
                theta, shortfall = candidate, candidate_shortfall
            if is_interior(sp, theta, options):
                return theta, steps
        logger.debug("feasibility round %d: deficit %.3e", round_, shortfall)
        if previous - shortfall < options.alternation_tol * max(1.0, previous):
            break
    return None, steps


def alternate(
    sp: ScenarioProgram, theta: np.ndarray, options: SolverOptions
):
    """Alternating minimisation from a strictly feasible θ. Returns the best
    θ, the objective per round and the Newton step count."""
    objective = float(sp.objective @ theta)
    history = [objective]
    steps = 0
    for round_ in range(1, options.max_rounds + 1):
        previous = objective
        for free in reversed(_groups(sp)):
            result = solve_subproblem(sp, free, theta, options)
            steps += result.steps
            candidate = float(sp.objective @ result.theta)
            if result.status == Status.OPTIMAL and candidate <= objective:
                theta, objective = result.theta, candidate
            elif result.status != Status.OPTIMAL:
                logger.debug("round %d step: %s", round_, result.status)
        history.append(objective)
        improvement = (previous - objective) / max(1.0, abs(previous))
        logger.debug("round %d: objective %.8g", round_, objective)
        if improvement < options.alternation_tol:
            break
    assert all(b <= a for a, b in pairwise(history))
    return theta, history, steps


def solve_bmi_from(
    sp: ScenarioProgram, anchor: np.ndarray, options: SolverOptions
) -> SolveResult:
    """Restarts around anchor. Each restart runs the x-step at the given y,
    falls back to feasible_start when that fails, then alternates. The best
    feasible restart wins."""
    layout = sp.layout
    best: Optional[SolveResult] = None
    total_steps = 0
    with stopwatch("solve_bmi_from") as watch:
        for restart, theta in enumerate(restart_points(sp, anchor, options)):
            first = solve_subproblem(sp, layout.x_indices, theta, options)
            total_steps += first.steps
            start = first.theta
            if first.status != Status.OPTIMAL:
                start, steps = feasible_start(sp, theta, options)
                total_steps += steps
                if start is None:
                    logger.info(
                        "restart %d: x-step %s, no feasible point reached",
                        restart,
                        first.status,
                    )
                    continue
            theta, history, steps = alternate(sp, start, options)
            total_steps += steps
            candidate = _finish(
                sp,
                Status.OPTIMAL,
                theta,
                total_steps,
                watch,
                rounds=len(history) - 1,
                restarts=restart + 1,
                history=tuple(history),
            )
            logger.info(
                "restart %d: %s, objective %.6g after %d rounds",
                restart,
                candidate.status,
                candidate.objective,
                candidate.rounds,
            )
            if candidate.ok and (
                best is None or candidate.objective < best.objective
            ):
                best = candidate
    if best is None:
        return SolveResult(
            Status.ALL_RESTARTS_FAILED,
            np.full(layout.m_theta, np.nan),
            float("nan"),
            float("nan"),
            total_steps,
            restarts=options.restarts,
            duration_s=watch.duration_s,
            message="no restart reached a feasible point",
        )
    return best._replace(newton_steps=total_steps, duration_s=watch.duration_s)


def nominal_anchor(p: UncertainProblem, options: SolverOptions) -> np.ndarray:
    """θ solving the BMI at the nominal parameters alone, starting from the
    file's initial y (zero when absent). The start itself when the nominal
    solve fails."""
    start = p.layout.pack(p.initial)
    table = p.parameters
    if np.array_equal(table.lower, table.upper):
        return start
    nominal = with_nominal_box(p)
    sp = assemble(nominal, nominal_scenarios(nominal.parameters), options)
    result = solve_bmi_from(sp, start, options)
    logger.info(
        "nominal BMI: %s, objective %.6g", result.status, result.objective
    )
    return result.theta if result.ok else start


def solve_scenario_bmi(
    p: UncertainProblem,
    scenarios: ScenarioSet,
    options: Optional[SolverOptions] = None,
) -> SolveResult:
    options = options or SolverOptions()
    sp = assemble(p, scenarios, options)
    if p.kind == "LMI":
        return solve_scenario_lmi(sp, options)
    return solve_bmi_from(sp, nominal_anchor(p, options), options)


def solve_scenario(
    p: UncertainProblem,
    scenarios: ScenarioSet,
    options: Optional[SolverOptions] = None,
) -> SolveResult:
    """Solve the scenario program of p on the given samples."""
    options = options or SolverOptions()
    if p.kind == "BMI":
        return solve_scenario_bmi(p, scenarios, options)
    return solve_scenario_lmi(assemble(p, scenarios, options), options)
