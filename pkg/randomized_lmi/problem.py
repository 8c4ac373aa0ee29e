"""Uncertain LMI/BMI problems and their instantiation at sampled parameters.

A problem minimises ``c_θᵀθ`` subject to blocks

    F0(q) + Σ θ_i F_i(q) + Σ x_i y_j H_ij(q) ≻ 0   (or ⪰ 0)

whose coefficient grids hold expressions in the uncertain parameters q.
"""
import itertools
from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .expr import EvaluationError, Expression, evaluate, free_params

Grid = Dict[Tuple[int, int], Expression]

SYMMETRY_TOL = 1e-12
PD_TOL = 1e-9
MAX_ALL_MINORS_DIM = 12


class ModelError(ValueError):
    pass


# ______________________________________________________________________________
# Parameters


@dataclass(frozen=True)
class Parameter:
    name: str
    nominal: float
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower <= self.nominal <= self.upper:
            raise ModelError(
                f"parameter {self.name}: expected lower <= nominal <= upper,"
                f" got {self.lower}, {self.nominal}, {self.upper}"
            )


def relative_box(name, nominal, uncertainty) -> Parameter:
    """Box of ±uncertainty around the nominal value, e.g. ±15%."""
    ends = nominal * (1 - uncertainty), nominal * (1 + uncertainty)
    return Parameter(name, nominal, min(ends), max(ends))


@dataclass(frozen=True)
class ParamTable:
    parameters: Tuple[Parameter, ...]

    def __post_init__(self):
        names = [p.name for p in self.parameters]
        duplicated = {name for name in names if names.count(name) > 1}
        if duplicated:
            raise ModelError(f"duplicated parameters: {sorted(duplicated)}")

    def __len__(self):
        return len(self.parameters)

    def __iter__(self):
        return iter(self.parameters)

    @property
    def names(self) -> List[str]:
        return [p.name for p in self.parameters]

    @property
    def lower(self) -> np.ndarray:
        return np.array([p.lower for p in self.parameters], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([p.upper for p in self.parameters], dtype=float)

    @property
    def nominal(self) -> np.ndarray:
        return np.array([p.nominal for p in self.parameters], dtype=float)

    def nominal_point(self) -> Dict[str, float]:
        return {p.name: p.nominal for p in self.parameters}

    def degenerate(self) -> "ParamTable":
        """The same table with every box collapsed on its nominal value."""
        return ParamTable(
            tuple(
                Parameter(p.name, p.nominal, p.nominal, p.nominal)
                for p in self.parameters
            )
        )


# ______________________________________________________________________________
# Decision variables


@dataclass(frozen=True)
class Variable:
    """A scalar (dim None) or a symmetric matrix variable."""

    name: str
    dim: Optional[int] = None
    role: str = "x"

    def __post_init__(self):
        if self.role not in ("x", "y"):
            raise ModelError(f"variable {self.name}: role must be x or y")
        if self.dim is not None and self.dim < 1:
            raise ModelError(f"variable {self.name}: dimension must be >= 1")

    @property
    def entries(self) -> List[str]:
        """Packed entry names: upper triangle, row-major."""
        if self.dim is None:
            return [self.name]
        return [
            f"{self.name}[{i},{j}]"
            for i in range(self.dim)
            for j in range(i, self.dim)
        ]


@dataclass(frozen=True)
class DecisionLayout:
    """Packing of θ: variables in declaration order, matrices by their
    upper triangle row-major."""

    variables: Tuple[Variable, ...]

    def __post_init__(self):
        names = self.names
        if len(set(names)) != len(names):
            raise ModelError("decision variable names must be unique")

    @property
    def names(self) -> List[str]:
        return [name for var in self.variables for name in var.entries]

    @property
    def roles(self) -> List[str]:
        return [var.role for var in self.variables for _ in var.entries]

    @property
    def m_theta(self) -> int:
        return len(self.names)

    @property
    def x_indices(self) -> List[int]:
        return [i for i, role in enumerate(self.roles) if role == "x"]

    @property
    def y_indices(self) -> List[int]:
        return [i for i, role in enumerate(self.roles) if role == "y"]

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ModelError(f"unknown decision variable {name!r}") from None

    def pack(self, values: Dict[str, float]) -> np.ndarray:
        theta = np.zeros(self.m_theta)
        for name, value in values.items():
            theta[self.index(name)] = value
        return theta

    def unpack(self, theta: Sequence[float]) -> Dict[str, object]:
        """Scalars as floats, matrix variables as symmetric arrays."""
        theta = iter(np.asarray(theta, dtype=float))
        values = {}
        for var in self.variables:
            if var.dim is None:
                values[var.name] = float(next(theta))
                continue
            matrix = np.zeros((var.dim, var.dim))
            for i, j in zip(*np.triu_indices(var.dim)):
                matrix[i, j] = matrix[j, i] = next(theta)
            values[var.name] = matrix
        return values


# ______________________________________________________________________________
# Constraint blocks


def symmetric_grid(entries: Dict[Tuple[int, int], Expression], dim) -> Grid:
    """Mirror entries given on one side of the diagonal."""
    grid = {}
    for (i, j), e in entries.items():
        if not (0 <= i < dim and 0 <= j < dim):
            raise ModelError(f"entry ({i},{j}) outside a {dim}x{dim} block")
        grid[i, j] = e
    for (i, j), e in list(grid.items()):
        grid.setdefault((j, i), e)
    return grid


@dataclass(frozen=True)
class ConstraintBlock:
    """An n×n block required to be positive definite (strict) or
    semidefinite. ``linear`` maps packed variable indices to grids,
    ``bilinear`` maps (x index, y index) pairs to grids."""

    name: str
    dim: int
    constant: Grid = field(default_factory=dict)
    linear: Dict[int, Grid] = field(default_factory=dict)
    bilinear: Dict[Tuple[int, int], Grid] = field(default_factory=dict)
    strict: bool = True

    def grids(self):
        yield self.constant
        yield from self.linear.values()
        yield from self.bilinear.values()

    def free_params(self) -> set:
        return {
            name
            for grid in self.grids()
            for e in grid.values()
            for name in free_params(e)
        }


@dataclass(frozen=True, eq=False)
class UncertainProblem:
    parameters: ParamTable
    layout: DecisionLayout
    objective: np.ndarray
    blocks: Tuple[ConstraintBlock, ...]
    name: str = ""
    initial: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.objective) != self.layout.m_theta:
            raise ModelError("objective length differs from m_theta")
        known = set(self.parameters.names)
        roles = self.layout.roles
        for block in self.blocks:
            unknown = block.free_params() - known
            if unknown:
                raise ModelError(
                    f"block {block.name}: unknown parameters {sorted(unknown)}"
                )
            for i, j in block.bilinear:
                if roles[i] != "x" or roles[j] != "y":
                    raise ModelError(
                        f"block {block.name}: bilinear terms must pair an"
                        " x-variable with a y-variable"
                    )

    @property
    def kind(self) -> str:
        if any(block.bilinear for block in self.blocks):
            return "BMI"
        return "LMI"

    @property
    def m_theta(self) -> int:
        return self.layout.m_theta

    @property
    def dimension(self) -> int:
        return problem_dimension(self)

    @property
    def strict(self) -> bool:
        return is_strict(self)

    @property
    def bilinear_x_indices(self) -> List[int]:
        """x-variables that appear in some bilinear term."""
        return sorted({i for b in self.blocks for i, _ in b.bilinear})

    def with_parameters(self, parameters: ParamTable) -> "UncertainProblem":
        return replace(self, parameters=parameters)


def with_nominal_box(p: UncertainProblem) -> UncertainProblem:
    return p.with_parameters(p.parameters.degenerate())


def problem_dimension(p: UncertainProblem) -> int:
    """n used by the VC bounds: blocks are stacked block-diagonally."""
    return sum(block.dim for block in p.blocks)


def is_strict(p: UncertainProblem) -> bool:
    return all(block.strict for block in p.blocks)


# ______________________________________________________________________________
# Instantiation


class InstantiatedConstraint(NamedTuple):
    block: str
    strict: bool
    constant: np.ndarray
    linear: np.ndarray
    bilinear: Dict[Tuple[int, int], np.ndarray]


class ConstraintStack(NamedTuple):
    """One block instantiated at N samples: arrays of shape (N, n, n),
    (N, m_θ, n, n) and (N, n, n) per bilinear pair."""

    block: str
    strict: bool
    constant: np.ndarray
    linear: np.ndarray
    bilinear: Dict[Tuple[int, int], np.ndarray]

    @property
    def samples(self):
        return self.constant.shape[0]

    @property
    def dim(self):
        return self.constant.shape[-1]

    def at(self, k) -> InstantiatedConstraint:
        return InstantiatedConstraint(
            self.block,
            self.strict,
            self.constant[k],
            self.linear[k],
            {pair: h[k] for pair, h in self.bilinear.items()},
        )


def sample_count(
    assignment: Dict[str, np.ndarray], count: Optional[int] = None
) -> int:
    """Number of samples in the assignment. A parameter-free problem has
    empty assignments, so the caller passes the count."""
    lengths = {np.size(v) for v in assignment.values()}
    if count is not None:
        lengths.add(count)
    if len(lengths) > 1:
        raise ModelError("parameter arrays differ in length")
    return lengths.pop() if lengths else 1


def evaluate_grid(grid: Grid, dim, assignment, count) -> np.ndarray:
    out = np.zeros((count, dim, dim))
    seen = {}
    for (i, j), e in grid.items():
        key = id(e)
        if key not in seen:
            seen[key] = evaluate(e, assignment)
        out[:, i, j] = seen[key]
    return out


def symmetrize(stack: np.ndarray, block_name: str) -> np.ndarray:
    asym = np.abs(stack - np.swapaxes(stack, -1, -2)).max(axis=(-2, -1))
    scale = np.abs(stack).max(axis=(-2, -1))
    if np.any(asym > SYMMETRY_TOL * scale):
        raise ModelError(f"block {block_name} is not symmetric")
    return (stack + np.swapaxes(stack, -1, -2)) / 2


def instantiate_many(
    p: UncertainProblem,
    assignment: Dict[str, np.ndarray],
    count: Optional[int] = None,
) -> List[ConstraintStack]:
    """Instantiate every block at every sample of the assignment
    (parameter name -> array of N values)."""
    missing = set(p.parameters.names) - set(assignment)
    if missing:
        raise ModelError(f"unbound parameters {sorted(missing)}")
    count = sample_count(assignment, count)
    m = p.layout.m_theta
    stacks = []
    for block in p.blocks:
        n = block.dim

        def grid_values(grid):
            values = evaluate_grid(grid, n, assignment, count)
            return symmetrize(values, block.name)

        linear = np.zeros((count, m, n, n))
        for index, grid in block.linear.items():
            linear[:, index] = grid_values(grid)
        bilinear = {
            pair: grid_values(grid) for pair, grid in block.bilinear.items()
        }
        stacks.append(
            ConstraintStack(
                block.name,
                block.strict,
                grid_values(block.constant),
                linear,
                bilinear,
            )
        )
    return stacks


def as_assignment(q: Dict[str, float]) -> Dict[str, np.ndarray]:
    return {name: np.atleast_1d(np.asarray(v, float)) for name, v in q.items()}


def instantiate(
    p: UncertainProblem, q: Dict[str, float]
) -> List[InstantiatedConstraint]:
    return [stack.at(0) for stack in instantiate_many(p, as_assignment(q))]


def constraint_matrices(
    stack: ConstraintStack, theta: np.ndarray
) -> np.ndarray:
    """F(θ, q) for every sample of the stack."""
    theta = np.asarray(theta, dtype=float)
    matrices = stack.constant + np.einsum("i,kiab->kab", theta, stack.linear)
    for (i, j), h in stack.bilinear.items():
        matrices = matrices + theta[i] * theta[j] * h
    return matrices


# ______________________________________________________________________________
# Definiteness


def inf_norm(stack: np.ndarray) -> np.ndarray:
    return np.abs(stack).sum(axis=-1).max(axis=-1)


def _factorizes(M: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        return False
    return True


def cholesky_succeeds(stack: np.ndarray) -> np.ndarray:
    """Where a Cholesky factorisation of each matrix finds positive pivots.
    One batched call, then matrix by matrix only if some factorisation
    fails."""
    if _factorizes(stack):
        return np.ones(stack.shape[0], dtype=bool)
    return np.array([_factorizes(M) for M in stack], dtype=bool)


def definiteness_mask(stack: np.ndarray, strict: bool) -> np.ndarray:
    """One bool per matrix: λ_min > τ (strict) or λ_min > -τ (nonstrict),
    with τ = 1e-9·max(1, |M|∞)."""
    stack = np.asarray(stack, dtype=float)
    if stack.ndim == 2:
        stack = stack[None]
    tau = PD_TOL * np.maximum(1.0, inf_norm(stack))
    shift = tau if strict else -tau
    identity = np.eye(stack.shape[-1])
    return cholesky_succeeds(stack - shift[:, None, None] * identity)


def is_positive_definite(M) -> bool:
    return bool(definiteness_mask(M, strict=True)[0])


def is_positive_semidefinite(M) -> bool:
    return bool(definiteness_mask(M, strict=False)[0])


def min_eigenvalue(stack) -> np.ndarray:
    return np.linalg.eigvalsh(stack)[..., 0]


def principal_minors_check(M, mode="leading") -> bool:
    """Determinant tests: all leading minors > 0, or all 2^n principal
    minors >= 0. Meant as an oracle for small matrices."""
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    scale = max(1.0, np.abs(M).max())

    def allowance(k):
        return k * np.finfo(float).eps * scale**k

    if mode == "leading":
        return all(
            np.linalg.det(M[:k, :k]) > allowance(k) for k in range(1, n + 1)
        )
    if mode != "all":
        raise ValueError(f"unknown mode {mode!r}")
    if n > MAX_ALL_MINORS_DIM:
        raise ValueError(
            f"all-minors check limited to n <= {MAX_ALL_MINORS_DIM}, got {n}"
        )
    for k in range(1, n + 1):
        for rows in itertools.combinations(range(n), k):
            index = np.ix_(rows, rows)
            if np.linalg.det(M[index]) < -allowance(k):
                return False
    return True


# ______________________________________________________________________________
# Violation indicators


def indicators(
    p: UncertainProblem,
    theta,
    assignment: Dict[str, np.ndarray],
    count: Optional[int] = None,
) -> np.ndarray:
    """g(θ, q) for every sample of the assignment: 0 when every block passes
    its definiteness check, 1 otherwise."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (p.m_theta,):
        raise ModelError(f"θ must have length {p.m_theta}")
    count = sample_count(assignment, count)
    passed = np.ones(count, dtype=bool)
    for stack in instantiate_many(p, assignment, count):
        matrices = constraint_matrices(stack, theta)
        passed &= definiteness_mask(matrices, stack.strict)
    return (~passed).astype(int)


def indicator_g(p: UncertainProblem, theta, q: Dict[str, float]) -> int:
    return int(indicators(p, theta, as_assignment(q))[0])


__all__ = [
    "ConstraintBlock",
    "ConstraintStack",
    "DecisionLayout",
    "EvaluationError",
    "InstantiatedConstraint",
    "ModelError",
    "ParamTable",
    "Parameter",
    "UncertainProblem",
    "Variable",
    "constraint_matrices",
    "definiteness_mask",
    "indicator_g",
    "indicators",
    "instantiate",
    "instantiate_many",
    "is_positive_definite",
    "is_positive_semidefinite",
    "principal_minors_check",
    "problem_dimension",
    "with_nominal_box",
]
