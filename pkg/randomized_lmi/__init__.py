__version__ = "0.1.0"

from .expr import EvaluationError, Expr, ExprSyntaxError, evaluate, parse
from .learning import (
    ParameterError,
    ProbabilisticLevels,
    sample_bound_one_sided,
    sample_bound_two_sided,
    validation_bound,
)
from .problem import (
    ModelError,
    UncertainProblem,
    indicator_g,
    instantiate,
    is_positive_definite,
    is_positive_semidefinite,
)
from .problem_file import ProblemFileError, load_problem
from .sampling import ScenarioSet, draw, empirical_violation
from .sequential import (
    SequentialConfig,
    SequentialError,
    audit,
    run_sequential,
)
from .solver import SolverError, SolverOptions, solve_scenario
