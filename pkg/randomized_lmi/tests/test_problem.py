import math

import numpy as np
import pytest

from ..expr import EvaluationError, parse
from ..problem import (
    ConstraintBlock,
    DecisionLayout,
    ModelError,
    Parameter,
    ParamTable,
    UncertainProblem,
    Variable,
    definiteness_mask,
    indicator_g,
    indicators,
    instantiate,
    instantiate_many,
    is_positive_definite,
    is_positive_semidefinite,
    min_eigenvalue,
    principal_minors_check,
    problem_dimension,
    relative_box,
    symmetric_grid,
    with_nominal_box,
)
from .resources import load_resource

# leading minors 1, 0, 0 although the matrix is indefinite
TRAP = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [1.0, 1.0, 0.0]])


def scalar_problem(strict=True):
    """min x subject to x - q > 0 (or >= 0), q in [0, 1]."""
    x = Variable("x")
    block = ConstraintBlock(
        "x - q",
        1,
        constant=symmetric_grid({(0, 0): -parse("q")}, 1),
        linear={0: symmetric_grid({(0, 0): 1.0}, 1)},
        strict=strict,
    )
    return UncertainProblem(
        ParamTable((Parameter("q", 0.5, 0.0, 1.0),)),
        DecisionLayout((x,)),
        np.array([1.0]),
        (block,),
    )


def constant_problem(matrix, strict=True):
    n = len(matrix)
    entries = {(i, j): matrix[i][j] for i in range(n) for j in range(i, n)}
    block = ConstraintBlock(
        "constant", n, constant=symmetric_grid(entries, n), strict=strict
    )
    return UncertainProblem(
        ParamTable(()), DecisionLayout(()), np.zeros(0), (block,)
    )


def random_symmetric(rng, n, negative):
    """Q diag(λ) Qᵀ with |λ| in [0.1, 2] and the given number of negative
    eigenvalues."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigenvalues = rng.uniform(0.1, 2.0, size=n)
    eigenvalues[:negative] *= -1
    m = q @ np.diag(eigenvalues) @ q.T
    return (m + m.T) / 2


def test_parameter_bounds():
    with pytest.raises(ModelError):
        Parameter("a", 2.0, 0.0, 1.0)
    p = relative_box("M", -260.6, 0.15)
    assert math.isclose(p.lower, -299.69)
    assert math.isclose(p.upper, -221.51)


def test_param_table():
    table = ParamTable(
        (Parameter("a", 1.0, 0.0, 2.0), Parameter("b", -1.0, -3.0, 0.0))
    )
    assert table.names == ["a", "b"]
    assert np.array_equal(table.nominal, [1.0, -1.0])
    assert table.nominal_point() == {"a": 1.0, "b": -1.0}
    flat = table.degenerate()
    assert np.array_equal(flat.lower, flat.upper)
    assert np.array_equal(flat.lower, table.nominal)
    with pytest.raises(ModelError):
        ParamTable((Parameter("a", 0, 0, 0), Parameter("a", 1, 1, 1)))


def test_layout_packing():
    layout = DecisionLayout(
        (Variable("X", 3), Variable("gamma"), Variable("f", role="y"))
    )
    assert layout.m_theta == 8
    assert layout.names[:6] == [
        "X[0,0]",
        "X[0,1]",
        "X[0,2]",
        "X[1,1]",
        "X[1,2]",
        "X[2,2]",
    ]
    assert layout.index("gamma") == 6
    assert layout.x_indices == list(range(7))
    assert layout.y_indices == [7]
    theta = layout.pack({"X[0,2]": 5.0, "f": -1.0})
    values = layout.unpack(theta)
    assert values["X"][2, 0] == values["X"][0, 2] == 5.0
    assert values["f"] == -1.0
    with pytest.raises(ModelError):
        layout.index("Y")


@pytest.mark.parametrize(
    "variables",
    [
        (Variable("x"), Variable("x")),
        (Variable("X", 2), Variable("X[0,1]")),
    ],
)
def test_layout_rejects_duplicates(variables):
    with pytest.raises(ModelError):
        DecisionLayout(variables)


def test_variable_validation():
    with pytest.raises(ModelError):
        Variable("x", role="z")
    with pytest.raises(ModelError):
        Variable("X", 0)


def test_symmetric_grid_mirrors():
    grid = symmetric_grid({(0, 1): 2.0}, 2)
    assert grid[1, 0] == grid[0, 1] == 2.0
    with pytest.raises(ModelError):
        symmetric_grid({(0, 2): 1.0}, 2)


def test_instantiate_identity():
    p = constant_problem([[1.0, 0.0], [0.0, 1.0]])
    (block,) = instantiate(p, {})
    assert np.array_equal(block.constant, np.eye(2))
    assert block.linear.shape == (0, 2, 2)


def test_instantiate_unit_coefficient():
    p = scalar_problem()
    (block,) = instantiate(p, {"q": 0.25})
    assert np.array_equal(block.linear[0], [[1.0]])
    assert block.constant[0, 0] == -0.25


def test_instantiate_is_deterministic():
    p = load_resource("manipulator.json")
    q = p.parameters.nominal_point()
    first, second = instantiate(p, q), instantiate(p, q)
    for a, b in zip(first, second):
        assert np.array_equal(a.constant, b.constant)
        assert np.array_equal(a.linear, b.linear)


def test_manipulator_at_nominal():
    p = load_resource("manipulator.json")
    nominal = p.parameters.nominal_point()
    blocks = {b.block: b for b in instantiate(p, nominal)}
    bounded_real = blocks["bounded real"]
    x03 = p.layout.index("X[0,3]")
    assert math.isclose(
        bounded_real.linear[x03][0, 2], 2.23923, rel_tol=1e-5
    )
    coefficient = bounded_real.linear[x03]
    assert np.array_equal(coefficient, coefficient.T)
    pair = (p.layout.index("X[3,3]"), p.layout.index("f1"))
    assert math.isclose(bounded_real.bilinear[pair][1, 3], 600.0)


def test_instantiate_errors():
    p = scalar_problem()
    with pytest.raises(ModelError):
        instantiate(p, {})
    block = ConstraintBlock(
        "1/q", 1, constant=symmetric_grid({(0, 0): parse("1/q")}, 1)
    )
    p = UncertainProblem(
        ParamTable((Parameter("q", 0.0, 0.0, 1.0),)),
        DecisionLayout(()),
        np.zeros(0),
        (block,),
    )
    with pytest.raises(EvaluationError):
        instantiate(p, {"q": 0.0})


def test_unknown_parameter_in_block():
    grid = symmetric_grid({(0, 0): parse("r")}, 1)
    block = ConstraintBlock("b", 1, constant=grid)
    with pytest.raises(ModelError):
        UncertainProblem(
            ParamTable(()), DecisionLayout(()), np.zeros(0), (block,)
        )


def test_bilinear_roles():
    layout = DecisionLayout((Variable("x"), Variable("y", role="y")))
    unit = symmetric_grid({(0, 0): 1.0}, 1)
    swapped = ConstraintBlock("b", 1, bilinear={(1, 0): unit})
    with pytest.raises(ModelError):
        UncertainProblem(ParamTable(()), layout, np.zeros(2), (swapped,))
    ok = ConstraintBlock("b", 1, bilinear={(0, 1): unit})
    p = UncertainProblem(ParamTable(()), layout, np.zeros(2), (ok,))
    assert p.kind == "BMI"
    assert p.bilinear_x_indices == [0]


def test_manipulator_dimensions():
    p = load_resource("manipulator.json")
    assert p.kind == "BMI"
    assert p.m_theta == 13
    assert problem_dimension(p) == p.dimension == 11
    assert p.strict
    assert len(p.layout.x_indices) == 11
    assert len(p.layout.y_indices) == 2


def test_with_nominal_box():
    p = with_nominal_box(scalar_problem())
    assert p.parameters.lower[0] == p.parameters.upper[0] == 0.5


@pytest.mark.parametrize(
    "theta, q, expected",
    [
        (2.0, 1.0, 0),
        (1.0, 1.0, 1),
        (1.0, 0.5, 0),
        (0.0, 0.5, 1),
    ],
)
def test_indicator_strict(theta, q, expected):
    assert indicator_g(scalar_problem(), [theta], {"q": q}) == expected


def test_indicator_nonstrict_boundary():
    p = scalar_problem(strict=False)
    assert indicator_g(p, [1.0], {"q": 1.0}) == 0
    assert indicator_g(p, [0.9], {"q": 1.0}) == 1


def test_indicator_leading_minor_trap():
    assert indicator_g(constant_problem(TRAP, strict=False), [], {}) == 1
    assert indicator_g(constant_problem(TRAP, strict=True), [], {}) == 1


def test_indicator_needs_full_theta():
    with pytest.raises(ModelError):
        indicator_g(scalar_problem(), [1.0, 2.0], {"q": 0.5})


def test_indicators_vectorized():
    q = np.array([0.1, 0.5, 0.9, 0.7])
    flags = indicators(scalar_problem(), [0.6], {"q": q})
    assert flags.tolist() == [0, 0, 1, 1]


def test_indicators_without_parameters():
    p = constant_problem([[1.0]])
    assert indicators(p, [], {}, count=3).tolist() == [0, 0, 0]
    (stack,) = instantiate_many(p, {}, 5)
    assert stack.samples == 5


def test_indicator_scale_invariance():
    rng = np.random.default_rng(7)
    for _ in range(20):
        m = random_symmetric(rng, 4, rng.integers(0, 3))
        scaled = 1e3 * m
        for strict in (True, False):
            assert indicator_g(
                constant_problem(m.tolist(), strict), [], {}
            ) == indicator_g(constant_problem(scaled.tolist(), strict), [], {})


@pytest.mark.parametrize("n", [1, 2, 5, 9])
def test_identity_is_definite(n):
    assert is_positive_definite(np.eye(n))
    assert is_positive_semidefinite(np.eye(n))
    assert principal_minors_check(np.eye(n), "leading")


def test_leading_minor_trap_checks():
    assert not is_positive_definite(TRAP)
    assert not is_positive_semidefinite(TRAP)
    assert not principal_minors_check(TRAP, "leading")
    assert not principal_minors_check(TRAP, "all")
    assert np.allclose(
        np.linalg.eigvalsh(TRAP), [-0.732051, 0.0, 2.732051], atol=1e-6
    )


def test_semidefinite_boundaries():
    assert is_positive_semidefinite(np.zeros((3, 3)))
    assert not is_positive_definite(np.zeros((3, 3)))
    assert is_positive_semidefinite(np.diag([1.0, 0.0]))
    assert not is_positive_definite(np.diag([1.0, 0.0]))
    assert principal_minors_check(np.diag([1.0, 0.0]), "all")


def test_strict_check_is_conservative():
    assert not is_positive_definite(np.diag([1.0, 1e-10]))
    assert is_positive_semidefinite(np.diag([1.0, -1e-10]))
    assert not is_positive_semidefinite(np.diag([1.0, -1e-6]))


def test_gram_matrices_are_definite():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = rng.integers(1, 7)
        b = rng.standard_normal((n, n))
        assert is_positive_definite(b.T @ b + 0.1 * np.eye(n))


def test_oracles_agree():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        n = int(rng.integers(1, 9))
        m = random_symmetric(rng, n, int(rng.integers(0, n + 1)))
        positive = np.linalg.eigvalsh(m)[0] > 0
        assert is_positive_definite(m) == positive
        assert is_positive_semidefinite(m) == positive
        assert principal_minors_check(m, "leading") == positive
        assert principal_minors_check(m, "all") == positive


def test_definiteness_mask_batched():
    stack = np.stack([np.eye(3), -np.eye(3), TRAP, np.diag([2.0, 1, 0])])
    assert definiteness_mask(stack, True).tolist() == [
        True,
        False,
        False,
        False,
    ]
    assert definiteness_mask(stack, False).tolist() == [
        True,
        False,
        False,
        True,
    ]
    assert np.allclose(min_eigenvalue(stack[:2]), [1.0, -1.0])


def test_principal_minors_limits():
    with pytest.raises(ValueError):
        principal_minors_check(np.eye(13), "all")
    with pytest.raises(ValueError):
        principal_minors_check(np.eye(2), "some")
