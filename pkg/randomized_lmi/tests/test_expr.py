import math

import numpy as np
import pytest

from ..expr import (
    EvaluationError,
    Expr,
    ExprSyntaxError,
    Param,
    evaluate,
    format_expr,
    free_params,
    parse,
    subexpressions,
    tokenize,
)

MANIPULATOR = dict(
    M=-260.6, L_t=0.6, I_m=0.001, I_son=400.0, c=130.0, beta=0.4
)


def test_expr_operators():
    x, y = Param("x"), Param("y")
    assert x + 1 == Expr("+", x, 1)
    assert 2 * y == Expr("*", 2, y)
    assert -x == Expr("-", x)
    assert x**2 == Expr("^", x, 2)
    assert x != y
    assert x.is_param and not (x + y).is_param


def test_param_rejects_bad_names():
    with pytest.raises(ValueError):
        Param("2x")


def test_pow_needs_integer_exponent():
    with pytest.raises(TypeError):
        Param("x") ** 0.5


def test_tokenize_offsets():
    tokens = tokenize("a + 12.5e-1*b")
    assert [t.kind for t in tokens] == [
        "name",
        "op",
        "number",
        "op",
        "name",
        "end",
    ]
    assert [t.offset for t in tokens] == [0, 2, 4, 11, 12, 13]


@pytest.mark.parametrize(
    "text, expected",
    [
        ("1 + 2 * 3", 7.0),
        ("(1 + 2) * 3", 9.0),
        ("2 ^ 3 ^ 1", None),
        ("-2 ^ 2", -4.0),
        ("8 / 4 / 2", 1.0),
        ("10 - 4 - 3", 3.0),
        ("2 ^ -1", 0.5),
        ("--3", 3.0),
        (".5 * 4", 2.0),
    ],
)
def test_precedence(text, expected):
    if expected is None:
        with pytest.raises(ExprSyntaxError):
            parse(text)
    else:
        assert math.isclose(evaluate(parse(text), {}), expected)


@pytest.mark.parametrize(
    "text, expected",
    [
        ("c/(M^2*I_m)", 1.91423),
        ("-beta/I_son", -0.001),
        ("-c/(M^2*I_m) - c/I_son", -2.23923),
        ("L_t/(M*I_m)", -2.30238),
    ],
)
def test_manipulator_entries(text, expected):
    value = evaluate(parse(text), MANIPULATOR)
    assert math.isclose(value, expected, rel_tol=1e-5)


@pytest.mark.parametrize(
    "text, offset",
    [
        ("1 +", 3),
        ("(a * b", 6),
        ("a $ b", 2),
        ("a b", 2),
        ("x ^ y", 4),
        ("x ^ 1.5", 4),
        ("", 0),
    ],
)
def test_syntax_errors_carry_offset(text, offset):
    with pytest.raises(ExprSyntaxError) as error:
        parse(text)
    assert error.value.offset == offset
    assert isinstance(error.value, ValueError)


def test_offset_counts_bytes():
    with pytest.raises(ExprSyntaxError) as error:
        parse("θ")
    assert error.value.offset == 0
    with pytest.raises(ExprSyntaxError) as error:
        parse("a + θ")
    assert error.value.offset == 4


@pytest.mark.parametrize(
    "text",
    [
        "c/(M^2*I_m)",
        "-c/(M^2*I_m) - c/I_son",
        "2*beta/I_son",
        "-(a - -b) ^ 3",
        "(x ^ -2) * y - 1.5e-3",
        "a - (b - c)",
    ],
)
def test_format_parses_back(text):
    e = parse(text)
    assert parse(format_expr(e)) == e


def test_free_params_and_subexpressions():
    e = parse("a * (b + 1) ^ 2 - a")
    assert free_params(e) == {"a", "b"}
    assert free_params(parse("3 * 4")) == set()
    assert e in list(subexpressions(e))
    assert 1.0 in list(subexpressions(e))


def test_evaluate_arrays():
    e = parse("q ^ 2 - r")
    q = np.array([0.0, 1.0, 2.0])
    values = evaluate(e, {"q": q, "r": 1.0})
    assert np.allclose(values, [-1.0, 0.0, 3.0])


def test_evaluate_constant_is_float():
    assert evaluate(parse("2 * 3"), {}) == 6.0
    assert isinstance(evaluate(parse("x"), {"x": 2.0}), float)


@pytest.mark.parametrize(
    "text, q, culprit",
    [
        ("1 / (a - 1)", {"a": 1.0}, "(1.0 / (a - 1.0))"),
        ("a ^ -1", {"a": 0.0}, "(a ^ -1)"),
        ("b + 1", {"a": 1.0}, "b"),
        ("a ^ 400", {"a": 1e10}, "(a ^ 400)"),
    ],
)
def test_evaluation_errors(text, q, culprit):
    with pytest.raises(EvaluationError) as error:
        evaluate(parse(text), q)
    assert format_expr(error.value.subexpression) == culprit


def test_division_by_zero_in_one_sample():
    with pytest.raises(EvaluationError):
        evaluate(parse("1 / q"), {"q": np.array([1.0, 0.0, 2.0])})


# ______________________________________________________________________________
# Random trees

PARAMS = ["a", "b", "c"]
POINT = dict(a=0.75, b=-1.5, c=2.0)


def random_tree(rng, depth):
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.5:
            return Param(PARAMS[rng.integers(len(PARAMS))])
        sign = rng.choice([-1.0, 1.0])
        return float(sign * rng.uniform(0.5, 3.0))
    kind = rng.integers(6)
    if kind == 0:
        return Expr("-", random_tree(rng, depth - 1))
    if kind == 1:
        return Expr("^", random_tree(rng, depth - 1), int(rng.integers(-2, 4)))
    op = "+-*/"[kind - 2]
    return Expr(op, random_tree(rng, depth - 1), random_tree(rng, depth - 1))


def direct(e, q):
    """Plain float recursion over the tree, failing where evaluate does."""
    if isinstance(e, float):
        return e
    if e.is_param:
        return q[e.op]
    if e.op == "^":
        value = float(np.power(direct(e.args[0], q), e.args[1]))
    elif len(e.args) == 1:
        return -direct(e.args[0], q)
    else:
        left, right = (direct(arg, q) for arg in e.args)
        if e.op == "+":
            value = left + right
        elif e.op == "-":
            value = left - right
        elif e.op == "*":
            value = left * right
        else:
            value = left / right
    if not math.isfinite(value):
        raise OverflowError(format_expr(e))
    return value


TREES = [random_tree(np.random.default_rng(seed), 8) for seed in range(200)]


@pytest.mark.parametrize(
    "e",
    [
        Expr("^", -2.0, 2),
        Expr("*", Param("x"), -2.0),
        Expr("-", 2.0),
        Expr("-", -2.0),
        Expr("^", Expr("-", 2.0), 3),
        Expr("-", Param("x"), -0.5),
    ],
)
def test_negative_constants_parse_back(e):
    text = format_expr(e)
    assert parse(text) == e
    assert evaluate(parse(text), {"x": 3.0}) == evaluate(e, {"x": 3.0})


def test_random_trees_parse_back():
    for e in TREES:
        assert parse(format_expr(e)) == e


def test_evaluate_matches_direct_recursion():
    checked = 0
    for e in TREES:
        try:
            expected = direct(e, POINT)
        except ArithmeticError:
            with pytest.raises(EvaluationError):
                evaluate(e, POINT)
            continue
        assert math.isclose(
            evaluate(e, POINT), expected, rel_tol=1e-12, abs_tol=1e-12
        )
        checked += 1
    assert checked > 100


def test_evaluate_arrays_match_scalars():
    q = {name: np.array([0.5, 1.25, 2.0]) for name in PARAMS}
    for e in TREES[:50]:
        try:
            values = evaluate(e, q)
        except EvaluationError:
            continue
        for k in range(3):
            point = {name: float(v[k]) for name, v in q.items()}
            assert math.isclose(
                float(np.broadcast_to(values, (3,))[k]),
                evaluate(e, point),
                rel_tol=1e-9,
                abs_tol=1e-9,
            )
