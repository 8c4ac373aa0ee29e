import copy
import json

import numpy as np
import pytest

from ..problem_file import (
    ProblemFileError,
    describe,
    load_problem,
    parse_problem_spec,
)
from .resources import RESOURCES, load_resource

TESTBED = {
    "parameters": [{"name": "q", "nominal": 0.5, "lower": 0, "upper": 1}],
    "variables": [{"name": "x"}],
    "objective": {"x": 1},
    "blocks": [
        {"dim": 1, "constant": {"0,0": "-q"}, "linear": {"x": {"0,0": 1}}}
    ],
}


def edited(**changes):
    document = copy.deepcopy(TESTBED)
    document.update(changes)
    return document


def test_testbed_document():
    p = parse_problem_spec(TESTBED)
    assert p.kind == "LMI"
    assert p.m_theta == 1
    assert p.dimension == 1
    assert p.strict
    assert p.blocks[0].name == "blocks[0]"


@pytest.mark.parametrize(
    "name, kind, m_theta, n, strict",
    [
        ("testbed.json", "LMI", 1, 1, True),
        ("infeasible.json", "LMI", 1, 2, True),
        ("constant.json", "LMI", 1, 2, False),
        ("two_by_two.json", "LMI", 2, 3, False),
        ("manipulator.json", "BMI", 13, 11, True),
    ],
)
def test_shipped_resources(name, kind, m_theta, n, strict):
    p = load_resource(name)
    assert p.name == name[: -len(".json")]
    description = describe(p)
    assert description["kind"] == kind
    assert description["m_theta"] == m_theta
    assert description["n"] == n
    assert description["strict"] == strict


def test_manipulator_file():
    p = load_resource("manipulator.json")
    assert p.parameters.names == ["M", "L_t", "I_m", "I_son", "c", "beta"]
    m = p.parameters.parameters[0]
    assert m.lower < m.nominal < m.upper < 0
    assert p.initial == {"f1": -0.001, "f2": 0.1}
    assert p.objective[p.layout.index("gamma")] == 1.0
    assert np.count_nonzero(p.objective) == 1
    assert [b.dim for b in p.blocks] == [4, 1, 6]


def test_name_defaults_to_stem(tmp_path):
    path = tmp_path / "scalar.json"
    path.write_text(json.dumps(TESTBED), encoding="utf-8")
    assert load_problem(path).name == "scalar"


def test_relative_uncertainty():
    document = edited(
        parameters=[
            {"name": "q", "nominal": -2.0, "relative_uncertainty": 0.5}
        ],
    )
    p = parse_problem_spec(document)
    assert p.parameters.lower[0] == -3.0
    assert p.parameters.upper[0] == -1.0


def test_matrix_variables_and_mirroring():
    document = edited(
        variables=[{"name": "X", "dim": 2}],
        objective={"X[0,0]": 1, "X[1,1]": 1},
        blocks=[
            {
                "dim": 2,
                "linear": {
                    "X[0,0]": {"0,0": 1},
                    "X[0,1]": {"1,0": 1},
                    "X[1,1]": {"1,1": "q"},
                },
            }
        ],
    )
    p = parse_problem_spec(document)
    assert p.m_theta == 3
    grid = p.blocks[0].linear[1]
    assert grid[0, 1] == grid[1, 0] == 1.0


@pytest.mark.parametrize(
    "changes, path",
    [
        (dict(parameters={}), "parameters"),
        (dict(objective={"y": 1}), "objective.y"),
        (dict(objective={"x": "1"}), "objective.x"),
        (dict(blocks=[]), "blocks"),
        (
            dict(
                parameters=[
                    {"name": "q", "nominal": 2, "lower": 0, "upper": 1}
                ]
            ),
            "parameters[0]",
        ),
        (
            dict(
                parameters=[
                    {"name": "q", "nominal": 1, "relative_uncertainty": -1}
                ]
            ),
            "parameters[0].relative_uncertainty",
        ),
        (
            dict(blocks=[{"dim": 1, "constant": {"0,0": "-r"}}]),
            'blocks[0].constant."0,0"',
        ),
        (
            dict(blocks=[{"dim": 1, "constant": {"0,0": "-q +"}}]),
            'blocks[0].constant."0,0"',
        ),
        (
            dict(blocks=[{"dim": 1, "constant": {"0;0": 1}}]),
            'blocks[0].constant."0;0"',
        ),
        (
            dict(blocks=[{"dim": 2, "constant": {"0,1": 1, "1,0": 1}}]),
            'blocks[0].constant."1,0"',
        ),
        (
            dict(blocks=[{"dim": 1, "constant": {"1,1": 1}}]),
            "blocks[0].constant",
        ),
        (
            dict(blocks=[{"dim": 1, "linear": {"z": {"0,0": 1}}}]),
            "blocks[0].linear.z",
        ),
        (dict(blocks=[{"dim": 0}]), "blocks[0].dim"),
        (dict(blocks=[{"dim": 1, "strict": "yes"}]), "blocks[0].strict"),
        (dict(variables=[{"name": "x", "dim": 1.5}]), "variables[0].dim"),
        (dict(initial={"x": 1.0}), "initial.x"),
        (dict(initial=[1.0]), "initial"),
        (dict(blocks=[{"dim": 1, "linear": ["x"]}]), "blocks[0].linear"),
        (dict(blocks=[{"dim": 1, "bilinear": []}]), "blocks[0].bilinear"),
        (
            dict(blocks=[{"dim": 1, "bilinear": {"x": ["y"]}}]),
            "blocks[0].bilinear.x",
        ),
    ],
)
def test_schema_errors_name_the_path(changes, path):
    with pytest.raises(ProblemFileError) as error:
        parse_problem_spec(edited(**changes))
    assert str(error.value).startswith(path)


def test_bilinear_needs_x_then_y():
    document = edited(
        variables=[{"name": "x"}, {"name": "y", "role": "y"}],
        blocks=[{"dim": 1, "bilinear": {"y": {"x": {"0,0": 1}}}}],
    )
    with pytest.raises(ProblemFileError) as error:
        parse_problem_spec(document)
    assert error.value.path == "blocks[0].bilinear.y.x"


def test_missing_field():
    document = edited()
    del document["variables"]
    with pytest.raises(ProblemFileError, match="variables"):
        parse_problem_spec(document)


def test_file_errors(tmp_path):
    with pytest.raises(ProblemFileError, match="cannot read"):
        load_problem(tmp_path / "missing.json")
    broken = tmp_path / "broken.json"
    broken.write_text('{"parameters": [', encoding="utf-8")
    with pytest.raises(ProblemFileError, match="line 1"):
        load_problem(broken)
    assert issubclass(ProblemFileError, ValueError)


def test_resources_directory_ships_docs_examples():
    names = sorted(path.name for path in RESOURCES.glob("*.json"))
    assert "manipulator.json" in names
    assert "testbed.json" in names
