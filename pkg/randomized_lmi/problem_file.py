"""JSON problem files, see docs/problem-file.md."""
import json
import re
from dataclasses import replace
from pathlib import Path
from typing import Dict, List

import numpy as np

from .expr import ExprSyntaxError, free_params, parse
from .problem import (
    ConstraintBlock,
    DecisionLayout,
    ModelError,
    Parameter,
    ParamTable,
    UncertainProblem,
    Variable,
    relative_box,
    symmetric_grid,
)

ENTRY = re.compile(r"\s*(\d+)\s*,\s*(\d+)\s*")


class ProblemFileError(ValueError):
    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _require(document: Dict, key, path, kind=None):
    if not isinstance(document, dict) or key not in document:
        raise ProblemFileError(f"missing field {key!r}", path)
    value = document[key]
    if kind is not None and not isinstance(value, kind):
        raise ProblemFileError(
            f"expected {kind.__name__}", f"{path}.{key}" if path else key
        )
    return value


def _mapping(document: Dict, key, path) -> Dict:
    """Optional object-valued field, empty when absent."""
    value = document.get(key, {})
    if not isinstance(value, dict):
        raise ProblemFileError(
            "expected an object", f"{path}.{key}" if path else key
        )
    return value


def _number(value, path) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProblemFileError("expected a number", path)
    return float(value)


def parse_parameter(spec, path) -> Parameter:
    name = _require(spec, "name", path, str)
    nominal = _number(_require(spec, "nominal", path), f"{path}.nominal")
    try:
        if "relative_uncertainty" in spec:
            r_path = f"{path}.relative_uncertainty"
            r = _number(spec["relative_uncertainty"], r_path)
            if r < 0:
                raise ProblemFileError("must be >= 0", r_path)
            return relative_box(name, nominal, r)
        lower = _number(_require(spec, "lower", path), f"{path}.lower")
        upper = _number(_require(spec, "upper", path), f"{path}.upper")
        return Parameter(name, nominal, lower, upper)
    except ModelError as e:
        raise ProblemFileError(str(e), path) from None


def parse_variable(spec, path) -> Variable:
    name = _require(spec, "name", path, str)
    dim = spec.get("dim")
    if dim is not None and (isinstance(dim, bool) or not isinstance(dim, int)):
        raise ProblemFileError("expected an integer", f"{path}.dim")
    try:
        return Variable(name, dim, spec.get("role", "x"))
    except ModelError as e:
        raise ProblemFileError(str(e), path) from None


def parse_expression(value, known, path):
    if isinstance(value, bool):
        raise ProblemFileError("expected an expression", path)
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ProblemFileError("expected an expression", path)
    try:
        e = parse(value)
    except ExprSyntaxError as error:
        raise ProblemFileError(str(error), path) from None
    unknown = free_params(e) - known
    if unknown:
        raise ProblemFileError(f"unknown parameters {sorted(unknown)}", path)
    return e


def parse_grid(spec, dim, known, path):
    if not isinstance(spec, dict):
        raise ProblemFileError("expected an entry map", path)
    entries = {}
    for key, value in spec.items():
        entry_path = f'{path}."{key}"'
        match = ENTRY.fullmatch(key)
        if not match:
            raise ProblemFileError("entry keys look like 'i,j'", entry_path)
        i, j = int(match[1]), int(match[2])
        if (i, j) in entries or (j, i) in entries:
            raise ProblemFileError("entry given twice", entry_path)
        entries[i, j] = parse_expression(value, known, entry_path)
    try:
        return symmetric_grid(entries, dim)
    except ModelError as e:
        raise ProblemFileError(str(e), path) from None


def parse_block(spec, layout: DecisionLayout, known, path) -> ConstraintBlock:
    name = spec.get("name", path) if isinstance(spec, dict) else path
    dim = _require(spec, "dim", path, int)
    if dim < 1:
        raise ProblemFileError("must be >= 1", f"{path}.dim")
    strict = spec.get("strict", True)
    if not isinstance(strict, bool):
        raise ProblemFileError("expected true or false", f"{path}.strict")

    def index(variable, variable_path):
        try:
            return layout.index(variable)
        except ModelError as e:
            raise ProblemFileError(str(e), variable_path) from None

    constant = parse_grid(
        spec.get("constant", {}), dim, known, f"{path}.constant"
    )
    linear = {}
    for variable, grid in _mapping(spec, "linear", path).items():
        grid_path = f"{path}.linear.{variable}"
        linear[index(variable, grid_path)] = parse_grid(
            grid, dim, known, grid_path
        )
    bilinear = {}
    roles = layout.roles
    bilinear_spec = _mapping(spec, "bilinear", path)
    for x in bilinear_spec:
        for y, grid in _mapping(bilinear_spec, x, f"{path}.bilinear").items():
            grid_path = f"{path}.bilinear.{x}.{y}"
            i, j = index(x, grid_path), index(y, grid_path)
            if roles[i] != "x" or roles[j] != "y":
                raise ProblemFileError(
                    "bilinear terms pair an x-variable with a y-variable",
                    grid_path,
                )
            bilinear[i, j] = parse_grid(grid, dim, known, grid_path)
    return ConstraintBlock(name, dim, constant, linear, bilinear, strict)


def parse_problem_spec(document: Dict) -> UncertainProblem:
    if not isinstance(document, dict):
        raise ProblemFileError("a problem file holds a JSON object")
    specs = _require(document, "parameters", "", list)
    try:
        parameters = ParamTable(
            tuple(
                parse_parameter(spec, f"parameters[{k}]")
                for k, spec in enumerate(specs)
            )
        )
    except ModelError as e:
        raise ProblemFileError(str(e), "parameters") from None
    try:
        layout = DecisionLayout(
            tuple(
                parse_variable(spec, f"variables[{k}]")
                for k, spec in enumerate(
                    _require(document, "variables", "", list)
                )
            )
        )
    except ModelError as e:
        raise ProblemFileError(str(e), "variables") from None
    known = set(parameters.names)

    objective = np.zeros(layout.m_theta)
    for name, value in _require(document, "objective", "", dict).items():
        try:
            objective[layout.index(name)] = _number(value, f"objective.{name}")
        except ModelError as e:
            raise ProblemFileError(str(e), f"objective.{name}") from None

    blocks = tuple(
        parse_block(spec, layout, known, f"blocks[{k}]")
        for k, spec in enumerate(_require(document, "blocks", "", list))
    )
    if not blocks:
        raise ProblemFileError("at least one block is needed", "blocks")

    initial = {}
    for name, value in _mapping(document, "initial", "").items():
        try:
            if layout.roles[layout.index(name)] != "y":
                raise ProblemFileError("only y-variables", f"initial.{name}")
        except ModelError as e:
            raise ProblemFileError(str(e), f"initial.{name}") from None
        initial[name] = _number(value, f"initial.{name}")

    try:
        return UncertainProblem(
            parameters,
            layout,
            objective,
            blocks,
            name=document.get("name", ""),
            initial=initial,
        )
    except ModelError as e:
        raise ProblemFileError(str(e)) from None


def load_problem(path) -> UncertainProblem:
    try:
        with open(path, encoding="utf-8") as f:
            document = json.load(f)
    except OSError as e:
        raise ProblemFileError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ProblemFileError(
            f"invalid JSON at line {e.lineno}, column {e.colno}"
        ) from None
    problem = parse_problem_spec(document)
    if not problem.name:
        problem = replace(problem, name=Path(path).stem)
    return problem


def describe(p: UncertainProblem) -> Dict:
    return dict(
        name=p.name,
        kind=p.kind,
        m_theta=p.m_theta,
        m_x=len(p.layout.x_indices),
        m_y=len(p.layout.y_indices),
        n=p.dimension,
        strict=p.strict,
        parameters=len(p.parameters),
        blocks=[
            dict(name=b.name, dim=b.dim, strict=b.strict) for b in p.blocks
        ],
    )


__all__: List[str] = [
    "ProblemFileError",
    "describe",
    "load_problem",
    "parse_problem_spec",
]
