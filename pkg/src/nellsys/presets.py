"""Built-in example problems.

Three canonical systems on the unit disk, all with L = -Laplacian and
Dirichlet boundary operators, entered in the divided form
L u_i = lambda_i f_i(x, u, w) with the nonlocal coefficient moved into
the functional w:

* ``ex-3.1`` - two coupled equations with exponential nonlocal weights
  and boundary values driven by point evaluations at the origin and an
  integral functional; the existence certificate passes at the shipped
  parameters.
* ``ex-3.2`` - two coupled equations with superlinear nonlinearities on
  the box [0, pi/4] x [0, pi/2]; at the shipped parameters the
  non-existence certificate passes with hand-derived constants.
* ``mean-field`` - single equation -Laplacian u = lambda e^u / int e^u,
  a normalized-exponential demo problem.
"""

from __future__ import annotations

import json
import math

from .errors import ConfigError
from .problem import ProblemSpec, load_problem

_LAPLACE_DIRICHLET = {
    "operator": {"a11": "1", "a12": "0", "a22": "1", "b1": "0", "b2": "0", "a0": "0"},
    "boundary": {"kind": "dirichlet", "zeta": "1"},
}

_DOCUMENTS: dict[str, dict] = {
    "ex-3.1": {
        "domain": {"type": "disk", "radius": 1.0},
        "resolution": [64, 128],
        "components": [
            {
                **_LAPLACE_DIRICHLET,
                "f": "exp(max(u1,u2))*w",
                "w": {"expr": "inv(INT(exp(max(u1,u2))))", "monotone": "dec"},
                "h": {"expr": "EVAL(1,[0,0])^2 + EVAL(2,[0,0])^(1/2)",
                      "monotone": "inc"},
                "lambda": 1.0 / 3.0,
                "eta": 0.25,
                "rho": 1.0,
            },
            {
                **_LAPLACE_DIRICHLET,
                "f": "max(u1,u2)^2*w",
                "w": {"expr": "inv(INT(exp(u1+u2)))", "monotone": "dec"},
                "h": {"expr": "EVAL(1,[0,0])^(1/4) + INT(u2)^2",
                      "monotone": "inc"},
                "lambda": 0.2,
                "eta": 1.0 / 15.0,
                "rho": 1.0,
            },
        ],
    },
    "ex-3.2": {
        "domain": {"type": "disk", "radius": 1.0},
        "resolution": [64, 128],
        "components": [
            {
                **_LAPLACE_DIRICHLET,
                "f": "u1^2*sin(u2)*w",
                "w": {"expr": "inv(INT(exp(max(u1,u2))))", "monotone": "dec"},
                "h": {"expr": "EVAL(1,[0,0]) + EVAL(2,[0,0])^2",
                      "monotone": "inc"},
                "lambda": 0.5,
                "eta": 1.0 / 3.0,
                "rho": math.pi / 4.0,
            },
            {
                **_LAPLACE_DIRICHLET,
                "f": "u2^4*cos(u1)*w",
                "w": {"expr": "inv(INT(exp(u1+u2)))", "monotone": "dec"},
                "h": {"expr": "EVAL(1,[0,0]) + EVAL(2,[0,0])^3",
                      "monotone": "inc"},
                "lambda": 0.5,
                "eta": 0.25,
                "rho": math.pi / 2.0,
            },
        ],
    },
    "mean-field": {
        "domain": {"type": "disk", "radius": 1.0},
        "resolution": [64, 128],
        "components": [
            {
                **_LAPLACE_DIRICHLET,
                "f": "exp(u1)*w",
                "w": {"expr": "inv(INT(exp(u1)))", "monotone": "dec"},
                "h": {"expr": "0", "monotone": "inc"},
                "lambda": 1.0,
                "eta": 0.0,
                "rho": 2.0,
            },
        ],
    },
}

#: declared monotonicity of each f_i in (u, w); cos(u1) makes the second
#: nonlinearity of ex-3.2 non-monotone, so its maxima are sampled
_F_MONOTONE = {
    "ex-3.1": ("inc", "inc"),
    "ex-3.2": ("inc", "none"),
    "mean-field": ("inc",),
}

_ALIASES = {
    "example-3.1": "ex-3.1",
    "example-3.2": "ex-3.2",
    "meanfield": "mean-field",
}


def builtin_ids() -> tuple[str, ...]:
    return tuple(_DOCUMENTS)


def _canonical(example_id: str) -> str:
    key = _ALIASES.get(example_id, example_id)
    if key not in _DOCUMENTS:
        raise ConfigError(
            f"unknown example {example_id!r}; available: {', '.join(_DOCUMENTS)}")
    return key


def builtin_document(example_id: str) -> dict:
    """The raw problem document of a built-in example (deep copy)."""
    return json.loads(json.dumps(_DOCUMENTS[_canonical(example_id)]))


def builtin_example(example_id: str) -> ProblemSpec:
    """Load a built-in example into a validated ProblemSpec."""
    key = _canonical(example_id)
    return load_problem(builtin_document(key), f_monotone=_F_MONOTONE[key])
