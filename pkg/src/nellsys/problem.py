"""Problem model: functionals, the document schema and discretization.

A problem is an n-component system

    L_i u_i = lambda_i f_i(x, u, w_i[u])      in the domain,
    B_i u_i = eta_i zeta_i(x) h_i[u]          on the boundary,

with nonlocal functionals w_i, h_i built from integrals over the domain
and point evaluations of the components.  Problems are loaded from JSON
documents (see ``load_problem``), validated on a coarse probe grid, and
then discretized on the working grid.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .elliptic import (BoundarySpec, DiscreteOperator, Eigenpair, OperatorSpec,
                       apply_K, assemble, lift_gamma, principal_eigenpair)
from .errors import ConfigError, SchemaError, ValidationError
from .expr import (Expr, Integral, PointEval, eval_expr, free_variables,
                   parse_expression, parse_functional_expression, to_source, walk)
from .grid import (Domain, Grid, ScalarField, SystemState, build_grid,
                   eval_at_point, quadrature_integral, sup_norm)

MONOTONE_KINDS = ("inc", "dec", "none")

_PROBE_RESOLUTION = {"disk": (8, 16), "rectangle": (8, 8)}
_DEFAULT_RESOLUTION = {"disk": (64, 128), "rectangle": (128, 128)}


@dataclass(frozen=True)
class FunctionalSpec:
    """A compact functional of the state with a declared monotonicity.

    ``monotone`` refers to the componentwise partial order on the state
    and is declared by the user, not inferred.
    """

    expr: Expr
    monotone: str = "none"
    source: str = ""

    def __post_init__(self):
        if self.monotone not in MONOTONE_KINDS:
            raise ConfigError(f"monotone must be one of {MONOTONE_KINDS}")

    @staticmethod
    def parse(text: str, monotone: str = "none") -> "FunctionalSpec":
        return FunctionalSpec(parse_functional_expression(text), monotone, text)


@dataclass(frozen=True)
class Component:
    """One equation of the system with its boundary data and parameters."""

    operator: OperatorSpec
    boundary: BoundarySpec
    zeta: Expr
    f: Expr
    w: FunctionalSpec
    h: FunctionalSpec
    lam: float
    eta: float
    rho: float
    f_monotone: str = "none"


@dataclass(frozen=True)
class ProblemSpec:
    """Validated n-component system on a disk or rectangle."""

    domain: Domain
    components: tuple[Component, ...]
    resolution: tuple[int, int]

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def box(self) -> tuple[float, ...]:
        """Upper corners (rho_1, ..., rho_n) of the solution box."""
        return tuple(c.rho for c in self.components)


# ---------------------------------------------------------------------------
# Functional evaluation
# ---------------------------------------------------------------------------

def _state_env(state: SystemState, grid: Grid) -> dict:
    env = {"x1": grid.x, "x2": grid.y}
    for k, comp in enumerate(state.components, start=1):
        env[f"u{k}"] = comp.values
    return env


def eval_functional(fn: FunctionalSpec, state: SystemState, grid: Grid) -> float:
    """Evaluate a functional: INT atoms by quadrature, EVAL by interpolation."""
    env = _state_env(state, grid)

    def resolver(atom):
        if isinstance(atom, Integral):
            vals = eval_expr(atom.integrand, env)
            field = ScalarField(grid, np.broadcast_to(
                np.asarray(vals, dtype=float), (grid.n_nodes,)))
            return quadrature_integral(grid, field)
        assert isinstance(atom, PointEval)
        return eval_at_point(grid, state[atom.component - 1], atom.point)

    return float(eval_expr(fn.expr, {}, atom_resolver=resolver))


@dataclass(frozen=True)
class FunctionalRange:
    """Interval enclosure [lo, hi] of a functional over the box of states.

    ``rigorous`` is True when the endpoints come from the constant
    extreme states of a declared-monotone functional; sampled ranges of
    undeclared functionals are lower/upper estimates only.
    """

    lo: float
    hi: float
    rigorous: bool


def random_state(grid: Grid, box: Sequence[float], rng: np.random.Generator) -> SystemState:
    """Random nodal state inside the box (componentwise in [0, rho_i])."""
    return SystemState.from_array(
        grid, np.stack([rng.uniform(0.0, rho, grid.n_nodes) for rho in box]))


def functional_range(fn: FunctionalSpec, box: Sequence[float], grid: Grid,
                     samples: int = 16, seed: int = 0) -> FunctionalRange:
    """Range of a functional over states with values in the box.

    Monotone-declared functionals are evaluated at the two constant
    extreme states, which is exact; otherwise the range is estimated
    from the extreme states plus ``samples`` random states and flagged
    non-rigorous.
    """
    if samples < 2:
        raise ConfigError("functional_range needs samples >= 2")
    bottom = SystemState.constant(grid, [0.0] * len(box))
    top = SystemState.constant(grid, list(box))
    at_bottom = eval_functional(fn, bottom, grid)
    at_top = eval_functional(fn, top, grid)
    if fn.monotone == "inc":
        return FunctionalRange(at_bottom, at_top, True)
    if fn.monotone == "dec":
        return FunctionalRange(at_top, at_bottom, True)
    values = [at_bottom, at_top]
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        values.append(eval_functional(fn, random_state(grid, box, rng), grid))
    return FunctionalRange(min(values), max(values), False)


# ---------------------------------------------------------------------------
# Document loading
# ---------------------------------------------------------------------------

def _require_keys(obj: dict, path: str, required: Sequence[str],
                  optional: Sequence[str] = ()):
    if not isinstance(obj, dict):
        raise SchemaError(path, f"expected an object, got {type(obj).__name__}")
    for key in obj:
        if key not in required and key not in optional:
            raise SchemaError(f"{path}.{key}", "unknown key")
    for key in required:
        if key not in obj:
            raise SchemaError(f"{path}.{key}", "missing required key")


def _number(obj, path: str) -> float:
    if not isinstance(obj, (int, float)) or isinstance(obj, bool):
        raise SchemaError(path, f"expected a number, got {type(obj).__name__}")
    return float(obj)


def _string(obj, path: str) -> str:
    if not isinstance(obj, str):
        raise SchemaError(path, f"expected a string, got {type(obj).__name__}")
    return obj


def _parse_at(text: str, context: str, path: str) -> Expr:
    from .errors import ParseError
    try:
        if context == "functional":
            return parse_functional_expression(text)
        return parse_expression(text, context=context)
    except ParseError as exc:
        raise SchemaError(path, f"cannot parse expression: {exc}") from exc


def _load_domain(obj, path: str) -> Domain:
    _require_keys(obj, path, ["type"], ["radius", "x", "y"])
    kind = _string(obj["type"], f"{path}.type")
    if kind == "disk":
        radius = _number(obj.get("radius", 1.0), f"{path}.radius")
        if radius <= 0:
            raise SchemaError(f"{path}.radius", "disk radius must be positive")
        return Domain.disk(radius)
    if kind == "rectangle":
        ranges = []
        for key in ("x", "y"):
            rng = obj.get(key, [0.0, 1.0])
            if (not isinstance(rng, (list, tuple)) or len(rng) != 2):
                raise SchemaError(f"{path}.{key}", "expected an interval [lo, hi]")
            lo = _number(rng[0], f"{path}.{key}[0]")
            hi = _number(rng[1], f"{path}.{key}[1]")
            if hi <= lo:
                raise SchemaError(f"{path}.{key}", "interval must be non-degenerate")
            ranges.append((lo, hi))
        return Domain.rectangle(*ranges)
    raise SchemaError(f"{path}.type", f"unknown domain type {kind!r}")


def _load_functional(obj, path: str) -> FunctionalSpec:
    _require_keys(obj, path, ["expr", "monotone"])
    text = _string(obj["expr"], f"{path}.expr")
    monotone = _string(obj["monotone"], f"{path}.monotone")
    if monotone not in MONOTONE_KINDS:
        raise SchemaError(f"{path}.monotone",
                          f"expected one of {MONOTONE_KINDS}, got {monotone!r}")
    return FunctionalSpec(_parse_at(text, "functional", f"{path}.expr"),
                          monotone, text)


def _load_component(obj, path: str) -> Component:
    _require_keys(obj, path, ["operator", "boundary", "f", "w", "h",
                              "lambda", "eta", "rho"])

    op_obj = obj["operator"]
    _require_keys(op_obj, f"{path}.operator", [],
                  ["a11", "a12", "a22", "b1", "b2", "a0"])
    defaults = {"a11": "1", "a12": "0", "a22": "1", "b1": "0", "b2": "0", "a0": "0"}
    op_exprs = {}
    for key, default in defaults.items():
        text = _string(op_obj.get(key, default), f"{path}.operator.{key}")
        op_exprs[key] = _parse_at(text, "spatial", f"{path}.operator.{key}")
    operator = OperatorSpec(**op_exprs)

    bc_obj = obj["boundary"]
    _require_keys(bc_obj, f"{path}.boundary", ["kind", "zeta"], ["b"])
    kind = _string(bc_obj["kind"], f"{path}.boundary.kind")
    if kind not in ("dirichlet", "neumann", "robin"):
        raise SchemaError(f"{path}.boundary.kind", f"unknown boundary kind {kind!r}")
    b_expr = None
    if kind == "robin":
        if "b" not in bc_obj:
            raise SchemaError(f"{path}.boundary.b", "robin boundary needs b")
        b_expr = _parse_at(_string(bc_obj["b"], f"{path}.boundary.b"),
                           "spatial", f"{path}.boundary.b")
    boundary = BoundarySpec(kind, b_expr)
    zeta = _parse_at(_string(bc_obj["zeta"], f"{path}.boundary.zeta"),
                     "spatial", f"{path}.boundary.zeta")

    f = _parse_at(_string(obj["f"], f"{path}.f"), "pointwise", f"{path}.f")
    w = _load_functional(obj["w"], f"{path}.w")
    h = _load_functional(obj["h"], f"{path}.h")

    lam = _number(obj["lambda"], f"{path}.lambda")
    eta = _number(obj["eta"], f"{path}.eta")
    if lam < 0 or eta < 0:
        raise SchemaError(f"{path}.lambda" if lam < 0 else f"{path}.eta",
                          "nonnegative parameters: lambda and eta must be >= 0")
    rho = _number(obj["rho"], f"{path}.rho")
    if rho <= 0:
        raise SchemaError(f"{path}.rho",
                          "solution box must be non-degenerate: rho must be > 0")

    return Component(operator, boundary, zeta, f, w, h, lam, eta, rho)


def _check_component_refs(comp: Component, n: int, domain: Domain, path: str):
    for label, expr in (("f", comp.f), ("w", comp.w.expr), ("h", comp.h.expr)):
        for name in free_variables(expr):
            if name.startswith("u") and int(name[1:]) > n:
                raise SchemaError(f"{path}.{label}",
                                  f"variable {name} refers to a component beyond n={n}")
        for node in walk(expr):
            if isinstance(node, PointEval):
                if node.component > n:
                    raise SchemaError(
                        f"{path}.{label}",
                        f"EVAL component {node.component} is beyond n={n}")
                if not domain.contains(*node.point):
                    raise SchemaError(
                        f"{path}.{label}",
                        f"EVAL point {node.point} lies outside the closed domain")


def load_problem(document, f_monotone: Sequence[str] | None = None) -> ProblemSpec:
    """Load and validate a problem document (JSON text or dict).

    All expressions are parsed, the operators are validated, and the
    invariants (nonnegative parameters, zeta >= 0, h >= 0 on sampled
    states) are checked on a coarse probe grid.  ``f_monotone``
    optionally declares the monotonicity of each f_i in (u, w); it is a
    programmatic declaration, not part of the document schema.
    """
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SchemaError("$", f"invalid JSON: {exc}") from exc

    _require_keys(document, "$", ["domain", "components"], ["resolution"])
    domain = _load_domain(document["domain"], "$.domain")

    res_obj = document.get("resolution", _DEFAULT_RESOLUTION[domain.kind])
    if isinstance(res_obj, (int, float)) and not isinstance(res_obj, bool):
        if int(res_obj) != res_obj:
            raise SchemaError("$.resolution", "resolution must be integral")
        resolution: tuple[int, int] | int = int(res_obj)
    elif isinstance(res_obj, (list, tuple)) and len(res_obj) == 2:
        resolution = (int(res_obj[0]), int(res_obj[1]))
    else:
        raise SchemaError("$.resolution", "expected an integer or a pair")

    comps_obj = document["components"]
    if not isinstance(comps_obj, list) or not comps_obj:
        raise SchemaError("$.components", "expected a non-empty array")
    components = [_load_component(obj, f"$.components[{i}]")
                  for i, obj in enumerate(comps_obj)]
    n = len(components)

    if f_monotone is not None:
        if len(f_monotone) != n:
            raise ConfigError("f_monotone needs one entry per component")
        components = [replace(c, f_monotone=m)
                      for c, m in zip(components, f_monotone)]

    for i, comp in enumerate(components):
        _check_component_refs(comp, n, domain, f"$.components[{i}]")

    probe = build_grid(domain, _PROBE_RESOLUTION[domain.kind])
    from .grid import _normalize_resolution
    res_pair = _normalize_resolution(domain, resolution)

    box = tuple(c.rho for c in components)
    rng = np.random.default_rng(0)
    probe_states = [SystemState.constant(probe, [0.0] * n),
                    SystemState.constant(probe, list(box)),
                    SystemState.constant(probe, [r / 2 for r in box])]
    probe_states += [random_state(probe, box, rng) for _ in range(3)]

    for i, comp in enumerate(components):
        # operator structure (raises ValidationError naming the condition)
        from .elliptic import validate_operator
        validate_operator(comp.operator, comp.boundary, probe)

        zeta_vals = eval_expr(comp.zeta, {"x1": probe.x[probe.boundary_mask],
                                          "x2": probe.y[probe.boundary_mask]})
        if np.min(np.broadcast_to(np.asarray(zeta_vals, dtype=float),
                                  (int(probe.boundary_mask.sum()),))) < -1e-12:
            raise ValidationError(
                "nonnegative boundary data",
                f"$.components[{i}].boundary.zeta takes negative values")

        for state in probe_states:
            if eval_functional(comp.h, state, probe) < -1e-12:
                raise ValidationError(
                    "nonnegative boundary functional",
                    f"$.components[{i}].h is negative on a sampled state")

    return ProblemSpec(domain=domain, components=tuple(components),
                       resolution=res_pair)


# ---------------------------------------------------------------------------
# Discretization
# ---------------------------------------------------------------------------

class DiscreteProblem:
    """A problem bound to a working grid with assembled operators.

    Holds, per component, the discrete operator, the boundary lift
    gamma_i (solution of L gamma = 0, B gamma = zeta), and caches for
    K_i(1) and the principal eigenpairs.
    """

    def __init__(self, problem: ProblemSpec, grid: Grid,
                 operators: tuple[DiscreteOperator, ...],
                 gammas: tuple[ScalarField, ...]):
        self.problem = problem
        self.grid = grid
        self.operators = operators
        self.gammas = gammas
        self._k_one: dict[int, ScalarField] = {}
        self._eigen: dict[int, Eigenpair] = {}

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def box(self) -> tuple[float, ...]:
        return self.problem.box

    def k_one(self, i: int) -> ScalarField:
        """K_i applied to the constant function 1 (cached)."""
        if i not in self._k_one:
            self._k_one[i] = apply_K(self.operators[i],
                                     ScalarField.constant(self.grid, 1.0))
        return self._k_one[i]

    def k_one_norm(self, i: int) -> float:
        return sup_norm(self.k_one(i))

    def gamma_norm(self, i: int) -> float:
        return sup_norm(self.gammas[i])

    def eigenpair(self, i: int, tol: float = 1e-10,
                  max_iter: int = 10_000) -> Eigenpair:
        cached = self._eigen.get(i)
        if cached is None or cached.residual > tol:
            self._eigen[i] = principal_eigenpair(self.operators[i], tol=tol,
                                                 max_iter=max_iter)
        return self._eigen[i]


def discretize(problem: ProblemSpec, resolution=None) -> DiscreteProblem:
    """Build the working grid, assemble all operators and lift the zeta_i."""
    grid = build_grid(problem.domain, resolution if resolution is not None
                      else problem.resolution)
    operators = []
    gammas = []
    for i, comp in enumerate(problem.components):
        dop = assemble(comp.operator, comp.boundary, grid)
        zeta_field = ScalarField.from_function(
            grid, lambda x, y, e=comp.zeta: eval_expr(e, {"x1": x, "x2": y}))
        bvals = zeta_field.values[grid.boundary_mask]
        if np.min(bvals) < -1e-12:
            raise ValidationError("nonnegative boundary data",
                                  f"component {i + 1}: zeta takes negative values")
        operators.append(dop)
        gammas.append(lift_gamma(dop, zeta_field))
    return DiscreteProblem(problem, grid, tuple(operators), tuple(gammas))
