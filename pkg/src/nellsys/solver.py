"""Fixed-point engine for u = T(u) + Gamma(u) on the box of states.

T(u) = (lambda_i K_i F_i(u))_i applies the solution operators to the
nonlinearities F_i(u)(x) = f_i(x, u(x), w_i[u]); Gamma(u) =
(eta_i h_i[u] gamma_i)_i carries the boundary functionals along the
lifted boundary data.  Fixed points are searched by damped Picard
iteration (optionally Anderson-accelerated) from several starts.  The
composed map need not be a contraction, so non-convergence is a
reportable outcome, never a conclusion about non-existence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, NumericError
from .expr import eval_expr
from .grid import ScalarField, SystemState, sup_norm
from .problem import DiscreteProblem, eval_functional, random_state
from .elliptic import apply_K

StartSpec = Union[str, SystemState]


@dataclass(frozen=True)
class SolverOptions:
    """Damped-Picard options.

    ``tol`` bounds both the residual ||u - Tu - Gu|| and the successive
    iterate difference in the product sup norm; ``starts`` mixes named
    presets (zero, mid, top, random:k) and explicit states.
    """

    tol: float = 1e-8
    max_iter: int = 5000
    damping: float = 0.5
    acceleration: str = "none"
    anderson_depth: int = 3
    starts: tuple[StartSpec, ...] = ("mid", "top")
    nonzero_factor: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not (0.0 < self.damping <= 1.0):
            raise ConfigError("damping must lie in (0, 1]")
        if self.acceleration not in ("none", "anderson"):
            raise ConfigError("acceleration must be 'none' or 'anderson'")
        if not (1 <= self.anderson_depth <= 10):
            raise ConfigError("anderson depth must lie in 1..10")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")


@dataclass(frozen=True)
class SolveResult:
    """Candidate fixed point with a freshly verified residual."""

    state: SystemState
    residual: float
    iterations: int
    converged: bool
    sup_norms: tuple[float, ...]
    nonzero: bool
    history: tuple[float, ...]
    clamp_counts: tuple[int, ...]
    start: str = ""

    @property
    def norm(self) -> float:
        return max(self.sup_norms)

    @property
    def clamp_events(self) -> int:
        return int(sum(self.clamp_counts))


def apply_T(dp: DiscreteProblem, state: SystemState) -> SystemState:
    """T(u): per component, lambda_i K_i f_i(x, u, w_i[u])."""
    grid = dp.grid
    env = {"x1": grid.x, "x2": grid.y}
    for k, comp_field in enumerate(state.components, start=1):
        env[f"u{k}"] = comp_field.values
    out = []
    for i, comp in enumerate(dp.problem.components):
        try:
            w_val = eval_functional(comp.w, state, grid)
            f_vals = np.broadcast_to(
                np.asarray(eval_expr(comp.f, env | {"w": w_val}), dtype=float),
                (grid.n_nodes,))
            image = apply_K(dp.operators[i], ScalarField(grid, f_vals))
        except Exception as exc:
            _note_component(exc, i)
            raise
        out.append(ScalarField(grid, comp.lam * image.values))
    return SystemState(tuple(out))


def apply_Gamma(dp: DiscreteProblem, state: SystemState) -> SystemState:
    """Gamma(u): per component, eta_i h_i[u] gamma_i."""
    grid = dp.grid
    out = []
    for i, comp in enumerate(dp.problem.components):
        try:
            h_val = eval_functional(comp.h, state, grid)
        except Exception as exc:
            _note_component(exc, i)
            raise
        out.append(ScalarField(grid, comp.eta * h_val * dp.gammas[i].values))
    return SystemState(tuple(out))


def _note_component(exc: Exception, i: int):
    note = f"while evaluating component {i + 1}"
    if hasattr(exc, "add_note"):
        exc.add_note(note)


def _apply_map(dp: DiscreteProblem, arr: np.ndarray) -> np.ndarray:
    state = SystemState.from_array(dp.grid, arr)
    t = apply_T(dp, state)
    g = apply_Gamma(dp, state)
    return t.as_array() + g.as_array()


def _prod_norm(arr: np.ndarray) -> float:
    return float(np.max(np.abs(arr)))


def solve_fixed_point(dp: DiscreteProblem, init: SystemState,
                      opts: SolverOptions = SolverOptions()) -> SolveResult:
    """Damped Picard iteration u <- (1-theta) u + theta (Tu + Gu).

    Iterates are clamped to the box [0, rho_i] nodally (clamp events are
    counted); convergence is only claimed when a fresh evaluation of the
    residual ||u - Tu - Gu|| is at most ``tol``.
    """
    box = np.asarray(dp.box)[:, None]
    u = np.clip(init.as_array(), 0.0, box)
    theta = opts.damping
    history: list[float] = []
    clamps: list[int] = []

    use_anderson = opts.acceleration == "anderson"
    hist_u: list[np.ndarray] = []
    hist_r: list[np.ndarray] = []

    iterations = 0
    converged = False
    for iterations in range(1, opts.max_iter + 1):
        phi = _apply_map(dp, u)
        if np.any(np.isnan(phi)):
            raise NumericError("fixed-point iterate produced NaN")
        resid_vec = phi - u
        residual = _prod_norm(resid_vec)
        history.append(residual)
        if residual <= opts.tol:
            converged = True
            clamps.append(0)
            break

        if use_anderson:
            hist_u.append(u.ravel().copy())
            hist_r.append(resid_vec.ravel().copy())
            depth = min(opts.anderson_depth, len(hist_u) - 1)
            if depth >= 1:
                dR = np.column_stack([hist_r[-1] - hist_r[-1 - j]
                                      for j in range(1, depth + 1)])
                dU = np.column_stack([hist_u[-1] - hist_u[-1 - j]
                                      for j in range(1, depth + 1)])
                gamma, *_ = np.linalg.lstsq(dR, hist_r[-1], rcond=None)
                u_next = (hist_u[-1] + theta * hist_r[-1]
                          - (dU + theta * dR) @ gamma).reshape(u.shape)
            else:
                u_next = u + theta * resid_vec
            if len(hist_u) > opts.anderson_depth + 1:
                hist_u.pop(0)
                hist_r.pop(0)
        else:
            u_next = u + theta * resid_vec

        clipped = np.clip(u_next, 0.0, box)
        clamps.append(int(np.count_nonzero(clipped != u_next)))
        u = clipped

    # fresh verification: norms and residual recomputed from the state
    final = SystemState.from_array(dp.grid, u)
    residual = _prod_norm(_apply_map(dp, u) - u)
    converged = converged and residual <= opts.tol
    norms = tuple(sup_norm(c) for c in final.components)
    threshold = opts.nonzero_factor * min(dp.box)
    return SolveResult(state=final, residual=residual, iterations=iterations,
                       converged=converged, sup_norms=norms,
                       nonzero=max(norms) > threshold,
                       history=tuple(history), clamp_counts=tuple(clamps))


def make_start(dp: DiscreteProblem, spec: StartSpec,
               rng: np.random.Generator | None = None) -> list[tuple[str, SystemState]]:
    """Expand a start preset into labelled initial states."""
    if isinstance(spec, SystemState):
        return [("explicit", spec)]
    if spec == "zero":
        return [("zero", SystemState.constant(dp.grid, [0.0] * dp.n))]
    if spec == "mid":
        return [("mid", SystemState.constant(dp.grid, [r / 2 for r in dp.box]))]
    if spec == "top":
        return [("top", SystemState.constant(dp.grid, list(dp.box)))]
    if spec.startswith("random:"):
        count = int(spec.split(":", 1)[1])
        if rng is None:
            rng = np.random.default_rng(0)
        return [(f"random{j}", random_state(dp.grid, dp.box, rng))
                for j in range(count)]
    raise ConfigError(f"unknown start preset {spec!r}")


def multi_start_solve(dp: DiscreteProblem,
                      opts: SolverOptions = SolverOptions()) -> list[SolveResult]:
    """Run the solver from every start; deduplicate and rank the results.

    Converged states equal within 1e-6 (product sup norm) count as one
    fixed point; results are ordered nonzero-first, then by residual.
    """
    rng = np.random.default_rng(opts.seed)
    labelled: list[tuple[str, SystemState]] = []
    for spec in opts.starts:
        labelled.extend(make_start(dp, spec, rng))

    results = []
    for label, start in labelled:
        res = solve_fixed_point(dp, start, opts)
        results.append(replace(res, start=label))

    deduped: list[SolveResult] = []
    for res in results:
        if res.converged:
            twin = next((d for d in deduped if d.converged and
                         _prod_norm(res.state.as_array() - d.state.as_array()) <= 1e-6),
                        None)
            if twin is not None:
                if res.residual < twin.residual:
                    deduped[deduped.index(twin)] = res
                continue
        deduped.append(res)

    deduped.sort(key=lambda r: (not r.nonzero, r.residual))
    return deduped
