"""Numerical certificates for existence and non-existence of fixed points.

The existence certificate verifies, by structured bounding and sampling,
that (a) the nonlocal weights w_i have finite range over the box of
states, (b) the nonlinearities f_i are nonnegative with maximum M_i,
(c) some component i0 admits a linear minorant f_{i0} >= delta * u_{i0}
on a shrunken box (scanned over a dyadic grid of box sizes rho0),
(d) the boundary functionals h_i are nonnegative and bounded by h_bar_i,
and (e) the eigenvalue inequality mu_{i0}/delta <= lambda_{i0} and the
box-invariance inequalities

    lambda_i M_i ||K_i(1)||_inf + eta_i h_bar_i ||gamma_i||_inf <= rho_i

hold.  A PASS guarantees a nonzero fixed point inside the box.

The non-existence certificate checks the strict contraction inequality

    lambda_i tau_i ||K_i(1)||_inf + eta_i theta_i ||gamma_i||_inf < 1

where f_i <= tau_i u_i and h_i[u] <= theta_i ||u||.  In auto-bound mode
tau and theta are estimated by sampling: tau as the largest ratio
f_i/u_i with the w slot ranging over the full w-interval, and theta by
bounding each additive term of h_i separately (the sum of per-term
ratio suprema), which reproduces hand-derived constants of the form
"h[u] <= (c1 + c2) ||u||".  Sampled bounds are lower estimates of the
true suprema and the certificate says so.

Extrema are sampled on prefix-nested lattices (box corners first, then
a base-2 van der Corput fill), so enlarging ``samples`` never discards
previously sampled points: auto bounds are nondecreasing in ``samples``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Sequence

import numpy as np

from .errors import ConfigError
from .expr import BinOp, Expr, Neg, eval_expr
from .grid import SystemState
from .problem import (DiscreteProblem, FunctionalRange, FunctionalSpec,
                      eval_functional, functional_range, random_state)

_LATTICE_CAP = 100_000
_SIGN_TOL = 1e-12


# ---------------------------------------------------------------------------
# Prefix-nested sampling
# ---------------------------------------------------------------------------

def _van_der_corput(i: int) -> float:
    x, f = 0.0, 0.5
    while i:
        x += f * (i & 1)
        i >>= 1
        f *= 0.5
    return x


def _axis(lo: float, hi: float, count: int) -> np.ndarray:
    """``count`` points of [lo, hi]: the endpoints, then a dyadic fill.

    The first ``m`` points are a prefix of the first ``m + 1``, so
    sampled extrema are monotone in ``count``.  For count = 2^k + 1 the
    points coincide with the uniform lattice of that size.
    """
    if count < 2:
        raise ConfigError("sampling needs at least 2 points per axis")
    pts = [lo, hi]
    i = 1
    while len(pts) < count:
        pts.append(lo + (hi - lo) * _van_der_corput(i))
        i += 1
    return np.asarray(pts[:count])


def _per_dim_count(samples: int, n_dims: int) -> int:
    count = max(2, samples)
    while count > 2 and count ** n_dims > _LATTICE_CAP:
        count -= 1
    return count


def _u_lattice(axes: Sequence[np.ndarray]) -> np.ndarray:
    return np.array(list(product(*axes)))


# ---------------------------------------------------------------------------
# Pointwise extrema of f over nodes x box x w-interval
# ---------------------------------------------------------------------------

def _f_at(dp: DiscreteProblem, i: int, u_point: Sequence[float], w: float):
    grid = dp.grid
    env = {"x1": grid.x, "x2": grid.y, "w": w}
    for k, val in enumerate(u_point, start=1):
        env[f"u{k}"] = val
    return np.asarray(eval_expr(dp.problem.components[i].f, env), dtype=float)


def _f_extrema(dp: DiscreteProblem, i: int, box: Sequence[float],
               w_interval: tuple[float, float], samples: int) -> tuple[float, float, bool]:
    """(min, max) of f_i over grid nodes x box lattice x w endpoints.

    Coordinatewise-monotone nonlinearities (declared via f_monotone)
    attain their extrema at box corners, so corners-only evaluation is
    exact; otherwise the box is sampled and the result is an estimate.
    """
    comp = dp.problem.components[i]
    monotone = comp.f_monotone in ("inc", "dec")
    if monotone:
        axes = [np.asarray([0.0, rho]) for rho in box]
    else:
        count = _per_dim_count(samples, len(box))
        axes = [_axis(0.0, rho, count) for rho in box]
    w_lo, w_hi = w_interval
    w_values = (w_lo, w_hi) if w_hi > w_lo else (w_lo,)
    f_min, f_max = math.inf, -math.inf
    for u_point in _u_lattice(axes):
        for w in w_values:
            vals = _f_at(dp, i, u_point, w)
            f_min = min(f_min, float(np.min(vals)))
            f_max = max(f_max, float(np.max(vals)))
    return f_min, f_max, monotone


def estimate_M(dp: DiscreteProblem, i: int, box: Sequence[float] | None = None,
               w_interval: tuple[float, float] | None = None,
               samples: int = 9) -> float:
    """Maximum of f_i over the closed domain, the box and the w-interval."""
    box = dp.box if box is None else tuple(box)
    if w_interval is None:
        rng = functional_range(dp.problem.components[i].w, box, dp.grid,
                               samples=max(2, samples))
        w_interval = (rng.lo, rng.hi)
    _, f_max, _ = _f_extrema(dp, i, box, w_interval, samples)
    return f_max


# ---------------------------------------------------------------------------
# Condition (c): linear minorant near zero
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Minorant:
    """Linear lower bound f_{i0} >= delta * u_{i0} on the shrunken box."""

    i0: int                       # 0-based component index
    rho0: float
    delta: float
    mu: float
    w0_interval: tuple[float, float]
    eigen_margin: float           # lambda_{i0} - mu_{i0}/delta


def default_rho0_grid(box: Sequence[float], levels: int = 40) -> tuple[float, ...]:
    rho_min = min(box)
    return tuple(rho_min * 2.0 ** (-k) for k in range(1, levels + 1))


def check_condition_c(dp: DiscreteProblem, i0: int,
                      rho0_grid: Sequence[float] | None = None,
                      eps: float = 1e-3, samples: int = 9,
                      eigen_tol: float = 1e-10) -> Minorant | None:
    """Scan shrunken boxes for a minorant compatible with the eigenvalue.

    For each candidate rho0 the w-interval is recomputed over the box
    [0, rho0]^n, delta is the sampled minimum of f_{i0}/u_{i0} over
    nodes, lattice points with u_{i0} in [eps*rho0, rho0] and the
    w-interval; the first rho0 with mu_{i0}/delta <= lambda_{i0} wins.
    Returns None when no candidate is accepted (not an error).
    """
    if eps <= 0:
        raise ConfigError("eps must be positive")
    comp = dp.problem.components[i0]
    if comp.lam <= 0:
        return None
    mu = dp.eigenpair(i0, tol=eigen_tol).mu
    if rho0_grid is None:
        rho0_grid = default_rho0_grid(dp.box)

    n = dp.n
    count = _per_dim_count(samples, n)
    for rho0 in rho0_grid:
        if not (0.0 < rho0 < min(dp.box)):
            continue
        box0 = (rho0,) * n
        w0 = functional_range(comp.w, box0, dp.grid, samples=max(2, samples))
        axes = [_axis(eps * rho0, rho0, count) if k == i0 else
                _axis(0.0, rho0, count) for k in range(n)]
        w_values = _axis(w0.lo, w0.hi, 3) if w0.hi > w0.lo else np.asarray([w0.lo])
        delta = math.inf
        for u_point in _u_lattice(axes):
            for w in w_values:
                ratio = float(np.min(_f_at(dp, i0, u_point, w))) / u_point[i0]
                delta = min(delta, ratio)
        if delta > 0 and mu / delta <= comp.lam:
            return Minorant(i0=i0, rho0=rho0, delta=delta, mu=mu,
                            w0_interval=(w0.lo, w0.hi),
                            eigen_margin=comp.lam - mu / delta)
    return None


# ---------------------------------------------------------------------------
# Existence certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExistenceComponent:
    """All certified constants of one component."""

    w_lo: float
    w_hi: float
    w_rigorous: bool
    f_min: float
    M: float
    M_rigorous: bool
    h_bar: float
    h_rigorous: bool
    k_one_norm: float
    gamma_norm: float
    lam: float
    eta: float
    rho: float

    @property
    def margin(self) -> float:
        """rho - lambda M ||K(1)|| - eta h_bar ||gamma||, recomputable."""
        return (self.rho - self.lam * self.M * self.k_one_norm
                - self.eta * self.h_bar * self.gamma_norm)

    def to_dict(self) -> dict:
        return {"w_interval": [self.w_lo, self.w_hi],
                "w_rigorous": self.w_rigorous,
                "f_min": self.f_min,
                "M": self.M, "M_rigorous": self.M_rigorous,
                "h_bar": self.h_bar, "h_rigorous": self.h_rigorous,
                "k_one_norm": self.k_one_norm, "gamma_norm": self.gamma_norm,
                "lambda": self.lam, "eta": self.eta, "rho": self.rho,
                "margin": self.margin}


@dataclass(frozen=True)
class ExistenceCertificate:
    verdict: str                  # "PASS" | "FAIL"
    components: tuple[ExistenceComponent, ...]
    minorant: Minorant | None
    rigor: str                    # "exact-endpoints" | "sampled"
    failures: tuple[str, ...]

    def to_dict(self) -> dict:
        minorant = None
        if self.minorant is not None:
            minorant = {"i0": self.minorant.i0 + 1,
                        "rho0": self.minorant.rho0,
                        "delta": self.minorant.delta,
                        "mu": self.minorant.mu,
                        "w0_interval": list(self.minorant.w0_interval),
                        "eigen_margin": self.minorant.eigen_margin}
        return {"kind": "existence", "verdict": self.verdict,
                "rigor": self.rigor, "failures": list(self.failures),
                "minorant": minorant,
                "components": [c.to_dict() for c in self.components]}


def certify_existence(dp: DiscreteProblem, samples: int = 9,
                      eigen_tol: float = 1e-10, seed: int = 0) -> ExistenceCertificate:
    """Assemble all constants and check the five existence conditions.

    Every candidate component is tried for the linear-minorant condition;
    the verdict is PASS only when all conditions verify numerically.
    The rigor flag stays "exact-endpoints" only if every bound came from
    a declared-monotone shortcut.
    """
    grid = dp.grid
    box = dp.box
    failures: list[str] = []
    comps: list[ExistenceComponent] = []
    all_rigorous = True

    for i, comp in enumerate(dp.problem.components):
        w_range = functional_range(comp.w, box, grid, samples=max(2, samples),
                                   seed=seed)
        if not (math.isfinite(w_range.lo) and math.isfinite(w_range.hi)):
            failures.append(f"component {i + 1}: w-interval is not finite")
        f_min, f_max, f_rigorous = _f_extrema(dp, i, box,
                                              (w_range.lo, w_range.hi), samples)
        if f_min < -_SIGN_TOL:
            failures.append(
                f"component {i + 1}: f attains {f_min:.6g} < 0 on the box "
                f"(nonnegative nonlinearity violated)")
        h_range = functional_range(comp.h, box, grid, samples=max(2, samples),
                                   seed=seed)
        if h_range.lo < -_SIGN_TOL:
            failures.append(
                f"component {i + 1}: h attains {h_range.lo:.6g} < 0 "
                f"(nonnegative boundary functional violated)")
        record = ExistenceComponent(
            w_lo=w_range.lo, w_hi=w_range.hi, w_rigorous=w_range.rigorous,
            f_min=f_min, M=f_max, M_rigorous=f_rigorous,
            h_bar=h_range.hi, h_rigorous=h_range.rigorous,
            k_one_norm=dp.k_one_norm(i), gamma_norm=dp.gamma_norm(i),
            lam=comp.lam, eta=comp.eta, rho=comp.rho)
        comps.append(record)
        all_rigorous = all_rigorous and w_range.rigorous and f_rigorous \
            and h_range.rigorous
        if record.margin < 0:
            failures.append(
                f"component {i + 1}: box-invariance margin {record.margin:.6g} < 0 "
                f"(lambda*M*||K(1)|| + eta*h_bar*||gamma|| exceeds rho)")

    minorant = None
    for i0 in range(dp.n):
        minorant = check_condition_c(dp, i0, samples=samples, eigen_tol=eigen_tol)
        if minorant is not None:
            break
    if minorant is None:
        failures.append("no component admits a linear minorant f >= delta*u "
                        "compatible with mu/delta <= lambda on any shrunken box")

    verdict = "PASS" if not failures else "FAIL"
    rigor = "exact-endpoints" if all_rigorous else "sampled"
    return ExistenceCertificate(verdict=verdict, components=tuple(comps),
                                minorant=minorant, rigor=rigor,
                                failures=tuple(failures))


# ---------------------------------------------------------------------------
# Non-existence certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TauTheta:
    """Sampled contraction constants of one component."""

    tau: float
    theta: float
    f_min: float
    theta_terms: tuple[float, ...]


def _additive_terms(expr: Expr, sign: float = 1.0) -> list[tuple[float, Expr]]:
    if isinstance(expr, BinOp) and expr.op in ("+", "-"):
        right_sign = sign if expr.op == "+" else -sign
        return (_additive_terms(expr.left, sign)
                + _additive_terms(expr.right, right_sign))
    if isinstance(expr, Neg):
        return _additive_terms(expr.operand, -sign)
    return [(sign, expr)]


def _theta_states(dp: DiscreteProblem, samples: int, seed: int) -> list[SystemState]:
    count = _per_dim_count(samples, dp.n)
    axes = [_axis(0.0, rho, count) for rho in dp.box]
    states = [SystemState.constant(dp.grid, list(point))
              for point in _u_lattice(axes) if max(point) > 0.0]
    rng = np.random.default_rng(seed)
    states += [random_state(dp.grid, dp.box, rng) for _ in range(samples)]
    return states


def estimate_tau_theta(dp: DiscreteProblem, i: int,
                       box: Sequence[float] | None = None, samples: int = 9,
                       seed: int = 0) -> TauTheta:
    """Sampled contraction constants (tau_i, theta_i) of component i.

    tau is the largest sampled ratio f_i(x, u, w)/u_i with w ranging
    over the full w-interval.  theta bounds the boundary functional by
    splitting it into its top-level additive terms and summing the
    per-term ratio suprema sup(term[u]/||u||); this matches constants
    derived by bounding each term separately and is sound (the sum of
    suprema dominates the supremum of the sum).  Both are lower bounds
    of the true suprema: they can only grow under more sampling.
    """
    comp = dp.problem.components[i]
    box = dp.box if box is None else tuple(box)
    grid = dp.grid

    w_range = functional_range(comp.w, box, grid, samples=max(2, samples),
                               seed=seed)
    w_values = (_axis(w_range.lo, w_range.hi, 5)
                if w_range.hi > w_range.lo else np.asarray([w_range.lo]))

    count = _per_dim_count(samples, len(box))
    axes = [_axis(0.0, rho, count) for rho in box]
    tau = 0.0
    f_min = math.inf
    for u_point in _u_lattice(axes):
        for w in w_values:
            vals = _f_at(dp, i, u_point, w)
            f_min = min(f_min, float(np.min(vals)))
            if u_point[i] > 0.0:
                tau = max(tau, float(np.max(vals)) / u_point[i])

    terms = _additive_terms(comp.h.expr)
    states = _theta_states(dp, samples, seed)
    term_sups = []
    for sign, term in terms:
        spec = FunctionalSpec(term, "none", "")
        best = -math.inf
        for state in states:
            norm = state.norm()
            if norm <= 0.0:
                continue
            best = max(best, sign * eval_functional(spec, state, grid) / norm)
        term_sups.append(best)
    theta = float(sum(term_sups))
    return TauTheta(tau=tau, theta=theta, f_min=f_min,
                    theta_terms=tuple(term_sups))


@dataclass(frozen=True)
class NonexistenceComponent:
    tau: float
    theta: float
    k_one_norm: float
    gamma_norm: float
    lam: float
    eta: float

    @property
    def value(self) -> float:
        return (self.lam * self.tau * self.k_one_norm
                + self.eta * self.theta * self.gamma_norm)

    @property
    def margin(self) -> float:
        return 1.0 - self.value

    def to_dict(self) -> dict:
        return {"tau": self.tau, "theta": self.theta,
                "k_one_norm": self.k_one_norm, "gamma_norm": self.gamma_norm,
                "lambda": self.lam, "eta": self.eta,
                "value": self.value, "margin": self.margin}


@dataclass(frozen=True)
class NonexistenceCertificate:
    verdict: str                  # "PASS" | "NOT-CERTIFIED"
    mode: str                     # "auto-bound" | "user-constants"
    rigor: str                    # "sampled" | "user-supplied"
    components: tuple[NonexistenceComponent, ...]
    notes: tuple[str, ...]

    def to_dict(self) -> dict:
        return {"kind": "nonexistence", "verdict": self.verdict,
                "mode": self.mode, "rigor": self.rigor,
                "notes": list(self.notes),
                "components": [c.to_dict() for c in self.components]}


_ENDPOINT_NOTE = (
    "auto-bound tau ratios range over the full w-interval (conservative upper "
    "endpoint included); constants derived by freezing w at a single interior "
    "or lower endpoint can be smaller, so NOT-CERTIFIED here does not rule out "
    "certification with user-supplied constants.")


def certify_nonexistence(dp: DiscreteProblem, mode: str = "auto-bound",
                         constants: dict | None = None, samples: int = 9,
                         seed: int = 0) -> NonexistenceCertificate:
    """Check the strict contraction inequality per component.

    ``mode`` is "auto-bound" (tau, theta sampled; rigor flagged
    "sampled") or "user-constants" (caller supplies
    ``constants={"tau": [...], "theta": [...]}``).  PASS requires every
    margin to be strictly positive.
    """
    if mode in ("auto", "auto-bound"):
        mode = "auto-bound"
    elif mode in ("constants", "user-constants"):
        mode = "user-constants"
        if constants is None or "tau" not in constants or "theta" not in constants:
            raise ConfigError(
                'user-constants mode needs constants={"tau": [...], "theta": [...]}')
        if (len(constants["tau"]) != dp.n or len(constants["theta"]) != dp.n):
            raise ConfigError("need one tau and one theta per component")
    else:
        raise ConfigError(f"unknown mode {mode!r}")

    comps: list[NonexistenceComponent] = []
    notes: list[str] = []
    sign_ok = True
    for i, comp in enumerate(dp.problem.components):
        if mode == "auto-bound":
            tt = estimate_tau_theta(dp, i, samples=samples, seed=seed)
            tau, theta = tt.tau, tt.theta
            if tt.f_min < -_SIGN_TOL:
                sign_ok = False
                notes.append(f"component {i + 1}: f attains {tt.f_min:.6g} < 0, "
                             f"so no linear majorant tau*u applies")
        else:
            tau = float(constants["tau"][i])
            theta = float(constants["theta"][i])
        comps.append(NonexistenceComponent(
            tau=tau, theta=theta, k_one_norm=dp.k_one_norm(i),
            gamma_norm=dp.gamma_norm(i), lam=comp.lam, eta=comp.eta))

    for i, rec in enumerate(comps):
        status = "satisfies" if rec.margin > 0 else "violates"
        notes.append(f"component {i + 1}: check value {rec.value:.6f} "
                     f"{status} the strict inequality (< 1)")
    if mode == "auto-bound":
        notes.append(_ENDPOINT_NOTE)

    verdict = ("PASS" if sign_ok and all(c.margin > 0 for c in comps)
               else "NOT-CERTIFIED")
    rigor = "sampled" if mode == "auto-bound" else "user-supplied"
    return NonexistenceCertificate(verdict=verdict, mode=mode, rigor=rigor,
                                   components=tuple(comps), notes=tuple(notes))
