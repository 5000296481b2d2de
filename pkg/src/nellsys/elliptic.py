"""Second-order elliptic operators: validation, assembly, solution operator.

An operator/boundary pair

    L u = -sum a_jl d2u/dxj dxl + sum a_j du/dxj + a u,
    B u = b u + delta du/dnu           (nu = outward unit normal)

is validated against the structural conditions (symmetric, strongly
uniformly elliptic second-order part; a >= 0; Dirichlet, Neumann or
regular-oblique boundary operator) and assembled into a finite-difference
system whose matrix is an M-matrix, so the discrete maximum principle
holds and the solution operator K: g -> u maps nonnegative data to
nonnegative solutions.  Central differences are used for diffusion;
advection falls back to first-order upwinding at nodes where central
differencing would break diagonal dominance.  On a disk only isotropic
constant diffusion (-c * Laplacian + a(x)) is supported; the polar
five-point stencil is closed at the origin by the mean over the first
ring.  The principal eigenpair of K is computed by power iteration from
a positive start, which cannot be deflated away from the (nonnegative)
principal eigenfunction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (AssemblyError, NonConvergenceError, NumericError,
                     ValidationError)
from .expr import Expr, eval_expr, parse_expression, to_source
from .grid import Grid, PolarGrid, RectGrid, ScalarField

_DIRECT_SOLVER_LIMIT = 200_000
_ITERATIVE_RTOL = 1e-12


@dataclass(frozen=True)
class OperatorSpec:
    """Coefficient expressions of L in the variables x1, x2."""

    a11: Expr
    a12: Expr
    a22: Expr
    b1: Expr
    b2: Expr
    a0: Expr

    @staticmethod
    def from_strings(a11: str = "1", a12: str = "0", a22: str = "1",
                     b1: str = "0", b2: str = "0", a0: str = "0") -> "OperatorSpec":
        parse = lambda s: parse_expression(s, context="spatial")
        return OperatorSpec(parse(a11), parse(a12), parse(a22),
                            parse(b1), parse(b2), parse(a0))

    @staticmethod
    def laplacian() -> "OperatorSpec":
        return OperatorSpec.from_strings()

    def sources(self) -> dict[str, str]:
        return {name: to_source(getattr(self, name))
                for name in ("a11", "a12", "a22", "b1", "b2", "a0")}


@dataclass(frozen=True)
class BoundarySpec:
    """Boundary operator B: Dirichlet, Neumann or Robin (oblique with b >= 0)."""

    kind: str
    b: Expr | None = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann", "robin"):
            raise ValidationError("boundary operator kind",
                                  f"unknown kind {self.kind!r}")
        if self.kind == "robin" and self.b is None:
            raise ValidationError("boundary operator kind",
                                  "robin boundary operator needs a coefficient b")

    @property
    def delta(self) -> int:
        return 0 if self.kind == "dirichlet" else 1

    @staticmethod
    def dirichlet() -> "BoundarySpec":
        return BoundarySpec("dirichlet")

    @staticmethod
    def neumann() -> "BoundarySpec":
        return BoundarySpec("neumann")

    @staticmethod
    def robin(b: str) -> "BoundarySpec":
        return BoundarySpec("robin", parse_expression(b, context="spatial"))


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the structural checks for an (L, B, grid) triple."""

    mu0: float
    a0_min: float
    a0_max: float
    boundary_kind: str
    upwind_x_count: int
    upwind_y_count: int
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"mu0": self.mu0, "a0_min": self.a0_min, "a0_max": self.a0_max,
                "boundary_kind": self.boundary_kind,
                "upwind_x_count": self.upwind_x_count,
                "upwind_y_count": self.upwind_y_count,
                "notes": list(self.notes)}


def _coeff(expr: Expr, grid: Grid) -> np.ndarray:
    vals = eval_expr(expr, {"x1": grid.x, "x2": grid.y})
    return np.broadcast_to(np.asarray(vals, dtype=float), (grid.n_nodes,)).copy()


def validate_operator(op: OperatorSpec, bc: BoundarySpec, grid: Grid) -> ValidationReport:
    """Check the structural conditions; raise ValidationError on violation.

    Reports the ellipticity constant (smallest eigenvalue of the
    coefficient matrix over all nodes) and the per-direction counts of
    nodes where advection will be upwinded to preserve the M-matrix
    property.
    """
    A11, A12, A22 = _coeff(op.a11, grid), _coeff(op.a12, grid), _coeff(op.a22, grid)
    B1, B2, A0 = _coeff(op.b1, grid), _coeff(op.b2, grid), _coeff(op.a0, grid)

    half_tr = 0.5 * (A11 + A22)
    gap = np.sqrt((0.5 * (A11 - A22)) ** 2 + A12 ** 2)
    mu0 = float(np.min(half_tr - gap))
    if mu0 <= 0:
        raise ValidationError(
            "strong uniform ellipticity",
            f"smallest eigenvalue of the second-order coefficient matrix is "
            f"{mu0:.6g} <= 0 at some node")

    a0_min = float(np.min(A0))
    a0_max = float(np.max(A0))
    if a0_min < 0:
        raise ValidationError("nonnegative zero-order coefficient",
                              f"a(x) = {a0_min:.6g} < 0 at some node")

    if bc.kind == "neumann" and a0_max == 0.0:
        raise ValidationError(
            "Neumann solvability",
            "Neumann boundary operator requires a zero-order coefficient "
            "that is not identically zero")

    notes: list[str] = []
    if bc.kind == "robin":
        bvals = eval_expr(bc.b, {"x1": grid.x[grid.boundary_mask],
                                 "x2": grid.y[grid.boundary_mask]})
        bvals = np.broadcast_to(np.asarray(bvals, dtype=float),
                                (int(grid.boundary_mask.sum()),))
        if np.min(bvals) < 0:
            raise ValidationError("oblique boundary coefficient sign",
                                  "robin coefficient b must be >= 0 on the boundary")
        if np.max(bvals) == 0.0:
            raise ValidationError("oblique boundary coefficient sign",
                                  "robin coefficient b must not vanish identically")

    upwind_x = upwind_y = 0
    if isinstance(grid, PolarGrid):
        scale = max(1.0, float(np.max(np.abs(A11))))
        if (np.max(np.abs(A12)) > 1e-12 * scale
                or np.max(np.abs(A11 - A22)) > 1e-12 * scale
                or np.max(A11) - np.min(A11) > 1e-12 * scale):
            raise ValidationError(
                "isotropic constant diffusion on disk",
                "disk grids support only operators of the form "
                "-c*Laplacian + a(x) with constant c > 0")
        if max(np.max(np.abs(B1)), np.max(np.abs(B2))) > 1e-12 * scale:
            raise ValidationError(
                "isotropic constant diffusion on disk",
                "first-order terms are not supported on disk grids")
        notes.append(f"diffusion constant c = {A11[0]:.12g}")
    else:
        assert isinstance(grid, RectGrid)
        ratio = np.abs(A12) - np.minimum(A11 * grid.hy / grid.hx,
                                         A22 * grid.hx / grid.hy)
        if np.max(ratio) > 0:
            raise ValidationError(
                "discrete maximum principle",
                "mixed-derivative coefficient a12 exceeds min(a11*hy/hx, a22*hx/hy) "
                "at some node; the seven-point stencil would lose the M-matrix "
                "property (refine the grid or reduce the anisotropy)")
        margin_x = A11 - np.abs(A12) * grid.hx / grid.hy
        margin_y = A22 - np.abs(A12) * grid.hy / grid.hx
        upwind_x = int(np.sum(0.5 * grid.hx * np.abs(B1) > margin_x))
        upwind_y = int(np.sum(0.5 * grid.hy * np.abs(B2) > margin_y))
        if upwind_x or upwind_y:
            notes.append(
                f"advection upwinded at {upwind_x} node(s) in x and "
                f"{upwind_y} node(s) in y to preserve diagonal dominance")

    return ValidationReport(mu0=mu0, a0_min=a0_min, a0_max=a0_max,
                            boundary_kind=bc.kind, upwind_x_count=upwind_x,
                            upwind_y_count=upwind_y, notes=tuple(notes))


class DiscreteOperator:
    """Assembled (L, B) pair exposing the actions g -> K g and zeta -> gamma.

    Immutable after assembly; the sparse factorization is shared by all
    solves, so concurrent calls are safe.
    """

    def __init__(self, grid: Grid, operator: OperatorSpec, boundary: BoundarySpec,
                 matrix: sp.csr_matrix, report: ValidationReport):
        self.grid = grid
        self.operator = operator
        self.boundary = boundary
        self.matrix = matrix
        self.report = report
        self._prepare_solver()

    def _prepare_solver(self):
        n = self.matrix.shape[0]
        if n <= _DIRECT_SOLVER_LIMIT:
            try:
                self._lu = spla.splu(self.matrix.tocsc())
            except RuntimeError as exc:  # pragma: no cover - guarded by validation
                raise AssemblyError(f"singular discrete system: {exc}") from exc
            self._iterative = False
        else:
            self._lu = None
            self._iterative = True
            diag = self.matrix.diagonal()
            self._precond = spla.LinearOperator(
                self.matrix.shape, matvec=lambda v: v / diag)

    @property
    def n_unknowns(self) -> int:
        return self.matrix.shape[0]

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if not self._iterative:
            u = self._lu.solve(rhs)
            # one step of iterative refinement; the polar first-ring rows are
            # badly scaled and plain LU loses ~3 digits there
            u += self._lu.solve(rhs - self.matrix @ u)
            return u
        u, info = spla.bicgstab(self.matrix, rhs, rtol=_ITERATIVE_RTOL, atol=0.0,
                                M=self._precond)
        if info != 0:
            res = float(np.linalg.norm(self.matrix @ u - rhs))
            raise NumericError(
                f"iterative linear solve did not converge (info={info}, "
                f"residual={res:.3e})")
        return u


def _assemble_rect(op: OperatorSpec, bc: BoundarySpec, grid: RectGrid):
    nx, ny, hx, hy = grid.nx, grid.ny, grid.hx, grid.hy
    shape = (ny + 1, nx + 1)
    idx = np.arange(grid.n_nodes).reshape(shape)

    def interior(coeff):
        return coeff.reshape(shape)[1:-1, 1:-1].ravel()

    A11 = interior(_coeff(op.a11, grid))
    A12 = interior(_coeff(op.a12, grid))
    A22 = interior(_coeff(op.a22, grid))
    B1 = interior(_coeff(op.b1, grid))
    B2 = interior(_coeff(op.b2, grid))
    A0 = interior(_coeff(op.a0, grid))

    C = idx[1:-1, 1:-1].ravel()
    E = idx[1:-1, 2:].ravel()
    W = idx[1:-1, :-2].ravel()
    N = idx[2:, 1:-1].ravel()
    S = idx[:-2, 1:-1].ravel()
    NE = idx[2:, 2:].ravel()
    SW = idx[:-2, :-2].ravel()
    NW = idx[2:, :-2].ravel()
    SE = idx[:-2, 2:].ravel()

    mix = np.abs(A12) / (hx * hy)
    c_ne = -np.maximum(A12, 0.0) / (hx * hy)
    c_nw = -np.maximum(-A12, 0.0) / (hx * hy)

    central_x = 0.5 * hx * np.abs(B1) <= A11 - np.abs(A12) * hx / hy
    cE_adv = np.where(central_x, B1 / (2 * hx), np.where(B1 < 0, B1 / hx, 0.0))
    cW_adv = np.where(central_x, -B1 / (2 * hx), np.where(B1 > 0, -B1 / hx, 0.0))
    central_y = 0.5 * hy * np.abs(B2) <= A22 - np.abs(A12) * hy / hx
    cN_adv = np.where(central_y, B2 / (2 * hy), np.where(B2 < 0, B2 / hy, 0.0))
    cS_adv = np.where(central_y, -B2 / (2 * hy), np.where(B2 > 0, -B2 / hy, 0.0))

    cE = -A11 / hx ** 2 + mix + cE_adv
    cW = -A11 / hx ** 2 + mix + cW_adv
    cN = -A22 / hy ** 2 + mix + cN_adv
    cS = -A22 / hy ** 2 + mix + cS_adv
    cC = (2 * A11 / hx ** 2 + 2 * A22 / hy ** 2 - 2 * mix
          - (cE_adv + cW_adv + cN_adv + cS_adv) + A0)

    rows = [C, C, C, C, C, C, C, C, C]
    cols = [C, E, W, N, S, NE, SW, NW, SE]
    vals = [cC, cE, cW, cN, cS, c_ne, c_ne, c_nw, c_nw]

    # boundary rows
    bmask = grid.boundary_mask
    bidx = np.flatnonzero(bmask)
    if bc.kind == "dirichlet":
        rows.append(bidx)
        cols.append(bidx)
        vals.append(np.ones(bidx.size))
    else:
        J_b, I_b = np.divmod(bidx, nx + 1)
        normals = grid.boundary_normals[bidx]
        if bc.kind == "robin":
            bvals = eval_expr(bc.b, {"x1": grid.x[bidx], "x2": grid.y[bidx]})
            bvals = np.broadcast_to(np.asarray(bvals, dtype=float), (bidx.size,)).copy()
        else:
            bvals = np.zeros(bidx.size)
        diag = bvals.copy()
        for axis, h, I_step in ((0, hx, 1), (1, hy, nx + 1)):
            comp = normals[:, axis]
            has = comp != 0.0
            diag[has] += np.abs(comp[has]) / h
            inward = bidx[has] - np.sign(comp[has]).astype(int) * I_step
            rows.append(bidx[has])
            cols.append(inward)
            vals.append(-np.abs(comp[has]) / h)
        rows.append(bidx)
        cols.append(bidx)
        vals.append(diag)

    return rows, cols, vals


def _assemble_polar(op: OperatorSpec, bc: BoundarySpec, grid: PolarGrid):
    n_r, n_t, dr, dt = grid.n_r, grid.n_theta, grid.dr, grid.dtheta
    A0 = _coeff(op.a0, grid)
    c = float(_coeff(op.a11, grid)[0])

    rows, cols, vals = [], [], []

    # origin: Laplacian closed by the mean over the first ring
    ring1 = np.arange(1, 1 + n_t)
    rows.append(np.zeros(1, dtype=int))
    cols.append(np.zeros(1, dtype=int))
    vals.append(np.array([c * 4.0 / dr ** 2 + A0[0]]))
    rows.append(np.zeros(n_t, dtype=int))
    cols.append(ring1)
    vals.append(np.full(n_t, -c * 4.0 / (dr ** 2 * n_t)))

    ks = np.arange(n_t)
    for j in range(1, n_r):
        r_j = grid.domain.radius * (j / n_r)
        center = grid.node_index(j, ks)
        outer = grid.node_index(j + 1, ks)
        inner = np.zeros(n_t, dtype=int) if j == 1 else grid.node_index(j - 1, ks)
        left = grid.node_index(j, (ks - 1) % n_t)
        right = grid.node_index(j, (ks + 1) % n_t)

        c_out = -c * (1.0 / dr ** 2 + 1.0 / (2.0 * r_j * dr))
        c_in = -c * (1.0 / dr ** 2 - 1.0 / (2.0 * r_j * dr))
        c_ang = -c / (r_j ** 2 * dt ** 2)
        c_diag = c * (2.0 / dr ** 2 + 2.0 / (r_j ** 2 * dt ** 2)) + A0[center]

        rows += [center, center, center, center, center]
        cols += [center, outer, inner, left, right]
        vals += [c_diag, np.full(n_t, c_out), np.full(n_t, c_in),
                 np.full(n_t, c_ang), np.full(n_t, c_ang)]

    bidx = grid.node_index(n_r, ks)
    if bc.kind == "dirichlet":
        rows.append(bidx)
        cols.append(bidx)
        vals.append(np.ones(n_t))
    else:
        if bc.kind == "robin":
            bvals = eval_expr(bc.b, {"x1": grid.x[bidx], "x2": grid.y[bidx]})
            bvals = np.broadcast_to(np.asarray(bvals, dtype=float), (n_t,)).copy()
        else:
            bvals = np.zeros(n_t)
        inner = grid.node_index(n_r - 1, ks)
        rows += [bidx, bidx]
        cols += [bidx, inner]
        vals += [bvals + 1.0 / dr, np.full(n_t, -1.0 / dr)]

    return rows, cols, vals


def assemble(op: OperatorSpec, bc: BoundarySpec, grid: Grid) -> DiscreteOperator:
    """Validate and assemble the discrete system for (L, B) on ``grid``."""
    report = validate_operator(op, bc, grid)
    if isinstance(grid, RectGrid):
        rows, cols, vals = _assemble_rect(op, bc, grid)
    else:
        rows, cols, vals = _assemble_polar(op, bc, grid)

    rows = np.concatenate([np.asarray(r, dtype=int) for r in rows])
    cols = np.concatenate([np.asarray(c, dtype=int) for c in cols])
    vals = np.concatenate([np.asarray(v, dtype=float) for v in vals])
    keep = vals != 0.0
    matrix = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])),
                           shape=(grid.n_nodes, grid.n_nodes)).tocsr()
    matrix.sum_duplicates()

    off = matrix - sp.diags(matrix.diagonal())
    max_off = off.max() if off.nnz else 0.0
    if max_off > 1e-12 * max(1.0, float(np.max(matrix.diagonal()))):
        raise AssemblyError(
            f"assembled matrix has a positive off-diagonal entry ({max_off:.3e}); "
            "the discrete maximum principle would fail")

    return DiscreteOperator(grid, op, bc, matrix, report)


def apply_K(dop: DiscreteOperator, g: ScalarField) -> ScalarField:
    """Solve L u = g with homogeneous boundary data B u = 0."""
    if g.grid is not dop.grid:
        raise NumericError("field does not live on the operator's grid")
    rhs = np.where(dop.grid.interior_mask, g.values, 0.0)
    return ScalarField(dop.grid, dop.solve(rhs))


def lift_gamma(dop: DiscreteOperator, zeta) -> ScalarField:
    """Solve L gamma = 0 with boundary data B gamma = zeta.

    ``zeta`` is a ScalarField on the operator's grid (only its boundary
    values are used) or an array with one value per boundary node.
    """
    grid = dop.grid
    rhs = np.zeros(grid.n_nodes)
    if isinstance(zeta, ScalarField):
        if zeta.grid is not grid:
            raise NumericError("boundary data does not live on the operator's grid")
        rhs[grid.boundary_mask] = zeta.values[grid.boundary_mask]
    else:
        zeta = np.asarray(zeta, dtype=float)
        n_b = int(grid.boundary_mask.sum())
        if zeta.shape != (n_b,):
            raise NumericError(f"expected {n_b} boundary values, got {zeta.shape}")
        rhs[grid.boundary_mask] = zeta
    return ScalarField(grid, dop.solve(rhs))


@dataclass(frozen=True)
class Eigenpair:
    """Principal eigenpair of K: spectral radius r, mu = 1/r, eigenfunction."""

    r: float
    mu: float
    phi: ScalarField
    residual: float
    iterations: int


def principal_eigenpair(dop: DiscreteOperator, tol: float = 1e-10,
                        max_iter: int = 10_000) -> Eigenpair:
    """Power iteration for the spectral radius of K and its eigenfunction.

    Starts from the constant function 1 and renormalizes in the sup norm
    each step; the reported residual is ||K phi - r phi||_inf for the
    stored (phi, r).
    """
    if tol <= 0:
        raise NumericError("eigenpair tolerance must be positive")
    grid = dop.grid
    phi = np.ones(grid.n_nodes)
    residual = math.inf
    for it in range(1, max_iter + 1):
        y = apply_K(dop, ScalarField(grid, phi)).values
        y = np.where((y < 0) & (y > -1e-13), 0.0, y)  # absorb factorization noise
        r = float(np.max(np.abs(y)))
        if r <= 0:
            raise NumericError("power iteration collapsed to zero; "
                               "K has no positive action on the start vector")
        residual = float(np.max(np.abs(y - r * phi)))
        if residual <= tol:
            return Eigenpair(r=r, mu=1.0 / r, phi=ScalarField(grid, phi),
                             residual=residual, iterations=it)
        phi = y / r
    raise NonConvergenceError(
        f"power iteration did not reach tolerance {tol:g} in {max_iter} "
        f"iterations (last residual {residual:.3e})", residual=residual)
