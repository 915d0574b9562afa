"""Per-slab DG solvers for linearly constrained parabolic systems.

On the slab I_n = (t_{n-1}, t_n] of width k, expanding the unknown in the
shifted Legendre basis, U|_{I_n} = sum_j phi_j u_j, the DG-in-time weak
form reduces to the dense linear system

    sum_j (Dmat_ij M + Smat_ij A) u_j [+ sum_j Smat_ij B1^T p_j]
        = F_i + e_i M u_prev,
    sum_j Smat_ij B1 u_j = G_i,

where Dmat collects the weak time derivative plus the upwind jump term,
Smat = diag(k / (2j+1)) is the slab mass matrix, e_i = phi_i(t_{n-1}+)
= (-1)^i, F_i = int_{I_n} phi_i f dt, and u_prev is the terminal value of
the previous slab (the initial state for n = 1).  Slabs are solved in
sequence; each dense system is LU-factored once per distinct slab width
and reused.

Constraint data enters through G_i.  With the projection switch on, g1 is
replaced by its endpoint-interpolating slab projection, which makes the
discrete constraint B1 U = (projected g1) hold identically as a polynomial
on every slab; switched off, G_i falls back to the raw quadrature moments
of g1 (the discrete constraint then only matches g1 in the L2 sense, which
costs nodal superconvergence and a full order of the multiplier).

Explicitly constrained components (B2 u = g2) are eliminated before the
solve: the data lift G(t) = L g2(t) is projected slab-wise, the solution
is written as U = Z y + (proj G) with Z an orthonormal kernel basis of B2,
and the slab system above is posed for y on the kernel.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import legendre as npleg
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve, null_space

from .projection import ProjectionSpec, project_slab
from .timecore import BrokenFunction, Quadrature, TimeMesh, gauss_legendre

__all__ = [
    "SolverOptions",
    "MixedSolution",
    "SlabSolveError",
    "DataError",
    "assemble_temporal_matrices",
    "solve_mixed",
    "solve_constrained",
    "solve_monolithic",
    "dg_residual",
    "constraint_residual",
]


class SlabSolveError(RuntimeError):
    """A slab system could not be solved; carries the 1-based slab index."""

    def __init__(self, slab: int, message: str):
        super().__init__(f"slab {slab}: {message}")
        self.slab = slab


class DataError(ValueError):
    """Non-finite values encountered in problem data."""


@dataclass(frozen=True)
class SolverOptions:
    """q temporal dofs per slab (degree q-1), projection switch, quadrature."""

    q: int = 2
    use_projection: bool = True
    quad_points: Optional[int] = None  # default max(q + 2, 4)

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.quad_points is not None and 2 * self.quad_points - 1 < 2 * self.q - 1:
            raise ValueError("slab quadrature must be exact to degree >= 2q - 1")

    def quadrature(self) -> Quadrature:
        return gauss_legendre(self.quad_points or max(self.q + 2, 4))


@dataclass(frozen=True, eq=False)
class MixedSolution:
    """Broken state U, broken multiplier P (None when r1 = 0), diagnostics."""

    U: BrokenFunction
    P: Optional[BrokenFunction]
    condition_estimates: np.ndarray


def assemble_temporal_matrices(q: int, width: float):
    """Per-slab temporal matrices in the shifted Legendre basis.

    Returns (Dmat, Smat, e) with

        Dmat_ij = int phi_j' phi_i dt + phi_j(a+) phi_i(a+),
        Smat    = diag(width / (2j + 1)),
        e_i     = phi_i(a+) = (-1)^i.

    The derivative part is width-independent: int P_j' P_i dx over [-1, 1]
    equals 2 for j > i with j - i odd and vanishes otherwise.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if not width > 0.0:
        raise ValueError("slab width must be positive")
    j = np.arange(q)
    e = (-1.0) ** j
    Dmat = np.outer(e, e)
    for i in range(q):
        for jj in range(i + 1, q, 2):
            Dmat[i, jj] += 2.0
    Smat = np.diag(width / (2.0 * j + 1.0))
    return Dmat, Smat, e


def _basis_rows(quad: Quadrature, q: int) -> np.ndarray:
    """phi_i at the reference quadrature nodes; shape (q, npoints)."""
    return npleg.legvander(2.0 * quad.nodes - 1.0, q - 1).T


def _moments(func, a: float, b: float, quad: Quadrature, Phi: np.ndarray, slab: int) -> np.ndarray:
    """int_a^b phi_i(t) func(t) dt by quadrature; shape (q, dim)."""
    k = b - a
    vals = np.stack([np.atleast_1d(np.asarray(func(a + k * x), dtype=float))
                     for x in quad.nodes])
    if not np.all(np.isfinite(vals)):
        raise DataError(f"non-finite data on slab {slab}")
    return k * (Phi * quad.weights) @ vals


def _l2_slab_coeffs(func, a: float, b: float, quad: Quadrature, q: int,
                    Phi: np.ndarray, slab: int) -> np.ndarray:
    """Modal coefficients of the plain L2 projection of func onto the slab."""
    mom = _moments(func, a, b, quad, Phi, slab)
    return ((2.0 * np.arange(q) + 1.0) / (b - a))[:, None] * mom


def _lift_coeffs(system, a, b, opts, quad, Phi, spec, slab) -> np.ndarray:
    """Slab coefficients of the lifted explicit-constraint data L g2."""

    def Gfun(t):
        return system.lift @ np.atleast_1d(np.asarray(system.g2(t), dtype=float))

    if opts.use_projection:
        return project_slab(Gfun, (a, b), spec).coeffs
    return _l2_slab_coeffs(Gfun, a, b, quad, q=spec.q, Phi=Phi, slab=slab)


def _g1_target(system, a, b, opts, quad, Phi, spec, Smat, slab) -> np.ndarray:
    """Right-hand side of the weak constraint rows, shape (q, r1)."""
    if opts.use_projection:
        return Smat @ project_slab(system.g1, (a, b), spec).coeffs
    return _moments(system.g1, a, b, quad, Phi, slab)


def _slab_matrix(Dmat, Smat, Mmat, Amat, B1mat) -> np.ndarray:
    top = np.kron(Dmat, Mmat) + np.kron(Smat, Amat)
    if B1mat is None or B1mat.shape[0] == 0:
        return top
    nc = Smat.shape[0] * B1mat.shape[0]
    return np.block([
        [top, np.kron(Smat, B1mat.T)],
        [np.kron(Smat, B1mat), np.zeros((nc, nc))],
    ])


def _factor(K: np.ndarray, slab: int):
    with warnings.catch_warnings():
        # singularity is detected below and raised as SlabSolveError
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(K, check_finite=False)
    d = np.abs(np.diag(lu))
    if d.size == 0 or d.min() <= d.max() * K.shape[0] * np.finfo(float).eps:
        raise SlabSolveError(slab, "singular slab system (check constraint ranks / inf-sup)")
    return lu, piv


def _kernel_basis(system) -> np.ndarray:
    lift_res = float(np.abs(system.B2 @ system.lift - np.eye(system.r2)).max())
    if lift_res > 1e-10:
        raise ValueError(f"lift is not a right inverse of B2 (residual {lift_res:.2e})")
    Z = null_space(np.asarray(system.B2, dtype=float))
    if Z.shape[1] == 0:
        raise ValueError("B2 leaves no free state components")
    return Z


def solve_mixed(system, mesh: TimeMesh, opts: SolverOptions) -> MixedSolution:
    """Sequential slab-by-slab solve of the multiplier formulation (r2 = 0)."""
    if system.r2 != 0:
        raise ValueError("solve_mixed requires r2 = 0; use solve_constrained")
    q = opts.q
    quad = opts.quadrature()
    Phi = _basis_rows(quad, q)
    spec = ProjectionSpec(q, quad)
    m, r1 = system.m, system.r1
    M, A, B1 = system.M, system.A, system.B1
    bp = mesh.breakpoints
    N = mesh.N
    ucoef = np.empty((N, q, m))
    pcoef = np.empty((N, q, r1))
    conds = np.empty(N)
    cache = {}
    u_prev = system.u0
    for n in range(N):
        a, b = float(bp[n]), float(bp[n + 1])
        k = b - a
        if k not in cache:
            Dmat, Smat, e = assemble_temporal_matrices(q, k)
            K = _slab_matrix(Dmat, Smat, M, A, B1 if r1 else None)
            cache[k] = (_factor(K, n + 1), float(np.linalg.cond(K, 1)), Dmat, Smat, e)
        lu, conds[n], Dmat, Smat, e = cache[k]
        F = _moments(system.f, a, b, quad, Phi, n + 1)
        rhs = (F + np.outer(e, M @ u_prev)).ravel()
        if r1:
            G = _g1_target(system, a, b, opts, quad, Phi, spec, Smat, n + 1)
            rhs = np.concatenate([rhs, G.ravel()])
        sol = lu_solve(lu, rhs, check_finite=False)
        ucoef[n] = sol[: q * m].reshape(q, m)
        if r1:
            pcoef[n] = sol[q * m:].reshape(q, r1)
        u_prev = ucoef[n].sum(axis=0)
    U = BrokenFunction(mesh, ucoef)
    P = BrokenFunction(mesh, pcoef) if r1 else None
    return MixedSolution(U, P, conds)


def solve_constrained(system, mesh: TimeMesh, opts: SolverOptions) -> MixedSolution:
    """Sequential solve with the explicit constraint block eliminated (r2 >= 1).

    The lifted data L g2 is projected slab-wise; on every slab the total
    coefficients are u_j = Z y_j + c_j with c the lift coefficients, so the
    kernel system for y carries the lift contribution on its right-hand
    side.  When B1 is also present, the multiplier block is retained on the
    kernel (combined case).
    """
    if system.r2 == 0:
        raise ValueError("solve_constrained requires r2 >= 1; use solve_mixed")
    q = opts.q
    quad = opts.quadrature()
    Phi = _basis_rows(quad, q)
    spec = ProjectionSpec(q, quad)
    m, r1 = system.m, system.r1
    M, A, B1 = system.M, system.A, system.B1
    Z = _kernel_basis(system)
    mz = Z.shape[1]
    Mz, Az = Z.T @ M @ Z, Z.T @ A @ Z
    B1z = B1 @ Z if r1 else None
    bp = mesh.breakpoints
    N = mesh.N
    ucoef = np.empty((N, q, m))
    pcoef = np.empty((N, q, r1))
    conds = np.empty(N)
    cache = {}
    u_prev = system.u0
    for n in range(N):
        a, b = float(bp[n]), float(bp[n + 1])
        k = b - a
        if k not in cache:
            Dmat, Smat, e = assemble_temporal_matrices(q, k)
            K = _slab_matrix(Dmat, Smat, Mz, Az, B1z)
            cache[k] = (_factor(K, n + 1), float(np.linalg.cond(K, 1)), Dmat, Smat, e)
        lu, conds[n], Dmat, Smat, e = cache[k]
        c = _lift_coeffs(system, a, b, opts, quad, Phi, spec, n + 1)
        F = _moments(system.f, a, b, quad, Phi, n + 1)
        R = F + np.outer(e, M @ u_prev) - Dmat @ (c @ M.T) - Smat @ (c @ A.T)
        rhs = (R @ Z).ravel()
        if r1:
            G = _g1_target(system, a, b, opts, quad, Phi, spec, Smat, n + 1)
            rhs = np.concatenate([rhs, (G - Smat @ (c @ B1.T)).ravel()])
        sol = lu_solve(lu, rhs, check_finite=False)
        ucoef[n] = sol[: q * mz].reshape(q, mz) @ Z.T + c
        if r1:
            pcoef[n] = sol[q * mz:].reshape(q, r1)
        u_prev = ucoef[n].sum(axis=0)
    U = BrokenFunction(mesh, ucoef)
    P = BrokenFunction(mesh, pcoef) if r1 else None
    return MixedSolution(U, P, conds)


def solve_monolithic(system, mesh: TimeMesh, opts: SolverOptions) -> MixedSolution:
    """Assemble all slabs into one block lower-triangular system and solve once.

    Produces the same solution as the sequential solvers (cross-check path;
    the global matrix is dense, so keep N small).
    """
    q = opts.q
    quad = opts.quadrature()
    Phi = _basis_rows(quad, q)
    spec = ProjectionSpec(q, quad)
    m, r1 = system.m, system.r1
    M, A, B1 = system.M, system.A, system.B1
    if system.r2 > 0:
        Z = _kernel_basis(system)
        Mred, Ared = Z.T @ M @ Z, Z.T @ A @ Z
        B1red = B1 @ Z if r1 else None
    else:
        Z = None
        Mred, Ared, B1red = M, A, (B1 if r1 else None)
    mz = Mred.shape[0]
    bp = mesh.breakpoints
    N = mesh.N
    s = q * mz + q * r1
    Kg = np.zeros((N * s, N * s))
    rhs_g = np.zeros(N * s)
    lifts = []
    Dmat = Smat = e = None
    for n in range(N):
        a, b = float(bp[n]), float(bp[n + 1])
        k = b - a
        Dmat, Smat, e = assemble_temporal_matrices(q, k)
        row = n * s
        Kg[row: row + s, row: row + s] = _slab_matrix(Dmat, Smat, Mred, Ared, B1red)
        if n > 0:
            # terminal value of the previous slab: sum of its coefficients
            Kg[row: row + q * mz, row - s: row - s + q * mz] -= np.kron(
                np.outer(e, np.ones(q)), Mred)
        F = _moments(system.f, a, b, quad, Phi, n + 1)
        if Z is not None:
            c = _lift_coeffs(system, a, b, opts, quad, Phi, spec, n + 1)
            lifts.append(c)
            R = F - Dmat @ (c @ M.T) - Smat @ (c @ A.T)
            if n == 0:
                R = R + np.outer(e, M @ system.u0)
            rhs_slab = R @ Z
            if n > 0:
                # lift part of the previous terminal value stays on the RHS
                rhs_slab = rhs_slab + np.outer(e, Z.T @ (M @ lifts[n - 1].sum(axis=0)))
        else:
            rhs_slab = F
            if n == 0:
                rhs_slab = rhs_slab + np.outer(e, M @ system.u0)
        rhs_g[row: row + q * mz] = rhs_slab.ravel()
        if r1:
            G = _g1_target(system, a, b, opts, quad, Phi, spec, Smat, n + 1)
            if Z is not None:
                G = G - Smat @ (lifts[n] @ B1.T)
            rhs_g[row + q * mz: row + s] = G.ravel()
    sol = lu_solve(_factor(Kg, 0), rhs_g, check_finite=False)
    cond = float(np.linalg.cond(Kg, 1))
    ucoef = np.empty((N, q, m))
    pcoef = np.empty((N, q, r1))
    for n in range(N):
        blk = sol[n * s: (n + 1) * s]
        y = blk[: q * mz].reshape(q, mz)
        ucoef[n] = y @ Z.T + lifts[n] if Z is not None else y
        if r1:
            pcoef[n] = blk[q * mz:].reshape(q, r1)
    U = BrokenFunction(mesh, ucoef)
    P = BrokenFunction(mesh, pcoef) if r1 else None
    return MixedSolution(U, P, np.full(N, cond))


def dg_residual(system, mesh: TimeMesh, opts: SolverOptions, U: BrokenFunction,
                P: Optional[BrokenFunction] = None) -> np.ndarray:
    """Max absolute residual of the discrete equations, per slab.

    Tests the momentum equation against every temporal basis function (on
    the constraint kernel when an explicit block is present) and the
    constraint equations in their modal coefficients, using the same data
    treatment as the solvers.
    """
    if U.dim != system.m or U.degree != opts.q - 1:
        raise ValueError("solution shape does not match system/options")
    q = opts.q
    quad = opts.quadrature()
    Phi = _basis_rows(quad, q)
    spec = ProjectionSpec(q, quad)
    m, r1 = system.m, system.r1
    M, A, B1 = system.M, system.A, system.B1
    if r1 and (P is None or P.dim != r1):
        raise ValueError("multiplier P of dimension r1 required")
    Z = _kernel_basis(system) if system.r2 > 0 else None
    bp = mesh.breakpoints
    out = np.empty(mesh.N)
    u_prev = system.u0
    for n in range(mesh.N):
        a, b = float(bp[n]), float(bp[n + 1])
        Dmat, Smat, e = assemble_temporal_matrices(q, b - a)
        uc = U.coeffs[n]
        F = _moments(system.f, a, b, quad, Phi, n + 1)
        R = Dmat @ (uc @ M.T) + Smat @ (uc @ A.T) - F - np.outer(e, M @ u_prev)
        if r1:
            R = R + Smat @ (P.coeffs[n] @ B1)
        parts = [np.abs(R @ Z).max() if Z is not None else np.abs(R).max()]
        if r1:
            G = _g1_target(system, a, b, opts, quad, Phi, spec, Smat, n + 1)
            parts.append(np.abs(Smat @ (uc @ B1.T) - G).max())
        if system.r2 > 0:
            if opts.use_projection:
                d2 = project_slab(system.g2, (a, b), spec).coeffs
            else:
                d2 = _l2_slab_coeffs(system.g2, a, b, quad, q, Phi, n + 1)
            parts.append(np.abs(uc @ system.B2.T - d2).max())
        out[n] = max(parts)
        u_prev = uc.sum(axis=0)
    return out


def constraint_residual(system, mesh: TimeMesh, opts: SolverOptions,
                        U: BrokenFunction) -> np.ndarray:
    """Per-slab max modal coefficient of B U minus the projected data.

    This is the quantity that vanishes identically (up to rounding) when
    the projection switch is on: the discrete constraint holds as a
    polynomial identity on every slab, not just in quadrature.
    """
    q = opts.q
    quad = opts.quadrature()
    spec = ProjectionSpec(q, quad)
    bp = mesh.breakpoints
    out = np.zeros(mesh.N)
    for n in range(mesh.N):
        a, b = float(bp[n]), float(bp[n + 1])
        uc = U.coeffs[n]
        parts = [0.0]
        if system.r1 > 0:
            d1 = project_slab(system.g1, (a, b), spec).coeffs
            parts.append(float(np.abs(uc @ system.B1.T - d1).max()))
        if system.r2 > 0:
            d2 = project_slab(system.g2, (a, b), spec).coeffs
            parts.append(float(np.abs(uc @ system.B2.T - d2).max()))
        out[n] = max(parts)
    return out
