"""Error norms, estimated orders of convergence, and study orchestration.

Errors are measured against manufactured exact solutions: a weighted
L2-in-time norm for the state (and the multiplier) and the maximum nodal
error over the breakpoints, the quantity that exhibits superconvergence of
order 2q - 1 when the constraint data is projected.  The error quadrature
deliberately uses one more Gauss point than the solvers, so accuracy is
never measured with the rule that assembled the system.

``eoc`` computes orders pairwise between consecutive refinement levels:
order_i = log(err_{i-1} / err_i) / log(N_i / N_{i-1}).  Errors at the
floating-point floor (below ``EOC_FLOOR``) give ``math.nan``, rendered as
"at-floor" by the CLI formatters.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .dgsolver import SolverOptions, solve_constrained, solve_mixed
from .systems import ConstrainedSystem, build_heat_1d, build_saddle_dae
from .timecore import BrokenFunction, Quadrature, build_uniform_mesh, gauss_legendre

__all__ = [
    "EOC_FLOOR",
    "StudyRow",
    "EOCTable",
    "error_l2_energy",
    "error_nodal_max",
    "error_l2_multiplier",
    "eoc",
    "l2_project_broken",
    "run_study",
]

EOC_FLOOR = 1e-13
STUDY_NORMS = ("energy", "nodal", "multiplier")


def error_l2_energy(U: BrokenFunction, exact, normU, quad: Quadrature) -> float:
    """L2-in-time error (sum_n int_{I_n} ||U - exact||_normU^2 dt)^(1/2)."""
    W = np.asarray(normU, dtype=float)
    if W.ndim == 0:
        W = float(W) * np.eye(U.dim)
    if W.shape != (U.dim, U.dim):
        raise ValueError(f"norm matrix must be {U.dim}x{U.dim}, got {W.shape}")
    total = 0.0
    for n in range(U.mesh.N):
        s = U.slab(n)
        ts = s.a + s.width * quad.nodes
        diff = s.eval_many(ts) - np.stack(
            [np.atleast_1d(np.asarray(exact(t), dtype=float)) for t in ts], axis=1)
        total += s.width * np.einsum("an,ab,bn,n->", diff, W, diff, quad.weights)
    return float(np.sqrt(total))


def error_nodal_max(U: BrokenFunction, exact, M) -> float:
    """max_n ||U^n - exact(t_n)||_M over the breakpoints t_1 .. t_N."""
    W = np.asarray(M, dtype=float)
    if W.ndim == 0:
        W = float(W) * np.eye(U.dim)
    worst = 0.0
    for n in range(1, U.mesh.N + 1):
        d = U.node_value(n) - np.atleast_1d(
            np.asarray(exact(U.mesh.breakpoints[n]), dtype=float))
        worst = max(worst, float(np.sqrt(d @ W @ d)))
    return worst


def error_l2_multiplier(P: BrokenFunction, exact_p, normQ1, quad: Quadrature) -> float:
    """L2-in-time error of the Lagrange multiplier."""
    return error_l2_energy(P, exact_p, normQ1, quad)


def eoc(errors: Sequence[float], Ns: Sequence[int], floor: float = EOC_FLOOR) -> list:
    """Pairwise estimated orders of convergence; nan marks at-floor entries."""
    if len(errors) != len(Ns) or len(errors) < 2:
        raise ValueError("need equally long error/N sequences of length >= 2")
    if not all(Ns[i] < Ns[i + 1] for i in range(len(Ns) - 1)):
        raise ValueError("Ns must be strictly increasing")
    out = []
    for i in range(1, len(errors)):
        e_prev, e_cur = errors[i - 1], errors[i]
        if e_prev < 0.0 or e_cur < 0.0:
            raise ValueError("errors must be nonnegative")
        if e_prev < floor or e_cur < floor:
            out.append(math.nan)  # at the floating-point floor
        else:
            out.append(math.log(e_prev / e_cur) / math.log(Ns[i] / Ns[i - 1]))
    return out


def l2_project_broken(phi, mesh, dim: int, q: int, quad: Quadrature) -> BrokenFunction:
    """Plain slab-wise L2 projection of degree q - 1 (measurement utility).

    Unlike the endpoint-interpolating projection this matches q moments and
    generally misses the breakpoint values; useful for comparing the two
    data treatments.
    """
    from numpy.polynomial import legendre as npleg

    bp = mesh.breakpoints
    V = npleg.legvander(2.0 * quad.nodes - 1.0, q - 1)  # (npts, q)
    out = np.empty((mesh.N, q, dim))
    for n in range(mesh.N):
        a, b = float(bp[n]), float(bp[n + 1])
        ts = a + (b - a) * quad.nodes
        vals = np.stack([np.atleast_1d(np.asarray(phi(t), dtype=float)) for t in ts])
        mom = (b - a) * V.T @ (quad.weights[:, None] * vals)
        out[n] = ((2.0 * np.arange(q) + 1.0) / (b - a))[:, None] * mom
    return BrokenFunction(mesh, out)


@dataclass(frozen=True)
class StudyRow:
    """One refinement level; None marks an unselected norm, nan an EOC at floor."""

    N: int
    k: float
    err_energy: Optional[float] = None
    eoc_energy: Optional[float] = None
    err_nodal: Optional[float] = None
    eoc_nodal: Optional[float] = None
    err_p: Optional[float] = None
    eoc_p: Optional[float] = None


@dataclass(frozen=True)
class EOCTable:
    """Convergence table for one problem / q / projection variant.

    Spatial error is designed out of the built-in problems, so the orders
    are purely temporal.
    """

    problem: str
    q: int
    use_projection: bool
    rows: tuple

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.rows]


def _resolve_problem(problem: Union[str, ConstrainedSystem], n_elements: int) -> ConstrainedSystem:
    if isinstance(problem, ConstrainedSystem):
        return problem
    if problem == "heat1d":
        return build_heat_1d(n_elements)
    if problem == "stokes3":
        return build_saddle_dae("stokes3")
    raise ValueError(f"unknown problem {problem!r} (expected 'heat1d', 'stokes3', "
                     "or a ConstrainedSystem)")


def _max_workers(n_tasks: int) -> int:
    env = os.environ.get("DGTIME_THREADS", "").strip()
    if env:
        workers = int(env)
        if workers < 1:
            raise ValueError("DGTIME_THREADS must be a positive integer")
    else:
        workers = os.cpu_count() or 1
    return max(1, min(workers, n_tasks))


def run_study(problem: Union[str, ConstrainedSystem], q: int, Ns: Sequence[int],
              use_projection: bool = True, norms: Sequence[str] = ("energy", "nodal"),
              T: float = 1.0, quad_points: Optional[int] = None,
              n_elements: int = 4) -> EOCTable:
    """Solve a problem over a sequence of slab counts and tabulate errors.

    ``problem`` is "heat1d", "stokes3", or a ConstrainedSystem with
    manufactured exact solutions.  Each N gets a uniform mesh on (0, T];
    the solve path (lifted vs multiplier) follows the constraint blocks.
    Independent Ns run concurrently, capped by the DGTIME_THREADS
    environment variable (default: available cores); the table is a
    deterministic reduction ordered by N.
    """
    Ns = [int(N) for N in Ns]
    if len(Ns) == 0:
        raise ValueError("need at least one slab count")
    if not all(Ns[i] < Ns[i + 1] for i in range(len(Ns) - 1)):
        raise ValueError("Ns must be strictly increasing")
    norms = tuple(norms)
    unknown = set(norms) - set(STUDY_NORMS)
    if unknown:
        raise ValueError(f"unknown norms {sorted(unknown)} (choose from {STUDY_NORMS})")
    system = _resolve_problem(problem, n_elements)
    if system.exact_u is None:
        raise ValueError("convergence study needs a system with exact_u")
    if "multiplier" in norms and (system.r1 == 0 or system.exact_p is None):
        raise ValueError("multiplier norm requires r1 >= 1 and exact_p")
    opts = SolverOptions(q=q, use_projection=use_projection, quad_points=quad_points)
    errquad = gauss_legendre(q + 3)
    solve = solve_constrained if system.r2 > 0 else solve_mixed

    def one(N: int) -> dict:
        mesh = build_uniform_mesh(T, N)
        sol = solve(system, mesh, opts)
        rec = {"N": N, "k": T / N}
        if "energy" in norms:
            rec["err_energy"] = error_l2_energy(sol.U, system.exact_u, system.normU, errquad)
        if "nodal" in norms:
            rec["err_nodal"] = error_nodal_max(sol.U, system.exact_u, system.M)
        if "multiplier" in norms:
            rec["err_p"] = error_l2_multiplier(sol.P, system.exact_p, system.normQ1, errquad)
        return rec

    workers = _max_workers(len(Ns))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            recs = list(pool.map(one, Ns))
    else:
        recs = [one(N) for N in Ns]

    orders = {}
    for key in ("err_energy", "err_nodal", "err_p"):
        if key in recs[0] and len(recs) >= 2:
            orders[key] = [None] + eoc([r[key] for r in recs], Ns)
        else:
            orders[key] = [None] * len(recs)
    rows = tuple(
        StudyRow(
            N=r["N"], k=r["k"],
            err_energy=r.get("err_energy"), eoc_energy=orders["err_energy"][i],
            err_nodal=r.get("err_nodal"), eoc_nodal=orders["err_nodal"][i],
            err_p=r.get("err_p"), eoc_p=orders["err_p"][i],
        )
        for i, r in enumerate(recs)
    )
    name = system.name if isinstance(problem, ConstrainedSystem) else problem
    return EOCTable(problem=name, q=q, use_projection=use_projection, rows=rows)
