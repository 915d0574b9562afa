"""Finite-dimensional linearly constrained parabolic systems.

A system collects the data of

    M u'(t) + A u(t) + B1^T p(t) = f(t)      (momentum)
    B1 u(t) = g1(t)                          (weak constraint, multiplier p)
    B2 u(t) = g2(t)                          (explicit constraint, lifted)
    u(0) = u0,

with M SPD, A symmetric and elliptic on ker([B1; B2]), and [B1; B2] of
full row rank.  Either constraint block may be empty.  Explicit
constraints come with a lift L (a right inverse of B2, B2 L = I) so that
solvers can substitute u = w + L g2 and work in ker(B2).

Two generators with manufactured exact solutions are built in:

* ``build_heat_1d`` — 1D heat equation on (0, 1), quadratic finite
  elements, Dirichlet values as the explicit constraint block (r1 = 0).
  The manufactured solution is required to be quadratic in space, so the
  spatial discretization is exact and measured errors are purely temporal.
* ``build_saddle_dae`` — a small index-2 saddle-point DAE (preset
  "stokes3") standing in for a mixed Stokes-type system (r2 = 0): the
  algebraic constraint B1 u = g1 is enforced by a Lagrange multiplier.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cholesky, eigh, null_space, svdvals

__all__ = [
    "ConstrainedSystem",
    "ManufacturedSolution1D",
    "DEFAULT_HEAT_SOLUTION",
    "Check",
    "ValidationReport",
    "PRESET_FUNCTIONS",
    "build_heat_1d",
    "build_saddle_dae",
    "validate_system",
    "load_system",
]

_COMPAT_TOL = 1e-10


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class ConstrainedSystem:
    """Immutable system data; function fields must be pure and reentrant."""

    M: np.ndarray
    A: np.ndarray
    f: Callable[[float], np.ndarray]
    u0: np.ndarray
    B1: Optional[np.ndarray] = None
    B2: Optional[np.ndarray] = None
    g1: Optional[Callable[[float], np.ndarray]] = None
    g2: Optional[Callable[[float], np.ndarray]] = None
    lift: Optional[np.ndarray] = None
    normU: Optional[np.ndarray] = None
    normQ1: Optional[np.ndarray] = None
    exact_u: Optional[Callable[[float], np.ndarray]] = None
    exact_p: Optional[Callable[[float], np.ndarray]] = None
    name: str = "custom"

    def __post_init__(self):
        M = _readonly(self.M)
        m = M.shape[0]
        if M.shape != (m, m):
            raise ValueError("M must be square")
        A = _readonly(self.A)
        if A.shape != (m, m):
            raise ValueError("A must match the shape of M")
        u0 = _readonly(self.u0)
        if u0.shape != (m,):
            raise ValueError("u0 must be a length-m vector")
        B1 = _readonly(self.B1 if self.B1 is not None else np.zeros((0, m)))
        B2 = _readonly(self.B2 if self.B2 is not None else np.zeros((0, m)))
        if B1.ndim != 2 or B1.shape[1] != m:
            raise ValueError("B1 must have shape (r1, m)")
        if B2.ndim != 2 or B2.shape[1] != m:
            raise ValueError("B2 must have shape (r2, m)")
        if B1.shape[0] > 0 and self.g1 is None:
            raise ValueError("g1 data required when B1 is present")
        if B2.shape[0] > 0 and self.g2 is None:
            raise ValueError("g2 data required when B2 is present")
        lift = self.lift
        if B2.shape[0] > 0:
            if lift is None:
                raise ValueError("a lift (right inverse of B2) is required when B2 is present")
            lift = _readonly(lift)
            if lift.shape != (m, B2.shape[0]):
                raise ValueError("lift must have shape (m, r2)")
        normU = _readonly(self.normU if self.normU is not None else M + A)
        normQ1 = _readonly(self.normQ1 if self.normQ1 is not None else np.eye(B1.shape[0]))
        for fld, val in (("M", M), ("A", A), ("B1", B1), ("B2", B2), ("u0", u0),
                         ("lift", lift), ("normU", normU), ("normQ1", normQ1)):
            object.__setattr__(self, fld, val)
        self._warn_incompatible_u0()

    def _warn_incompatible_u0(self):
        for Bmat, g, label in ((self.B1, self.g1, "g1"), (self.B2, self.g2, "g2")):
            if Bmat.shape[0] == 0:
                continue
            res = Bmat @ self.u0 - np.atleast_1d(np.asarray(g(0.0), dtype=float))
            scale = 1.0 + float(np.abs(Bmat @ self.u0).max(initial=0.0))
            if np.abs(res).max(initial=0.0) > _COMPAT_TOL * scale:
                warnings.warn(
                    f"initial state is incompatible with {label}(0) "
                    f"(residual {np.abs(res).max():.3e}); reduced accuracy expected",
                    UserWarning,
                    stacklevel=3,
                )

    @property
    def m(self) -> int:
        return self.M.shape[0]

    @property
    def r1(self) -> int:
        return self.B1.shape[0]

    @property
    def r2(self) -> int:
        return self.B2.shape[0]


# ---------------------------------------------------------------------------
# validation

@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    value: Optional[float]
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple
    warnings: tuple

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)


def validate_system(system: ConstrainedSystem, tol: float = 1e-12) -> ValidationReport:
    """Check the structural assumptions the solvers rely on.

    Verifies: M SPD, A symmetric, full row rank of the stacked constraint
    matrix, ellipticity of A on the constraint kernel, the lift residual
    B2 @ lift - I, and the inf-sup rank of B1 restricted to ker(B2).
    Initial-data compatibility is reported as a warning, never a failure.
    """
    checks = []
    warns = []
    M, A = system.M, system.A
    m = system.m

    sym_m = float(np.abs(M - M.T).max(initial=0.0))
    scale_m = float(np.abs(M).max(initial=0.0)) or 1.0
    spd = sym_m <= tol * scale_m
    detail = f"max asymmetry {sym_m:.2e}"
    if spd:
        try:
            cholesky(M, lower=True)
            detail += ", Cholesky ok"
        except np.linalg.LinAlgError:
            spd = False
            detail += ", Cholesky failed"
    checks.append(Check("mass matrix SPD", spd, sym_m, detail))

    sym_a = float(np.abs(A - A.T).max(initial=0.0))
    scale_a = float(np.abs(A).max(initial=0.0)) or 1.0
    checks.append(Check("stiffness symmetric", sym_a <= tol * scale_a, sym_a,
                        f"max asymmetry {sym_a:.2e}"))

    B = np.vstack([system.B1, system.B2])
    r = B.shape[0]
    if r == 0:
        checks.append(Check("constraint row rank", True, None, "no constraints"))
        Z = np.eye(m)
    else:
        sv = svdvals(B)
        ok = sv.size == r and sv[-1] > tol * max(sv[0], 1.0)
        checks.append(Check("constraint row rank", ok, float(sv[-1]),
                            f"smallest singular value {sv[-1]:.3e}"))
        Z = null_space(B)

    if Z.shape[1] == 0:
        checks.append(Check("kernel ellipticity", True, None, "trivial kernel"))
    else:
        lam = eigh(Z.T @ A @ Z, eigvals_only=True)
        ok = lam[0] > tol * max(abs(lam[-1]), 1.0)
        checks.append(Check("kernel ellipticity", bool(ok), float(lam[0]),
                            f"smallest kernel eigenvalue {lam[0]:.3e}"))

    if system.r2 > 0:
        res = float(np.abs(system.B2 @ system.lift - np.eye(system.r2)).max())
        checks.append(Check("lift residual", res <= 1e-12, res,
                            f"max |B2 L - I| = {res:.2e}"))

    if system.r1 > 0:
        Z2 = null_space(system.B2) if system.r2 > 0 else np.eye(m)
        sv = svdvals(system.B1 @ Z2)
        ok = sv.size == system.r1 and sv[-1] > tol * max(sv[0], 1.0)
        checks.append(Check("inf-sup (B1 on ker B2)", bool(ok),
                            float(sv[-1]) if sv.size else 0.0,
                            f"smallest singular value {sv[-1] if sv.size else 0.0:.3e}"))

    for Bmat, g, label in ((system.B1, system.g1, "g1"), (system.B2, system.g2, "g2")):
        if Bmat.shape[0] == 0:
            continue
        res = Bmat @ system.u0 - np.atleast_1d(np.asarray(g(0.0), dtype=float))
        if np.abs(res).max(initial=0.0) > _COMPAT_TOL * (1.0 + np.abs(Bmat @ system.u0).max(initial=0.0)):
            warns.append(f"initial state incompatible with {label}(0) "
                         f"(residual {np.abs(res).max():.3e})")

    return ValidationReport(tuple(checks), tuple(warns))


# ---------------------------------------------------------------------------
# 1D heat generator (quadratic elements)

@dataclass(frozen=True)
class ManufacturedSolution1D:
    """Space-time solution handle; callables of (x, t), vectorized in x."""

    u: Callable
    u_t: Callable
    u_xx: Callable


DEFAULT_HEAT_SOLUTION = ManufacturedSolution1D(
    u=lambda x, t: (1.0 + x * x) * np.sin(4.0 * t) + x * np.cos(3.0 * t),
    u_t=lambda x, t: 4.0 * (1.0 + x * x) * np.cos(4.0 * t) - 3.0 * x * np.sin(3.0 * t),
    u_xx=lambda x, t: 2.0 * np.sin(4.0 * t) + 0.0 * x,
)

# P2 element matrices on an element of width h:
#   mass = h/30 * EL_MASS,  stiffness = 1/(3h) * EL_STIFF
EL_MASS = np.array([[4.0, 2.0, -1.0], [2.0, 16.0, 2.0], [-1.0, 2.0, 4.0]])
EL_STIFF = np.array([[7.0, -8.0, 1.0], [-8.0, 16.0, -8.0], [1.0, -8.0, 7.0]])

# 3-point Gauss on [0, 1] (exactness 5) for load integrals against P2 shapes.
_GAUSS3_X = np.array([0.5 - np.sqrt(15.0) / 10.0, 0.5, 0.5 + np.sqrt(15.0) / 10.0])
_GAUSS3_W = np.array([5.0, 8.0, 5.0]) / 18.0


def _p2_shapes(xi):
    """Quadratic Lagrange shapes on [0, 1] at nodes 0, 1/2, 1; shape (len(xi), 3)."""
    xi = np.asarray(xi, dtype=float)
    return np.stack(
        [2.0 * xi * xi - 3.0 * xi + 1.0, 4.0 * xi * (1.0 - xi), 2.0 * xi * xi - xi],
        axis=-1,
    )


def build_heat_1d(n_elements: int, solution: Optional[ManufacturedSolution1D] = None) -> ConstrainedSystem:
    """Heat equation u_t - u_xx = f on (0, 1) with Dirichlet data, P2 elements.

    The manufactured ``solution`` must be quadratic in x so its nodal
    interpolant is exact; the builder verifies this by checking that the
    interior semidiscrete residual vanishes and rejects anything else.
    Returns a system with r1 = 0 and B2 selecting the two boundary dofs.
    """
    if n_elements < 2:
        raise ValueError("need at least 2 elements (boundary dofs must be distinct)")
    sol = solution if solution is not None else DEFAULT_HEAT_SOLUTION
    h = 1.0 / n_elements
    m = 2 * n_elements + 1
    x_nodes = np.linspace(0.0, 1.0, m)

    M = np.zeros((m, m))
    A = np.zeros((m, m))
    for e in range(n_elements):
        idx = slice(2 * e, 2 * e + 3)
        M[idx, idx] += (h / 30.0) * EL_MASS
        A[idx, idx] += (1.0 / (3.0 * h)) * EL_STIFF

    shp = _p2_shapes(_GAUSS3_X)  # (3 gauss, 3 shapes)
    x_gauss = x_nodes[:-1:2][:, None] + h * _GAUSS3_X[None, :]  # (n_el, 3)

    def f(t: float) -> np.ndarray:
        vals = sol.u_t(x_gauss, t) - sol.u_xx(x_gauss, t)  # (n_el, 3)
        contrib = h * np.einsum("eg,g,gi->ei", vals, _GAUSS3_W, shp)
        out = np.zeros(m)
        for e in range(n_elements):
            out[2 * e : 2 * e + 3] += contrib[e]
        return out

    B2 = np.zeros((2, m))
    B2[0, 0] = 1.0
    B2[1, m - 1] = 1.0
    lift = B2.T.copy()

    def g2(t: float) -> np.ndarray:
        return np.array([sol.u(0.0, t), sol.u(1.0, t)])

    def exact_u(t: float) -> np.ndarray:
        return sol.u(x_nodes, t)

    u0 = sol.u(x_nodes, 0.0)

    system = ConstrainedSystem(
        M=M, A=A, f=f, u0=u0, B2=B2, g2=g2, lift=lift,
        normU=M + A, exact_u=exact_u, name="heat1d",
    )

    # Reject solutions the P2 space cannot represent exactly: for those the
    # interior rows of M u_t + A u - f do not vanish.
    rng = np.random.default_rng(20240817)
    for t in rng.uniform(0.0, 1.0, size=4):
        res = M @ sol.u_t(x_nodes, t) + A @ sol.u(x_nodes, t) - f(t)
        scale = 1.0 + float(np.abs(f(t)).max(initial=0.0))
        if np.abs(res[1:-1]).max(initial=0.0) > 1e-10 * scale:
            raise ValueError(
                "manufactured solution is not quadratic in space: interior "
                f"residual {np.abs(res[1:-1]).max():.3e} at t = {t:.3f}"
            )
    return system


# ---------------------------------------------------------------------------
# saddle-point DAE generator

_STOKES3_A = np.array([[2.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 2.0]])


def _stokes3_handles():
    def u(t):
        return np.array([np.sin(4.0 * t) * (1.0 + t), np.cos(3.0 * t), np.exp(-t) + t * t])

    def du(t):
        return np.array([4.0 * np.cos(4.0 * t) * (1.0 + t) + np.sin(4.0 * t),
                         -3.0 * np.sin(3.0 * t),
                         -np.exp(-t) + 2.0 * t])

    def p(t):
        return np.array([np.exp(t)])

    return u, du, p


def build_saddle_dae(preset: Optional[str] = None, *,
                     M=None, A=None, B1=None,
                     exact_u=None, exact_du=None, exact_p=None,
                     name: Optional[str] = None) -> ConstrainedSystem:
    """Index-2 saddle DAE  M u' + A u + B1^T p = f,  B1 u = g1  (r2 = 0).

    Either pass ``preset="stokes3"`` or matrices M, A, B1 together with
    manufactured handles (exact_u, exact_du, exact_p); f and g1 are derived
    so the handles solve the system identically.  B1 may be omitted for an
    unconstrained parabolic ODE system.
    """
    if preset is not None:
        if preset != "stokes3":
            raise ValueError(f"unknown preset {preset!r}")
        M = np.eye(3)
        A = _STOKES3_A.copy()
        B1 = np.array([[1.0, 1.0, 1.0]])
        exact_u, exact_du, exact_p = _stokes3_handles()
        name = preset
    if M is None or A is None or exact_u is None or exact_du is None:
        raise ValueError("matrices M, A and handles exact_u, exact_du are required")
    M = np.asarray(M, dtype=float)
    A = np.asarray(A, dtype=float)
    B1 = np.zeros((0, M.shape[0])) if B1 is None else np.asarray(B1, dtype=float)
    r1 = B1.shape[0]
    if r1 > 0:
        sv = svdvals(B1)
        if sv[-1] <= 1e-12 * max(sv[0], 1.0):
            raise ValueError("B1 must have full row rank")
        if exact_p is None:
            raise ValueError("exact_p handle required when B1 is present")

    def f(t: float) -> np.ndarray:
        out = M @ exact_du(t) + A @ exact_u(t)
        if r1 > 0:
            out = out + B1.T @ np.atleast_1d(exact_p(t))
        return out

    g1 = (lambda t: B1 @ exact_u(t)) if r1 > 0 else None

    return ConstrainedSystem(
        M=M, A=A, f=f, u0=np.asarray(exact_u(0.0), dtype=float),
        B1=B1 if r1 > 0 else None, g1=g1,
        normU=M + A, normQ1=np.eye(r1),
        exact_u=exact_u, exact_p=exact_p if r1 > 0 else None,
        name=name or "saddle-dae",
    )


# ---------------------------------------------------------------------------
# JSON ingestion (named data presets only; no expression parsing)

PRESET_FUNCTIONS = {
    "zero": lambda t: 0.0,
    "const1": lambda t: 1.0,
    "t": lambda t: t,
    "tsq": lambda t: t * t,
    "sin4t": lambda t: np.sin(4.0 * t),
    "cos3t": lambda t: np.cos(3.0 * t),
    "exp_t": lambda t: np.exp(t),
    "exp_neg_t": lambda t: np.exp(-t),
}


def _preset_vector_fn(entry, dim: int, field_name: str):
    """Build t -> R^dim from a preset name or a list of per-component names."""
    if entry is None:
        entry = "zero"
    if isinstance(entry, str):
        names = [entry] * dim
    elif isinstance(entry, list) and all(isinstance(s, str) for s in entry):
        names = list(entry)
    else:
        raise ValueError(f"{field_name}: expected a preset name or list of names")
    if len(names) != dim:
        raise ValueError(f"{field_name}: got {len(names)} presets for dimension {dim}")
    try:
        fns = [PRESET_FUNCTIONS[s] for s in names]
    except KeyError as exc:
        raise ValueError(f"{field_name}: unknown preset {exc.args[0]!r} "
                         f"(known: {sorted(PRESET_FUNCTIONS)})") from exc
    return lambda t: np.array([fn(t) for fn in fns], dtype=float)


def load_system(path) -> ConstrainedSystem:
    """Read a ConstrainedSystem from a JSON file.

    Matrices are row-major nested arrays; data functions (f, g1, g2,
    exact_u, exact_p) are named presets from PRESET_FUNCTIONS, either one
    name (broadcast over components) or a list of per-component names.
    """
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    if "M" not in raw or "u0" not in raw:
        raise ValueError("system file must define at least 'M' and 'u0'")
    M = np.asarray(raw["M"], dtype=float)
    m = M.shape[0]
    A = np.asarray(raw.get("A", np.zeros((m, m))), dtype=float)
    u0 = np.asarray(raw["u0"], dtype=float)
    B1 = np.asarray(raw["B1"], dtype=float) if "B1" in raw else None
    B2 = np.asarray(raw["B2"], dtype=float) if "B2" in raw else None
    r1 = 0 if B1 is None else B1.shape[0]
    r2 = 0 if B2 is None else B2.shape[0]
    lift = np.asarray(raw["lift"], dtype=float) if "lift" in raw else None
    if r2 > 0 and lift is None:
        raise ValueError("'lift' is required when B2 is present")
    return ConstrainedSystem(
        M=M, A=A,
        f=_preset_vector_fn(raw.get("f"), m, "f"),
        u0=u0,
        B1=B1, B2=B2,
        g1=_preset_vector_fn(raw.get("g1"), r1, "g1") if r1 > 0 else None,
        g2=_preset_vector_fn(raw.get("g2"), r2, "g2") if r2 > 0 else None,
        lift=lift,
        normU=np.asarray(raw["normU"], dtype=float) if "normU" in raw else None,
        normQ1=np.asarray(raw["normQ1"], dtype=float) if "normQ1" in raw else None,
        exact_u=_preset_vector_fn(raw["exact_u"], m, "exact_u") if "exact_u" in raw else None,
        exact_p=_preset_vector_fn(raw["exact_p"], r1, "exact_p") if "exact_p" in raw else None,
        name=str(raw.get("name", "file")),
    )
