"""Time slabs, Gauss quadrature, and broken piecewise-polynomial functions.

The interval (0, T] is partitioned into slabs I_n = (t_{n-1}, t_n],
n = 1..N.  A "broken" function is a polynomial of degree q-1 on every slab
and may jump at the breakpoints; slabs are right-closed, so evaluation at a
breakpoint returns the value of the left slab unless the right limit is
requested explicitly.

Each slab carries the shifted Legendre basis

    phi_j(t) = P_j(2 (t - t_{n-1}) / k_n - 1),   j = 0, ..., q-1,

with P_j the Legendre polynomial on [-1, 1].  The basis is orthogonal on
the slab,

    int_{I_n} phi_i phi_j dt = delta_ij * k_n / (2 j + 1),

and satisfies phi_j(t_n) = 1 and phi_j(t_{n-1}+) = (-1)^j, which makes
terminal values, upwind jumps, and the weak time-derivative forms cheap.

``dh_form`` / ``dh_star_form`` are the DG time-derivative bilinear forms

    D (Y, X) = sum_n int_{I_n} (Y', X)_M + sum_{n=1}^{N-1} ([Y]^n, X^n_+)_M
               + (Y^0_+, X^0_+)_M,
    D*(Y, X) = sum_n int_{I_n} (Y, X')_M + sum_{n=1}^{N-1} (Y^n, [X]^n)_M
               - (Y^N, X^N)_M,

where [U]^n = U^n_+ - U^n is the jump at t_n and (.,.)_M the M-weighted
inner product.  For all broken Y, X: D(Y, X) = -D*(Y, X), and
D(Y, Y) >= 0.5 * ||Y^N||_M^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg

__all__ = [
    "TimeMesh",
    "Quadrature",
    "SlabPoly",
    "BrokenFunction",
    "build_uniform_mesh",
    "gauss_legendre",
    "dh_form",
    "dh_star_form",
]


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeMesh:
    """Partition 0 = t_0 < t_1 < ... < t_N = T into slabs I_n = (t_{n-1}, t_n]."""

    breakpoints: np.ndarray

    def __post_init__(self):
        bp = _readonly(self.breakpoints)
        if bp.ndim != 1 or bp.size < 2:
            raise ValueError("mesh needs at least two breakpoints")
        if bp[0] != 0.0:
            raise ValueError("time mesh must start at t = 0")
        if not np.all(np.diff(bp) > 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", bp)

    @property
    def N(self) -> int:
        return self.breakpoints.size - 1

    @property
    def T(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def slab_index(self, t: float, side: str = "left") -> int:
        """0-based index of the slab providing the one-sided limit at t.

        ``side="left"`` returns the slab with t as its (half-open) right
        part, i.e. the limit from below; ``side="right"`` the limit from
        above.  At interior breakpoints the two differ.
        """
        bp = self.breakpoints
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        if t < bp[0] or t > bp[-1]:
            raise ValueError(f"t = {t} outside [0, {self.T}]")
        if side == "left":
            if t <= bp[0]:
                raise ValueError("left limit undefined at t = 0")
            return int(np.searchsorted(bp, t, side="left")) - 1
        if t >= bp[-1]:
            raise ValueError("right limit undefined at t = T")
        return int(np.searchsorted(bp, t, side="right")) - 1


def build_uniform_mesh(T: float, N: int) -> TimeMesh:
    """Uniform mesh of N slabs on (0, T]."""
    if not T > 0.0:
        raise ValueError("final time T must be positive")
    if N < 1:
        raise ValueError("slab count N must be >= 1")
    return TimeMesh(np.linspace(0.0, float(T), int(N) + 1))


@dataclass(frozen=True, eq=False)
class Quadrature:
    """Quadrature rule on the reference interval [0, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __post_init__(self):
        nodes = _readonly(self.nodes)
        weights = _readonly(self.weights)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-D of equal length")
        if np.any(weights <= 0.0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def npoints(self) -> int:
        return self.nodes.size


def gauss_legendre(n: int) -> Quadrature:
    """n-point Gauss-Legendre rule on [0, 1]; exact up to degree 2n - 1."""
    if not 1 <= n <= 16:
        raise ValueError(f"point count must be in 1..16, got {n}")
    x, w = npleg.leggauss(n)
    return Quadrature((x + 1.0) / 2.0, w / 2.0, 2 * n - 1)


@dataclass(frozen=True, eq=False)
class SlabPoly:
    """Polynomial on one slab (a, b] in the shifted Legendre basis.

    ``coeffs`` has shape (q, d): q modal coefficients of a d-vector-valued
    polynomial of degree q - 1.
    """

    a: float
    b: float
    coeffs: np.ndarray

    def __post_init__(self):
        if not self.b > self.a:
            raise ValueError("slab must have positive width")
        c = _readonly(self.coeffs)
        if c.ndim != 2 or c.shape[0] < 1:
            raise ValueError("coeffs must have shape (q, d) with q >= 1")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @property
    def width(self) -> float:
        return self.b - self.a

    def _x(self, t):
        return 2.0 * (np.asarray(t, dtype=float) - self.a) / (self.b - self.a) - 1.0

    def __call__(self, t: float) -> np.ndarray:
        """Value at a single time t, shape (d,)."""
        return np.atleast_1d(npleg.legval(self._x(t), self.coeffs))

    def eval_many(self, ts) -> np.ndarray:
        """Values at an array of times, shape (d, len(ts))."""
        return npleg.legval(self._x(ts), self.coeffs)

    def derivative(self) -> "SlabPoly":
        if self.coeffs.shape[0] == 1:
            return SlabPoly(self.a, self.b, np.zeros_like(self.coeffs))
        c = npleg.legder(self.coeffs, axis=0) * (2.0 / (self.b - self.a))
        return SlabPoly(self.a, self.b, c)

    def value_start(self) -> np.ndarray:
        """Right limit at the left endpoint a (inside the slab)."""
        e = (-1.0) ** np.arange(self.coeffs.shape[0])
        return e @ self.coeffs

    def value_end(self) -> np.ndarray:
        """Value at the right endpoint b."""
        return self.coeffs.sum(axis=0)


@dataclass(frozen=True, eq=False)
class BrokenFunction:
    """Piecewise polynomial over a time mesh, discontinuous at breakpoints.

    ``coeffs`` has shape (N, q, d): per slab, q shifted-Legendre modal
    coefficients of a d-vector-valued polynomial.
    """

    mesh: TimeMesh
    coeffs: np.ndarray

    def __post_init__(self):
        c = _readonly(self.coeffs)
        if c.ndim != 3:
            raise ValueError("coeffs must have shape (N, q, d)")
        if c.shape[0] != self.mesh.N:
            raise ValueError(
                f"coefficient array has {c.shape[0]} slabs, mesh has {self.mesh.N}"
            )
        if c.shape[1] < 1 or c.shape[2] < 1:
            raise ValueError("need q >= 1 coefficients and dim >= 1")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_slabs(cls, mesh: TimeMesh, slabs) -> "BrokenFunction":
        slabs = list(slabs)
        if len(slabs) != mesh.N:
            raise ValueError("one SlabPoly per slab required")
        for n, s in enumerate(slabs):
            if not (np.isclose(s.a, mesh.breakpoints[n]) and np.isclose(s.b, mesh.breakpoints[n + 1])):
                raise ValueError(f"slab {n} interval does not match the mesh")
        return cls(mesh, np.stack([s.coeffs for s in slabs]))

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @property
    def dim(self) -> int:
        return self.coeffs.shape[2]

    @property
    def slabs(self) -> tuple:
        return tuple(self.slab(n) for n in range(self.mesh.N))

    def slab(self, n: int) -> SlabPoly:
        bp = self.mesh.breakpoints
        return SlabPoly(float(bp[n]), float(bp[n + 1]), self.coeffs[n])

    def eval(self, t: float, side: str = "left") -> np.ndarray:
        """One-sided value at t; breakpoints default to the left slab."""
        return self.slab(self.mesh.slab_index(t, side))(t)

    def jump(self, n: int) -> np.ndarray:
        """Jump [U]^n = U(t_n+) - U(t_n) at the interior breakpoint t_n."""
        if not 1 <= n <= self.mesh.N - 1:
            raise ValueError(f"jump index must be in 1..{self.mesh.N - 1}, got {n}")
        e = (-1.0) ** np.arange(self.coeffs.shape[1])
        return e @ self.coeffs[n] - self.coeffs[n - 1].sum(axis=0)

    def node_value(self, n: int) -> np.ndarray:
        """Terminal value U^n = U|_{I_n}(t_n) for n = 1..N."""
        if not 1 <= n <= self.mesh.N:
            raise ValueError(f"node index must be in 1..{self.mesh.N}, got {n}")
        return self.coeffs[n - 1].sum(axis=0)

    def initial_value(self) -> np.ndarray:
        """Right limit U(0+)."""
        e = (-1.0) ** np.arange(self.coeffs.shape[1])
        return e @ self.coeffs[0]

    def _pad_to(self, q: int) -> np.ndarray:
        c = self.coeffs
        if c.shape[1] == q:
            return c
        out = np.zeros((c.shape[0], q, c.shape[2]))
        out[:, : c.shape[1], :] = c
        return out

    def __sub__(self, other: "BrokenFunction") -> "BrokenFunction":
        _check_same_domain(self, other)
        q = max(self.coeffs.shape[1], other.coeffs.shape[1])
        return BrokenFunction(self.mesh, self._pad_to(q) - other._pad_to(q))

    def __add__(self, other: "BrokenFunction") -> "BrokenFunction":
        _check_same_domain(self, other)
        q = max(self.coeffs.shape[1], other.coeffs.shape[1])
        return BrokenFunction(self.mesh, self._pad_to(q) + other._pad_to(q))

    def __rmul__(self, s: float) -> "BrokenFunction":
        return BrokenFunction(self.mesh, float(s) * self.coeffs)


def _check_same_domain(Y: BrokenFunction, X: BrokenFunction):
    if not np.array_equal(Y.mesh.breakpoints, X.mesh.breakpoints):
        raise ValueError("broken functions live on different meshes")
    if Y.dim != X.dim:
        raise ValueError(f"dimension mismatch: {Y.dim} vs {X.dim}")


def _weight_matrix(M, dim: int) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 0:
        return float(M) * np.eye(dim)
    if M.shape != (dim, dim):
        raise ValueError(f"weight matrix must be {dim}x{dim}, got {M.shape}")
    return M


def dh_form(Y: BrokenFunction, X: BrokenFunction, M, quad: Quadrature) -> float:
    """DG time-derivative form D(Y, X) with M-weighted inner products.

    Slab integrals use ``quad``; the rule must be exact for degree
    deg(Y) + deg(X) - 1 to realize the polynomial identities exactly.
    """
    _check_same_domain(Y, X)
    M = _weight_matrix(M, Y.dim)
    bp = Y.mesh.breakpoints
    total = 0.0
    for n in range(Y.mesh.N):
        sy, sx = Y.slab(n), X.slab(n)
        ts = sy.a + sy.width * quad.nodes
        dy = sy.derivative().eval_many(ts)
        xv = sx.eval_many(ts)
        total += sy.width * np.einsum("an,ab,bn,n->", dy, M, xv, quad.weights)
    for n in range(1, Y.mesh.N):
        total += Y.jump(n) @ M @ X.eval(bp[n], side="right")
    total += Y.initial_value() @ M @ X.initial_value()
    return float(total)


def dh_star_form(Y: BrokenFunction, X: BrokenFunction, M, quad: Quadrature) -> float:
    """Adjoint form D*(Y, X); satisfies dh_form(Y, X) = -dh_star_form(Y, X)."""
    _check_same_domain(Y, X)
    M = _weight_matrix(M, Y.dim)
    total = 0.0
    for n in range(Y.mesh.N):
        sy, sx = Y.slab(n), X.slab(n)
        ts = sy.a + sy.width * quad.nodes
        yv = sy.eval_many(ts)
        dx = sx.derivative().eval_many(ts)
        total += sy.width * np.einsum("an,ab,bn,n->", yv, M, dx, quad.weights)
    for n in range(1, Y.mesh.N):
        total += Y.node_value(n) @ M @ X.jump(n)
    total -= Y.node_value(Y.mesh.N) @ M @ X.node_value(X.mesh.N)
    return float(total)
