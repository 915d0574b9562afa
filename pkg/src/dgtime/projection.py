"""Constraint-data projection: right-endpoint interpolation plus moment matching.

On a single slab (a, b] the degree-(q-1) projection Pi(phi) is defined by
the two condition sets

    (Pi phi)(b) = phi(b),
    int_a^b (Pi phi - phi) psi dt = 0     for every psi of degree <= q - 2;

for q = 1 only the endpoint condition remains.  Applied slab by slab, this
projects time-continuous data onto the broken polynomial space while
*interpolating at every breakpoint* — the property that preserves nodal
superconvergence and the optimal multiplier rate when constraint data
enters a DG time discretization.  (The plain L2 projection matches one
more moment instead of the endpoint and loses both.)

In the shifted Legendre basis the moment conditions decouple,

    c_i = (2 i + 1) / (b - a) * int_a^b phi(t) phi_i(t) dt,   i <= q - 2,

and the endpoint condition fixes the last coefficient via phi_j(b) = 1:

    c_{q-1} = phi(b) - sum_{i < q-1} c_i.

Moment integrals of non-polynomial data are computed with the quadrature
carried by :class:`ProjectionSpec`; all stated identities are exact (up to
rounding) whenever the rule integrates phi * psi exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import legendre as npleg

from .timecore import BrokenFunction, Quadrature, SlabPoly, TimeMesh

__all__ = ["ProjectionSpec", "project_slab", "project_broken"]


@dataclass(frozen=True, eq=False)
class ProjectionSpec:
    """Degree q and moment quadrature for the slab projection."""

    q: int
    quadrature: Quadrature

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.quadrature.exactness_degree < 2 * self.q - 2:
            raise ValueError(
                "moment quadrature must be exact to degree >= 2q - 2 "
                f"(got {self.quadrature.exactness_degree} for q = {self.q})"
            )


def _eval_vector(phi, t: float) -> np.ndarray:
    v = np.atleast_1d(np.asarray(phi(t), dtype=float))
    if v.ndim != 1:
        raise ValueError("data function must return a scalar or 1-D vector")
    return v


def project_slab(phi, interval, spec: ProjectionSpec) -> SlabPoly:
    """Project a scalar- or vector-valued function onto one slab.

    Parameters
    ----------
    phi : callable
        t -> scalar or (d,) array; evaluated at the right endpoint and at
        the quadrature nodes mapped into (a, b).
    interval : (a, b) pair with b > a.
    spec : ProjectionSpec
    """
    a, b = float(interval[0]), float(interval[1])
    if not b > a:
        raise ValueError("interval must satisfy b > a")
    q = spec.q
    end = _eval_vector(phi, b)
    d = end.shape[0]
    coeffs = np.zeros((q, d))
    if q > 1:
        quad = spec.quadrature
        ts = a + (b - a) * quad.nodes
        vals = np.stack([_eval_vector(phi, t) for t in ts])  # (npts, d)
        # P_0..P_{q-2} at the mapped nodes; rows phi_i(t) for the moments.
        V = npleg.legvander(2.0 * quad.nodes - 1.0, q - 2)  # (npts, q-1)
        moments = (b - a) * V.T @ (quad.weights[:, None] * vals)  # (q-1, d)
        coeffs[: q - 1] = ((2.0 * np.arange(q - 1) + 1.0) / (b - a))[:, None] * moments
    coeffs[q - 1] = end - coeffs[: q - 1].sum(axis=0)
    return SlabPoly(a, b, coeffs)


def project_broken(phi, mesh: TimeMesh, dim: int, spec: ProjectionSpec) -> BrokenFunction:
    """Slab-by-slab projection of phi over the whole mesh.

    The result interpolates phi at every breakpoint t_n, n >= 1.  phi must
    be evaluable at the breakpoints and at interior quadrature nodes; data
    with (removable) breakpoint discontinuities is read as its limit from
    within each slab.
    """
    bp = mesh.breakpoints
    out = np.empty((mesh.N, spec.q, dim))
    for n in range(mesh.N):
        p = project_slab(phi, (bp[n], bp[n + 1]), spec)
        if p.dim != dim:
            raise ValueError(f"data dimension {p.dim} does not match dim={dim}")
        out[n] = p.coeffs
    return BrokenFunction(mesh, out)
