import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dgtime import (
    BrokenFunction,
    SlabPoly,
    TimeMesh,
    build_uniform_mesh,
    dh_form,
    dh_star_form,
    gauss_legendre,
)


# ---------------------------------------------------------------------------
# meshes


def test_uniform_mesh_breakpoints():
    mesh = build_uniform_mesh(1.0, 4)
    assert mesh.N == 4
    assert mesh.T == 1.0
    np.testing.assert_allclose(mesh.breakpoints, [0.0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(mesh.widths, 0.25)


def test_single_slab_mesh():
    mesh = build_uniform_mesh(2.0, 1)
    assert mesh.N == 1
    np.testing.assert_allclose(mesh.breakpoints, [0.0, 2.0])


def test_nonuniform_mesh():
    mesh = TimeMesh(np.array([0.0, 0.25, 0.65, 1.0]))
    np.testing.assert_allclose(mesh.widths, [0.25, 0.4, 0.35])
    assert mesh.T == 1.0


@pytest.mark.parametrize("bad", [
    [0.5, 1.0],                # does not start at 0
    [0.0, 0.5, 0.5, 1.0],      # repeated breakpoint
    [0.0, 0.7, 0.4],           # decreasing
    [0.0],                     # single point
])
def test_mesh_rejects_bad_breakpoints(bad):
    with pytest.raises(ValueError):
        TimeMesh(np.array(bad, dtype=float))


def test_build_uniform_mesh_rejects_bad_args():
    with pytest.raises(ValueError):
        build_uniform_mesh(0.0, 4)
    with pytest.raises(ValueError):
        build_uniform_mesh(1.0, 0)


def test_slab_index_sides():
    mesh = build_uniform_mesh(1.0, 4)
    # interior of slab 1 (0-based 0)
    assert mesh.slab_index(0.1) == 0
    # breakpoints belong to the left slab by default
    assert mesh.slab_index(0.25, side="left") == 0
    assert mesh.slab_index(0.25, side="right") == 1
    assert mesh.slab_index(1.0, side="left") == 3
    assert mesh.slab_index(0.0, side="right") == 0
    with pytest.raises(ValueError):
        mesh.slab_index(0.0, side="left")
    with pytest.raises(ValueError):
        mesh.slab_index(1.0, side="right")
    with pytest.raises(ValueError):
        mesh.slab_index(1.5)
    with pytest.raises(ValueError):
        mesh.slab_index(0.5, side="above")


# ---------------------------------------------------------------------------
# quadrature


def test_gauss_legendre_one_point_is_midpoint():
    quad = gauss_legendre(1)
    np.testing.assert_allclose(quad.nodes, [0.5])
    np.testing.assert_allclose(quad.weights, [1.0])
    assert quad.exactness_degree == 1


def test_gauss_legendre_two_point():
    quad = gauss_legendre(2)
    x = np.sqrt(3.0) / 6.0
    np.testing.assert_allclose(np.sort(quad.nodes), [0.5 - x, 0.5 + x], atol=1e-15)
    np.testing.assert_allclose(quad.weights, [0.5, 0.5])
    assert quad.exactness_degree == 3


@pytest.mark.parametrize("n", [0, 17, -3])
def test_gauss_legendre_point_count_range(n):
    with pytest.raises(ValueError):
        gauss_legendre(n)


@settings(deadline=None)
@given(n=st.integers(1, 16), data=st.data())
def test_gauss_legendre_monomial_exactness(n, data):
    quad = gauss_legendre(n)
    p = data.draw(st.integers(0, quad.exactness_degree))
    approx = float(np.sum(quad.weights * quad.nodes**p))
    exact = 1.0 / (p + 1)  # int_0^1 t^p dt
    assert abs(approx - exact) <= 1e-13 * (1.0 + abs(exact))


def test_quadrature_weights_must_be_positive():
    from dgtime import Quadrature

    with pytest.raises(ValueError):
        Quadrature(np.array([0.25, 0.75]), np.array([0.5, -0.5]), 1)
    with pytest.raises(ValueError):
        Quadrature(np.array([0.5]), np.array([0.5, 0.5]), 1)


# ---------------------------------------------------------------------------
# slab polynomials in the shifted Legendre basis


def test_slab_basis_is_orthogonal_with_mass_k_over_2jp1():
    a, b = 0.3, 0.7
    k = b - a
    q = 5
    quad = gauss_legendre(8)
    ts = a + k * quad.nodes
    for i in range(q):
        ci = np.zeros((q, 1)); ci[i, 0] = 1.0
        pi = SlabPoly(a, b, ci)
        for j in range(q):
            cj = np.zeros((q, 1)); cj[j, 0] = 1.0
            pj = SlabPoly(a, b, cj)
            val = k * np.sum(quad.weights * pi.eval_many(ts)[0] * pj.eval_many(ts)[0])
            expected = k / (2 * j + 1) if i == j else 0.0
            assert abs(val - expected) < 1e-14


def test_slab_endpoint_values():
    # phi_j(b) = 1 and phi_j(a+) = (-1)^j, so the coefficient sums give the
    # one-sided endpoint values directly.
    coeffs = np.array([[1.0, 2.0], [0.5, -1.0], [0.25, 3.0]])
    s = SlabPoly(0.0, 0.5, coeffs)
    np.testing.assert_allclose(s.value_end(), coeffs.sum(axis=0))
    np.testing.assert_allclose(s.value_start(), coeffs[0] - coeffs[1] + coeffs[2])
    np.testing.assert_allclose(s(0.5), s.value_end(), atol=1e-15)


def test_slab_derivative_matches_difference_quotient():
    rng = np.random.default_rng(7)
    s = SlabPoly(0.2, 0.9, rng.standard_normal((4, 2)))
    ds = s.derivative()
    t, h = 0.55, 1e-6
    fd = (s(t + h) - s(t - h)) / (2 * h)
    np.testing.assert_allclose(ds(t), fd, rtol=1e-8, atol=1e-8)


def test_slab_constant_derivative_is_zero():
    s = SlabPoly(0.0, 1.0, np.array([[3.0]]))
    np.testing.assert_array_equal(s.derivative().coeffs, 0.0)


def test_slab_rejects_degenerate_interval():
    with pytest.raises(ValueError):
        SlabPoly(1.0, 1.0, np.ones((2, 1)))


# ---------------------------------------------------------------------------
# broken functions


def _constant_broken(mesh, value, q=2):
    coeffs = np.zeros((mesh.N, q, np.size(value)))
    coeffs[:, 0, :] = np.asarray(value, dtype=float)
    return BrokenFunction(mesh, coeffs)


def test_eval_sides_constant_function():
    mesh = build_uniform_mesh(1.0, 2)
    F = _constant_broken(mesh, [3.0])
    assert F.eval(0.5) == pytest.approx(3.0)
    assert F.eval(0.5, side="right") == pytest.approx(3.0)
    np.testing.assert_allclose(F.jump(1), [0.0], atol=1e-15)


def test_eval_sides_two_slab_step():
    # 1 on (0, 0.5], 0 on (0.5, 1]: breakpoint evaluation defaults to the
    # left slab, the right limit must be requested explicitly.
    mesh = build_uniform_mesh(1.0, 2)
    coeffs = np.zeros((2, 2, 1))
    coeffs[0, 0, 0] = 1.0
    F = BrokenFunction(mesh, coeffs)
    assert F.eval(0.5) == pytest.approx(1.0)
    assert F.eval(0.5, side="right") == pytest.approx(0.0)
    np.testing.assert_allclose(F.jump(1), [-1.0], atol=1e-15)
    np.testing.assert_allclose(F.node_value(1), [1.0])
    np.testing.assert_allclose(F.node_value(2), [0.0])


def test_continuous_broken_function_has_zero_jumps():
    # F(t) = t is continuous; on each slab t = midpoint + (k/2) * phi_1.
    mesh = build_uniform_mesh(1.0, 4)
    coeffs = np.zeros((4, 2, 1))
    for n in range(4):
        a, b = mesh.breakpoints[n], mesh.breakpoints[n + 1]
        coeffs[n, 0, 0] = 0.5 * (a + b)
        coeffs[n, 1, 0] = 0.5 * (b - a)
    F = BrokenFunction(mesh, coeffs)
    for n in range(1, 4):
        np.testing.assert_allclose(F.jump(n), [0.0], atol=1e-15)
    assert F.eval(0.3)[0] == pytest.approx(0.3)
    assert F.eval(0.75, side="right")[0] == pytest.approx(0.75)
    np.testing.assert_allclose(F.initial_value(), [0.0], atol=1e-15)


def test_constructed_jump_value():
    mesh = build_uniform_mesh(1.0, 2)
    coeffs = np.zeros((2, 2, 1))
    coeffs[0, 0, 0] = 1.0   # left slab ends at 1.0
    coeffs[1, 0, 0] = 1.3   # right slab starts at 1.3
    F = BrokenFunction(mesh, coeffs)
    np.testing.assert_allclose(F.jump(1), [0.3])
    with pytest.raises(ValueError):
        F.jump(0)
    with pytest.raises(ValueError):
        F.jump(2)


def test_node_value_range_checked():
    mesh = build_uniform_mesh(1.0, 3)
    F = _constant_broken(mesh, [1.0])
    with pytest.raises(ValueError):
        F.node_value(0)
    with pytest.raises(ValueError):
        F.node_value(4)


def test_from_slabs_checks_intervals():
    mesh = build_uniform_mesh(1.0, 2)
    good = [SlabPoly(0.0, 0.5, np.ones((1, 1))), SlabPoly(0.5, 1.0, np.ones((1, 1)))]
    F = BrokenFunction.from_slabs(mesh, good)
    assert F.coeffs.shape == (2, 1, 1)
    bad = [SlabPoly(0.0, 0.4, np.ones((1, 1))), SlabPoly(0.4, 1.0, np.ones((1, 1)))]
    with pytest.raises(ValueError):
        BrokenFunction.from_slabs(mesh, bad)


def test_subtraction_pads_mixed_degrees():
    mesh = build_uniform_mesh(1.0, 2)
    lo = _constant_broken(mesh, [2.0], q=1)
    hi = _constant_broken(mesh, [0.5], q=3)
    diff = lo - hi
    assert diff.degree == 2
    assert diff.eval(0.7)[0] == pytest.approx(1.5)
    total = 2.0 * hi + lo
    assert total.eval(0.2)[0] == pytest.approx(3.0)


def test_mismatched_meshes_rejected():
    A = _constant_broken(build_uniform_mesh(1.0, 2), [1.0])
    B = _constant_broken(build_uniform_mesh(1.0, 3), [1.0])
    with pytest.raises(ValueError):
        dh_form(A, B, 1.0, gauss_legendre(2))
    with pytest.raises(ValueError):
        A - B


# ---------------------------------------------------------------------------
# DG time-derivative forms


def test_dh_form_on_constants():
    # For constants the integrals and interior jumps vanish and only the
    # initial term (Y(0+), X(0+)) survives: D(c, d) = c * d.
    mesh = build_uniform_mesh(1.0, 3)
    quad = gauss_legendre(3)
    Y = _constant_broken(mesh, [2.0])
    X = _constant_broken(mesh, [-3.0])
    assert dh_form(Y, X, 1.0, quad) == pytest.approx(-6.0, abs=1e-14)
    assert dh_star_form(Y, X, 1.0, quad) == pytest.approx(6.0, abs=1e-14)


def test_dh_form_step_function_self():
    # Y = 1 on (0, 0.5], 0 on (0.5, 1]: D(Y, Y) = (Y(0+))^2 + [Y]^1 Y(0.5+)
    # = 1 + (-1) * 0 = 1.
    mesh = build_uniform_mesh(1.0, 2)
    coeffs = np.zeros((2, 2, 1))
    coeffs[0, 0, 0] = 1.0
    Y = BrokenFunction(mesh, coeffs)
    assert dh_form(Y, Y, 1.0, gauss_legendre(3)) == pytest.approx(1.0, abs=1e-14)


def test_dh_form_continuous_ramp_reduces_to_integral():
    # Y(t) = t is continuous with Y(0+) = 0, so D(Y, X) = sum_n int Y' X.
    mesh = build_uniform_mesh(1.0, 4)
    quad = gauss_legendre(4)
    coeffs = np.zeros((4, 2, 1))
    for n in range(4):
        a, b = mesh.breakpoints[n], mesh.breakpoints[n + 1]
        coeffs[n, 0, 0] = 0.5 * (a + b)
        coeffs[n, 1, 0] = 0.5 * (b - a)
    Y = BrokenFunction(mesh, coeffs)
    X = _constant_broken(mesh, [5.0])
    # int_0^1 1 * 5 dt = 5
    assert dh_form(Y, X, 1.0, quad) == pytest.approx(5.0, abs=1e-13)


def test_dh_form_weighted_by_matrix():
    mesh = build_uniform_mesh(1.0, 2)
    M = np.array([[2.0, 1.0], [1.0, 3.0]])
    Y = _constant_broken(mesh, [1.0, 0.0])
    X = _constant_broken(mesh, [0.0, 1.0])
    # only the initial term: e_1^T M e_2 = 1
    assert dh_form(Y, X, M, gauss_legendre(2)) == pytest.approx(1.0, abs=1e-14)


@settings(deadline=None, max_examples=60)
@given(
    seed=st.integers(0, 2**32 - 1),
    N=st.integers(1, 6),
    q=st.integers(1, 4),
    d=st.integers(1, 3),
)
def test_dh_antisymmetry_and_coercivity(seed, N, q, d):
    rng = np.random.default_rng(seed)
    mesh = build_uniform_mesh(float(rng.uniform(0.5, 2.0)), N)
    Y = BrokenFunction(mesh, rng.standard_normal((N, q, d)))
    X = BrokenFunction(mesh, rng.standard_normal((N, q, d)))
    R = rng.standard_normal((d, d))
    M = R @ R.T + d * np.eye(d)  # SPD weight
    quad = gauss_legendre(q + 1)

    a = dh_form(Y, X, M, quad)
    b = dh_star_form(Y, X, M, quad)
    scale = 1.0 + abs(a) + abs(b)
    assert abs(a + b) <= 1e-12 * scale

    yN = Y.node_value(N)
    lower = 0.5 * float(yN @ M @ yN)
    quad_self = dh_form(Y, Y, M, quad)
    assert quad_self >= lower - 1e-12 * (1.0 + abs(quad_self) + lower)
