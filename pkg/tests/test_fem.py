import numpy as np
import pytest

from shiftpore import fem, geometry, mesh
from shiftpore.errors import UsageError


def test_q1_nodal_interpolation():
    N, _ = fem.eval_basis(fem.Q1, (-1.0, -1.0))
    np.testing.assert_array_equal(N, [1, 0, 0, 0])
    for a, c in enumerate(fem.CORNERS):
        N, _ = fem.eval_basis(fem.Q1, c)
        np.testing.assert_array_equal(N, np.eye(4)[a])


def test_bubble_values():
    N, _ = fem.eval_basis(fem.Q1_BUBBLE, (0.0, 0.0))
    assert N[4] == 1.0
    for eta in np.linspace(-1, 1, 7):
        for pt in ((1.0, eta), (-1.0, eta), (eta, 1.0), (eta, -1.0)):
            assert abs(fem.eval_basis(fem.Q1_BUBBLE, pt)[0][4]) < 1e-14


def test_q1_gradient_at_center():
    _, dN = fem.eval_basis(fem.Q1, (0.0, 0.0))
    np.testing.assert_allclose(dN[0], [-0.25, -0.25], atol=1e-16)


def test_reference_derivatives_match_finite_differences():
    rng = np.random.default_rng(1)
    P = rng.uniform(-0.9, 0.9, size=(10, 2))
    N, dN, d2N = fem.basis_tables(fem.Q1_BUBBLE, P)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        Np, dNp, _ = fem.basis_tables(fem.Q1_BUBBLE, P + e)
        Nm, dNm, _ = fem.basis_tables(fem.Q1_BUBBLE, P - e)
        np.testing.assert_allclose((Np - Nm) / (2 * h), dN[..., j], atol=1e-8)
        np.testing.assert_allclose((dNp - dNm) / (2 * h), d2N[..., j], atol=1e-7)


def test_bilinear_reproduction_and_linear_gradient():
    rm = fem.rect_map(np.array([[0.2, -0.1], [0.5, -0.1], [0.5, 0.3], [0.2, 0.3]]))
    corners = rm.to_physical(fem.CORNERS)
    f = lambda x: 1.0 + 2.0 * x[..., 0] - 3.0 * x[..., 1] + 0.5 * x[..., 0] * x[..., 1]
    pts, _ = fem.tensor_rule(3)
    N, dN, d2N = fem.basis_tables(fem.Q1, pts)
    X = rm.to_physical(pts)
    assert np.abs(N @ f(corners) - f(X)).max() < 1e-13
    g, _ = fem.physical_derivatives(dN, d2N, rm)
    lin = 2.0 * corners[:, 0] - 3.0 * corners[:, 1]
    np.testing.assert_allclose(np.einsum("qaj,a->qj", g, lin), np.tile([2.0, -3.0], (9, 1)), atol=1e-13)


def test_tensor_rule_integrates_bubble_products():
    pts, w = fem.tensor_rule(3)
    N, _, _ = fem.basis_tables(fem.Q1_BUBBLE, pts)
    # int (1-x^2)^2 (1-y^2)^2 over the square = (16/15)^2
    assert w @ N[:, 4] ** 2 == pytest.approx((16 / 15) ** 2, rel=1e-14)


def test_rect_map_rejects_bad_elements():
    with pytest.raises(Exception):
        fem.rect_map(np.array([[0, 0], [1, 0], [1.2, 1], [0, 1]], dtype=float))


def test_dof_counts_uncracked():
    g = mesh.build_grid(2)
    sm = mesh.split_along(g, [])
    dm = fem.build_dof_map(sm, "weak")
    assert dm.n_p == 9 and dm.n_u == 18 + 8 and dm.n_lambda == 0


def test_dof_counts_strong_embedded():
    g = mesh.build_grid(10)
    sg = mesh.select_surrogate(g, geometry.polyline([[-0.26, 0.01], [0.16, 0.01]]))
    sm = mesh.split_along(g, [sg])
    assert fem.build_dof_map(sm, "strong").n_lambda == 36
    assert fem.build_dof_map(sm, "weak").n_lambda == 0


def test_dof_numbering_blocks():
    g = mesh.build_grid(10)
    sg = mesh.select_surrogate(g, geometry.polyline([[-0.26, 0.01], [0.16, 0.01]]))
    sm = mesh.split_along(g, [sg])
    dm = fem.build_dof_map(sm, "strong")
    P = dm.n_path_nodes
    idx = np.arange(P)
    blocks = [dm.lambda_q(idx, 1), dm.lambda_q(idx, -1),
              dm.lambda_t(idx, 1, 0), dm.lambda_t(idx, 1, 1), dm.lambda_t(idx, -1, 0), dm.lambda_t(idx, -1, 1)]
    allv = np.sort(np.concatenate(blocks))
    np.testing.assert_array_equal(allv, np.arange(dm.n_z, dm.n_total))
    assert dm.lambda_q(0, 1) < dm.lambda_q(0, -1) < dm.lambda_t(0, 1, 0) < dm.lambda_t(0, -1, 0)
    d = dm.element_u_dofs(sm.quads[3], 3)
    assert d[0] == dm.u_dofs(sm.quads[3][0], 0) and d[1] == d[0] + 1
    assert d[8] == dm.bubble_offset + 6
    np.testing.assert_array_equal(dm.all_element_u_dofs(sm.quads)[3], d)
    with pytest.raises(UsageError):
        fem.build_dof_map(sm, "weak").lambda_q(0, 1)
    with pytest.raises(UsageError):
        fem.build_dof_map(sm, "mixed")
