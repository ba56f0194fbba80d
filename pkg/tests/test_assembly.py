import math

import numpy as np
import pytest
import scipy.sparse as sp

from oracle import Problem
from shiftpore import assembly, fem, geometry, mesh, physics
from shiftpore.errors import AssemblyError, UsageError
from shiftpore.harness import builtin_case
from shiftpore.harness.run import discretize

MAT = physics.BENCHMARK_MATERIAL
UNITMAT = physics.MaterialParams(G=1.0, nu=0.25, alpha=0.5, beta=1.0, gamma=1.0)
LAW = physics.InterfaceLaw(T_n=5.0, k_n=1e8, k_t=2e7, h_n=3.0, h_t=1.5)


def welded(n, domain=((-0.5, 0.5), (-0.5, 0.5))):
    sm = mesh.split_along(mesh.build_grid(n, domain), [])
    return sm, fem.build_dof_map(sm, "weak")


def horizontal(n):
    g = mesh.build_grid(n)
    sg = mesh.select_surrogate(g, geometry.segment((0.0, 0.0), 1.0, 0.0))
    sm = mesh.split_along(g, [sg])
    return sm, [mesh.shift_data(sg, g)]


def node_at(sm, x, y):
    return int(np.nonzero(np.all(np.abs(sm.nodes - (x, y)) < 1e-12, axis=1))[0][0])


def dense(A):
    return np.zeros((0, 0)) if A is None else A.toarray()


@pytest.mark.parametrize("name", ["angled_embedded", "offset"])
def test_blocks_match_brute_force(name):
    spec = builtin_case(name, 3)
    d = discretize(spec)
    dm = fem.build_dof_map(d.split, "strong")
    laws = [LAW] * len(d.shifts)
    ref = Problem(d.split, dm, MAT)
    want = {**ref.bulk(), **ref.interface(d.shifts, laws, True), **ref.coupling(d.shifts)}
    got = {**assembly.assemble_bulk(d.split, dm, MAT),
           **assembly.assemble_interface_weak(d.split, d.shifts, laws, dm, MAT, True),
           **assembly.assemble_coupling(d.split, d.shifts, dm)}
    for k, R in want.items():
        A = got[k].toarray()
        assert np.abs(A - R).max() <= 1e-12 * max(np.abs(R).max(), 1e-300), k


def test_unit_square_mass_and_stiffness():
    sm, dm = welded(2, ((0.0, 2.0), (0.0, 2.0)))
    B = assembly.assemble_bulk(sm, dm, UNITMAT)
    a, b, c = node_at(sm, 0, 0), node_at(sm, 1, 0), node_at(sm, 1, 1)
    M, K = B["M_p"].toarray(), B["K_p"].toarray()
    assert M[a, a] == pytest.approx(4 / 36) and M[a, b] == pytest.approx(2 / 36) and M[a, c] == pytest.approx(1 / 36)
    assert K[a, a] == pytest.approx(2 / 3) and K[a, c] == pytest.approx(-1 / 3)
    assert M.sum() == pytest.approx(4.0)
    np.testing.assert_allclose(K.sum(axis=1), 0.0, atol=1e-14)


def test_bulk_blocks_symmetric_and_semidefinite():
    sm, dm = welded(3)
    B = assembly.assemble_bulk(sm, dm, MAT)
    for k in ("M_p", "K_p", "K_u"):
        A = B[k].toarray()
        assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()
        ev = np.linalg.eigvalsh(A)
        assert ev.min() >= -1e-10 * ev.max()
    # free elasticity: three rigid modes
    ev = np.linalg.eigvalsh(B["K_u"].toarray())
    assert int(np.sum(ev < 1e-9 * ev.max())) == 3
    # uniform expansion u = x gives C row sums alpha * 2 * area
    u = np.zeros(dm.n_u)
    u[dm.u_dofs(np.arange(sm.n_nodes), 0) - dm.n_p] = sm.nodes[:, 0]
    u[dm.u_dofs(np.arange(sm.n_nodes), 1) - dm.n_p] = sm.nodes[:, 1]
    assert (B["C"] @ u).sum() == pytest.approx(2 * MAT.alpha)


def test_zero_transmissivity_gives_no_flux_block():
    sm, shifts = horizontal(4)
    dm = fem.build_dof_map(sm, "weak")
    out = assembly.assemble_interface_weak(sm, shifts, [physics.InterfaceLaw(k_n=1e8, k_t=1e8)], dm, MAT)
    assert np.abs(dense(out["Kc_p"])).sum() == 0.0
    assert out["Sc_p"] is None


def test_aligned_crack_has_no_mismatch_terms():
    sm, shifts = horizontal(4)
    dm = fem.build_dof_map(sm, "weak")
    out = assembly.assemble_interface_weak(sm, shifts, [LAW], dm, MAT, with_hessian=True)
    for k in ("Rc_p", "Rc_uu", "Rc_up", "Sc_p", "Sc_uu", "Sc_up"):
        assert np.abs(dense(out[k])).max(initial=0.0) < 1e-9, k
    Kc = out["Kc_u"].toarray()
    assert np.abs(Kc - Kc.T).max() <= 1e-12 * np.abs(Kc).max()
    assert np.linalg.eigvalsh(Kc).min() >= -1e-6


def test_coupling_average_term():
    sm, shifts = horizontal(4)
    dm = fem.build_dof_map(sm, "strong")
    Gp = assembly.assemble_coupling(sm, shifts, dm)["G_p"]
    P = dm.n_path_nodes
    lam = np.zeros(dm.n_lambda)
    lam[dm.lambda_q(np.arange(P), 1) - dm.lambda_offset] = 1.0
    lam[dm.lambda_q(np.arange(P), -1) - dm.lambda_offset] = 1.0
    assert np.ones(dm.n_p) @ (Gp @ lam) == pytest.approx(-2.0 * 1.0)
    with pytest.raises(UsageError):
        assembly.assemble_coupling(sm, shifts, fem.build_dof_map(sm, "weak"))


def test_uncracked_interface_blocks_empty():
    sm, dm = welded(3)
    out = assembly.assemble_interface_weak(sm, [], [], dm, MAT)
    assert all(A is None or A.nnz == 0 for A in out.values())


def test_shift_mismatch_rejected():
    sm, shifts = horizontal(4)
    dm = fem.build_dof_map(sm, "weak")
    with pytest.raises(AssemblyError):
        assembly.assemble_interface_weak(sm, [], [LAW], dm, MAT)


def test_source_load_integrates_to_rate():
    sm, dm = welded(40)
    src = physics.SourceTerm((-0.2, 0.1), 0.1, 1e-5)
    f_p, f_u = assembly.assemble_rhs(sm, dm, [src])
    assert f_p.sum() == pytest.approx(1e-5, rel=1e-6)
    assert not f_u.any()
    pair = [src, physics.SourceTerm((0.2, 0.1), 0.1, -1e-5)]
    assert abs(assembly.assemble_rhs(sm, dm, pair)[0].sum()) < 1e-16


def test_dirichlet_smallest_grid():
    sm, dm = welded(2)
    cons = assembly.benchmark_constraints(sm, dm)
    n = dm.n_p + dm.n_u
    Ar, br, free = assembly.apply_dirichlet(sp.identity(n, format="csr"), np.ones(n), cons)
    assert int(np.sum(free < dm.n_p)) == 1
    # u: 3 interior-column nodes times 2 plus 4 bubbles times 2
    assert int(np.sum(free >= dm.n_p)) == 6 + 8
    assert Ar.shape == (free.size, free.size) and br.shape == (free.size,)


def test_dirichlet_constrains_both_copies():
    d = discretize(builtin_case("offset", 10))
    dm = fem.build_dof_map(d.split, "weak")
    cons = assembly.benchmark_constraints(d.split, dm)
    ends = [int(d.surrogates[0].path_nodes[0]), int(d.surrogates[0].path_nodes[-1])]
    for v in ends:
        p, m = d.split.dup_map[v]
        assert p in cons.dofs and m in cons.dofs


def test_dirichlet_lifts_values_and_checks_range():
    A = sp.csr_matrix(np.array([[2.0, -1.0], [-1.0, 2.0]]))
    Ar, br, free = assembly.apply_dirichlet(A, np.zeros(2), assembly.ConstraintSet(np.array([1]), np.array([3.0])))
    assert free.tolist() == [0] and br[0] == 3.0
    with pytest.raises(UsageError):
        assembly.apply_dirichlet(A, None, assembly.ConstraintSet(np.array([5]), np.array([0.0])))
    with pytest.raises(UsageError):
        assembly.ConstraintSet(np.array([1, 1]), np.zeros(2))


def test_compose_system_modes():
    sm, shifts = horizontal(4)
    blocks = assembly.assemble_system(sm, shifts, [LAW], MAT, [], mode="strong")
    E, K, G = assembly.compose_system(blocks, "strong")
    dm = blocks.dofmap
    assert E.shape == K.shape == (dm.n_z, dm.n_z) and G.shape == (dm.n_z, dm.n_lambda)
    Ew, Kw, Gw = assembly.compose_system(assembly.assemble_system(sm, shifts, [LAW], MAT, [], mode="weak"), "weak")
    assert Gw is None and abs(Ew).sum() > abs(E).sum()
    with pytest.raises(UsageError):
        assembly.compose_system(blocks, "both")


def test_triplet_dump(tmp_path):
    A = sp.csr_matrix(np.array([[0.0, 1.5], [2.0, 0.0]]))
    assembly.dump_triplets(tmp_path / "a.txt", A)
    rows = (tmp_path / "a.txt").read_text().split()
    assert rows[:3] == ["0", "1", "1.5"] or float(rows[2]) == 1.5
