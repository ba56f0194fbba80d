import math

import numpy as np
import pytest
import scipy.sparse as sp

from shiftpore import physics, solver
from shiftpore.errors import ConfigurationError, UsageError
from shiftpore.harness import builtin_case
from shiftpore.harness.run import discretize

G = solver.GAMMA_RK
LAW = physics.InterfaceLaw(T_n=5.0, k_n=1e8, k_t=1e8, h_n=2.0, h_t=1.0)


def small_system(mode, sources=True, law=LAW, n=6):
    spec = builtin_case("angled_embedded", n)
    d = discretize(spec)
    src = list(spec.sources) if sources else []
    return d, solver.build_system(d.split, d.shifts, [law], spec.material, src, mode)


def test_gamma_value():
    assert G == pytest.approx(1 - 1 / math.sqrt(2), abs=1e-15)


@pytest.mark.parametrize("w", [-0.1, -1.0, -10.0, -1e3, 0.5])
def test_stability_function(w):
    E, K = sp.csr_matrix([[1.0]]), sp.csr_matrix([[-w]])
    z, _, _ = solver.sdirk2_step(E, K, np.zeros(1), np.ones(1), 1.0)
    R = (1 + (1 - 2 * G) * w) / (1 - G * w) ** 2
    assert z[0] == pytest.approx(R, rel=1e-14, abs=1e-14)


def test_stiff_decay_is_l_stable():
    E, K = sp.csr_matrix([[1.0]]), sp.csr_matrix([[1e12]])
    z, _, _ = solver.sdirk2_step(E, K, np.zeros(1), np.ones(1), 1.0)
    assert abs(z[0]) < 1e-11


def test_algebraic_rows_solved_exactly():
    E = sp.csr_matrix((2, 2))
    K = sp.csr_matrix([[2.0, 1.0], [1.0, 3.0]])
    f = np.array([1.0, -2.0])
    z, _, _ = solver.sdirk2_step(E, K, f, np.array([5.0, 5.0]), 0.3)
    np.testing.assert_allclose(z, np.linalg.solve(K.toarray(), f), rtol=1e-14)


def dae_error(dt, c=1.0, x0=0.0, T=2.0):
    E = sp.csr_matrix(np.diag([1.0, 0.0]))
    K = sp.csr_matrix([[1.0, -1.0], [-0.5, 1.0]])
    f = np.array([0.0, c])
    z = np.array([x0, c + 0.5 * x0])
    st = solver._StageSolver(E, K)
    for _ in range(round(T / dt)):
        z, _, _ = solver.sdirk2_step(E, K, f, z, dt, st)
    exact = 2 * c + (x0 - 2 * c) * math.exp(-T / 2)
    return abs(z[0] - exact)


def test_index_one_dae_second_order():
    errs = [dae_error(dt) for dt in (0.2, 0.1, 0.05, 0.025)]
    for a, b in zip(errs, errs[1:]):
        assert 3.5 <= a / b <= 4.5


def test_error_norm_scalings():
    err = np.array([1e-10, 0.0])
    z = np.array([1.0, 1e-3])
    a = solver.error_norm(err, z, z, 1e-10, 1e-6, None, "component")
    assert a == pytest.approx(math.sqrt(0.5) * 1e-10 / (1e-10 + 1e-6))
    groups = (np.array([True, True]),)
    assert solver.error_norm(np.zeros(0), z, z, 1.0, 1.0) == 0.0
    assert solver.error_norm(err, z, z, 1e-10, 1e-6, groups, "field") == pytest.approx(a)
    with pytest.raises(UsageError):
        solver.error_norm(err, z, z, 1.0, 1.0, None, "bogus")


@pytest.mark.parametrize("text,val", [("final", 0), ("all", -1), ("stride:3", 3)])
def test_snapshot_parsing(text, val):
    assert solver._parse_snapshots(text) == val


@pytest.mark.parametrize("text", ["stride:0", "stride:x", "every", ""])
def test_snapshot_parsing_errors(text):
    with pytest.raises(ConfigurationError):
        solver._parse_snapshots(text)


def test_no_sources_stays_at_rest():
    _, sysm = small_system("weak", sources=False)
    st = solver.solve_initial(sysm)
    assert not st.z.any()
    end, snaps, stats = solver.run_transient(sysm, st, 10.0, snapshots="stride:2")
    assert end.t == 10.0 and not end.z.any()
    assert len(snaps) >= 1 and stats.rejected == 0


def test_initial_displacement_zero_without_pressure():
    _, sysm = small_system("strong")
    st = solver.solve_initial(sysm)
    assert np.abs(st.z).max() == 0.0
    with pytest.raises(UsageError):
        solver.solve_initial(sysm, np.zeros(3))


def test_initial_pressure_produces_equilibrium():
    _, sysm = small_system("weak")
    dm = sysm.dofmap
    p0 = np.ones(dm.n_p)
    st = solver.solve_initial(sysm, p0)
    u = sysm.free[sysm.free >= dm.n_p]
    res = sysm.K[u] @ st.z - sysm.f[u]
    assert np.abs(res).max() <= 1e-9 * np.abs(sysm.K[u] @ np.abs(st.z)).max()


def test_folded_closure_matches_pointwise_evaluation():
    d, sysm = small_system("strong")
    rng = np.random.default_rng(7)
    z, zd = rng.standard_normal(sysm.n_z), rng.standard_normal(sysm.n_z)
    st = solver.State(0.0, z, zd, sysm.lam(z, zd))
    ref = solver.strong_closure(d.split, sysm.dofmap, st, d.shifts, [LAW])
    assert np.abs(st.lam - ref).max() <= 1e-12 * np.abs(ref).max()
    res = solver.closure_residual(d.split, sysm.dofmap, st, d.shifts, [LAW])
    assert res["max"] <= 1e-12 * np.abs(ref).max()


def test_closure_residual_detects_perturbation():
    d, sysm = small_system("strong")
    z = np.zeros(sysm.n_z)
    lam = np.zeros(sysm.dofmap.n_lambda)
    lam[0] = 1.0         # q+ at the first node with no jump present
    res = solver.closure_residual(d.split, sysm.dofmap, solver.State(0.0, z, z, lam), d.shifts, [LAW])
    assert res["jump_q"] == 1.0 and res["avg_q"] == 0.5 and res["avg_t"] == 0.0
    with pytest.raises(UsageError):
        _, w = small_system("weak")
        solver.strong_closure(d.split, w.dofmap, solver.State(0.0, z, z), d.shifts, [LAW])


def test_tolerance_refinement_consistent():
    _, sysm = small_system("weak", n=8)
    st = solver.solve_initial(sysm)
    a, _, sa = solver.run_transient(sysm, st, 50.0, solver.ControllerSettings(rtol=1e-5, atol=1e-9))
    b, _, sb = solver.run_transient(sysm, st, 50.0, solver.ControllerSettings(rtol=1e-7, atol=1e-11))
    assert sb.accepted > sa.accepted
    p = slice(0, sysm.dofmap.n_p)
    assert np.abs(a.z[p] - b.z[p]).max() <= 1e-3 * np.abs(b.z[p]).max()


def test_strong_and_weak_agree_on_small_mesh():
    _, w = small_system("weak", n=8)
    _, s = small_system("strong", n=8)
    a, _, _ = solver.run_transient(w, solver.solve_initial(w), 30.0)
    b, _, _ = solver.run_transient(s, solver.solve_initial(s), 30.0)
    p = slice(0, w.dofmap.n_p)
    assert np.linalg.norm(a.z[p] - b.z[p]) <= 0.05 * np.linalg.norm(b.z[p])
