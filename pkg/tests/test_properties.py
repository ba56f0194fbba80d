import math

import numpy as np
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from shiftpore import fem, mesh, physics, postproc, solver

finite = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)
unit = st.floats(-1.0, 1.0, allow_nan=False)
angles = st.floats(0.0, 2 * math.pi, allow_nan=False)
MAT = physics.BENCHMARK_MATERIAL

_GRIDS = {n: mesh.split_along(mesh.build_grid(n), []) for n in (3, 5)}
_RECOVERY = {n: postproc.GradientRecovery(sm) for n, sm in _GRIDS.items()}


@given(unit, unit)
def test_partition_of_unity(xi, eta):
    N, dN = fem.eval_basis(fem.Q1, (xi, eta))
    assert abs(N.sum() - 1.0) <= 1e-14
    assert np.abs(dN.sum(axis=0)).max() <= 1e-14


@given(unit, st.integers(0, 3))
def test_bubble_vanishes_on_edges(t, edge):
    pt = [(t, -1.0), (1.0, t), (t, 1.0), (-1.0, t)][edge]
    N, _ = fem.eval_basis(fem.Q1_BUBBLE, pt)
    assert abs(N[4]) <= 1e-15


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([3, 5]), arrays(float, 3, elements=finite), arrays(float, 6, elements=finite))
def test_recovery_exact_for_linear_fields(n, a, b):
    sm = _GRIDS[n]
    dm = fem.build_dof_map(sm, "weak")
    X = sm.nodes
    z = np.zeros(dm.n_z)
    z[: dm.n_p] = a[0] + a[1] * X[:, 0] + a[2] * X[:, 1]
    B = b[2:].reshape(2, 2)
    for k in range(2):
        z[dm.u_dofs(np.arange(sm.n_nodes), k)] = b[k] + X @ B[k]
    g = _RECOVERY[n](z, dm)
    scale = 1.0 + np.abs(a).max() + np.abs(b).max()
    assert np.abs(g.p - a[1:]).max() <= 1e-12 * scale
    assert np.abs(g.u - B).max() <= 1e-12 * scale


@given(finite, arrays(float, 2, elements=finite), arrays(float, 2, elements=finite),
       arrays(float, 2, elements=st.floats(-0.1, 0.1)))
def test_taylor_transfer_exact_for_linear(c, g, x, gap):
    f = lambda y: c + g @ y
    got = postproc.taylor_transfer(f(x), g, gap)
    assert abs(got - f(x + gap)) <= 1e-12 * (1.0 + abs(c) + 10 * np.abs(g).sum())


def _jump(a, b):
    return a - b


def _avg(a, b):
    return 0.5 * (a + b)


@given(arrays(float, (2, 2, 2), elements=finite), arrays(float, 2, elements=finite),
       arrays(float, (2, 2), elements=finite), angles)
def test_jump_average_product_identities(G, p, w, th):
    n = np.array([math.cos(th), math.sin(th)])
    t = [physics.plane_strain_stress(1e-4 * G[s], p[s], MAT) @ n for s in range(2)]
    tol = 1e-13 * (1.0 + max(np.abs(x).max() for x in t) * (1.0 + np.abs(w).max()))
    # test-function pairing used by the face integrals
    lhs = _jump(w[0] @ t[0], w[1] @ t[1])
    rhs = _jump(w[0], w[1]) @ _avg(t[0], t[1]) + _avg(w[0], w[1]) @ _jump(t[0], t[1])
    assert abs(lhs - rhs) <= tol
    lhs = _avg(w[0] @ t[0], w[1] @ t[1])
    rhs = _avg(w[0], w[1]) @ _avg(t[0], t[1]) + 0.25 * _jump(w[0], w[1]) @ _jump(t[0], t[1])
    assert abs(lhs - rhs) <= tol
    # opposite one-sided tractions: zero average, jump twice the plus side
    assert np.abs(_avg(t[0], -t[0])).max() == 0.0
    assert np.abs(_jump(t[0], -t[0]) - 2 * t[0]).max() <= tol


@given(arrays(float, (2, 2, 2), elements=finite), arrays(float, 2, elements=finite), angles)
def test_traction_frame_decomposition(G, p, th):
    n = np.array([math.cos(th), math.sin(th)])
    nh, m = physics.interface_frame(n)
    sig = [physics.plane_strain_stress(1e-4 * G[s], p[s], MAT) for s in range(2)]
    t = [s_ @ nh for s_ in sig]
    jt = t[0] - t[1]
    recon = (jt @ nh) * nh + (jt @ m) * m
    tol = 1e-13 * (1.0 + max(np.abs(s_).max() for s_ in sig))
    assert np.abs(recon - jt).max() <= tol
    # traction jump is the jump of the stress applied to the common normal
    assert np.abs(jt - (sig[0] - sig[1]) @ nh).max() <= tol
    # spring traction of a displacement jump along m carries no normal part with k_n = 0
    law = physics.InterfaceLaw(k_n=0.0, k_t=3.0)
    assert abs(physics.spring_traction(m, np.zeros(2), law, nh) @ nh) <= 1e-13


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-2.0, 2.0), st.floats(0.2, 2.0))
def test_sdirk_second_order_on_linear_dae(c, x0, rate):
    # x' = c - rate x paired with the algebraic row y = c + rate x stays index 1
    E = sp.csr_matrix(np.diag([1.0, 0.0]))
    K = sp.csr_matrix(np.array([[1.0, -1.0], [-(1.0 - rate), 1.0]]))
    f = np.array([0.0, c])
    T = 2.0
    exact = c / rate + (x0 - c / rate) * math.exp(-rate * T)
    errs = []
    for m in (10, 20, 40):
        z = np.array([x0, c + (1.0 - rate) * x0])
        stg = solver._StageSolver(E, K)
        for _ in range(m):
            z, _, _ = solver.sdirk2_step(E, K, f, z, T / m, stg)
        errs.append(abs(z[0] - exact))
    if errs[-1] > 1e-13:
        for a, b in zip(errs, errs[1:]):
            assert 3.5 <= a / b <= 4.5


@given(st.floats(-5.0, 5.0), st.floats(0.1, 3.0), st.integers(4, 60), st.floats(0.0, 0.49))
def test_trimmed_norm_constant_profile(c, L, N, eps):
    edges = np.linspace(0.0, L, N + 1)
    pr = postproc.ResidualProfile(0, "rJ", 0.5 * (edges[1:] + edges[:-1]), np.full(N, c), np.diff(edges),
                                  edges[:-1], edges[1:], L)
    assert abs(pr.norm(eps) - abs(c) * math.sqrt((1 - 2 * eps) * L)) <= 1e-12 * (1 + abs(c))
