"""Semidiscrete DAE assembly and adaptive SDIRK2 time integration.

The state is ``z = (p, u)``.  In strong mode the one-sided interface
unknowns follow from the linear closure ``lam = L_z z + L_zdot zdot``, which
is folded into the stage matrices, so both modes integrate the same kind of
system ``E zdot + K z = f``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly, fem
from .errors import ConfigurationError, NumericalError, UsageError
from .fem import DofMap
from .mesh import ShiftData, SplitMesh
from .physics import InterfaceLaw, MaterialParams, stiffness_tensor, viscosity_tensor

log = logging.getLogger(__name__)

GAMMA_RK = 1.0 - 1.0 / math.sqrt(2.0)


# --------------------------------------------------------------------------
# nodal gradients on crack paths
# --------------------------------------------------------------------------

def _corner_gradients(split: SplitMesh, e: int, x):
    """Physical gradients of the 5 element functions at point ``x``."""
    N, g, _ = assembly.side_tables(split, e, np.asarray(x, dtype=float)[None, :])
    return N[0], g[0]


@dataclass(frozen=True)
class PathNodeOperators:
    """Linear maps from ``z`` to one-sided traces at the path nodes of one crack.

    ``p_side[s]`` maps ``z`` to nodal pressure on side ``s`` (0 plus, 1 minus),
    ``gp_side[s][l]`` to ``p_{,l}``, ``u_side[s][k]`` to ``u_k`` and
    ``gu_side[s][k][l]`` to ``u_{k,l}``.  Rows follow the surrogate path order.
    """

    p_side: tuple
    gp_side: tuple
    u_side: tuple
    gu_side: tuple


def path_node_operators(split: SplitMesh, dofmap: DofMap, crack_id: int) -> PathNodeOperators:
    """Nodal values pick the side copy; gradients average the adjacent facet owners on that side."""
    sg = split.surrogates[crack_id]
    recs = split.crack_facets(crack_id)
    P, nz = len(sg.path_nodes), dofmap.n_z
    # side copies of each path node
    copies = np.zeros((2, P), dtype=int)
    touching = [[] for _ in range(P)]
    for rec in recs:
        for j, v in enumerate(rec.base_nodes):
            idx = rec.index + j
            copies[0, idx] = rec.plus_nodes[j]
            copies[1, idx] = rec.minus_nodes[j]
            touching[idx].append(rec)

    def value_op(ids, comp=None):
        cols = ids if comp is None else dofmap.u_dofs(ids, comp)
        return sp.csr_matrix((np.ones(P), (np.arange(P), cols)), shape=(P, nz))

    grad_rows = {}
    for s in range(2):
        rows = [[[], [], []] for _ in range(6)]   # 0,1: p_,l ; 2..5: u_{k,l}
        for i in range(P):
            x = split.base.nodes[sg.path_nodes[i]]
            weight = 1.0 / len(touching[i])
            for rec in touching[i]:
                e = rec.plus_elem if s == 0 else rec.minus_elem
                _, g = _corner_gradients(split, e, x)
                pd = split.quads[e]
                ud = dofmap.element_u_dofs(split.quads[e], e)
                for l in range(2):
                    rows[l][0].extend([i] * 4)
                    rows[l][1].extend(pd.tolist())
                    rows[l][2].extend((weight * g[:4, l]).tolist())
                for k in range(2):
                    for l in range(2):
                        r = rows[2 + 2 * k + l]
                        r[0].extend([i] * 5)
                        r[1].extend(ud[k::2].tolist())
                        r[2].extend((weight * g[:, l]).tolist())
        grad_rows[s] = [sp.csr_matrix((r[2], (r[0], r[1])), shape=(P, nz)) for r in rows]

    p_side = tuple(value_op(copies[s]) for s in range(2))
    u_side = tuple((value_op(copies[s], 0), value_op(copies[s], 1)) for s in range(2))
    gp_side = tuple((grad_rows[s][0], grad_rows[s][1]) for s in range(2))
    gu_side = tuple(((grad_rows[s][2], grad_rows[s][3]), (grad_rows[s][4], grad_rows[s][5])) for s in range(2))
    return PathNodeOperators(p_side, gp_side, u_side, gu_side)


def closure_matrices(split: SplitMesh, shifts, laws, dofmap: DofMap):
    """Sparse ``(L_z, L_zdot)`` with ``lam = L_z z + L_zdot zdot`` (rows over all interface dofs)."""
    if dofmap.mode != "strong":
        raise UsageError("closure matrices need a strong-mode dof map")
    nz, nl, lo = dofmap.n_z, dofmap.n_lambda, dofmap.lambda_offset
    Lz = sp.lil_matrix((nl, nz))
    Ld = sp.lil_matrix((nl, nz))
    blocks_z, blocks_d = [], []
    for c, (sd, law) in enumerate(zip(shifts, laws)):
        ops = path_node_operators(split, dofmap, c)
        D = sd.node_gap
        P = D.shape[0]
        idx = dofmap.path_offsets[c] + np.arange(P)
        Dx, Dy = sp.diags(D[:, 0]), sp.diags(D[:, 1])
        # shifted jumps [[f + D . grad f]]
        jp = (ops.p_side[0] + Dx @ ops.gp_side[0][0] + Dy @ ops.gp_side[0][1]
              - ops.p_side[1] - Dx @ ops.gp_side[1][0] - Dy @ ops.gp_side[1][1])
        ju = [ops.u_side[0][k] + Dx @ ops.gu_side[0][k][0] + Dy @ ops.gu_side[0][k][1]
              - ops.u_side[1][k] - Dx @ ops.gu_side[1][k][0] - Dy @ ops.gu_side[1][k][1] for k in range(2)]
        qp = -law.T_n * jp
        blocks_z.append((dofmap.lambda_q(idx, +1) - lo, qp))
        blocks_z.append((dofmap.lambda_q(idx, -1) - lo, -qp))
        Kn = stiffness_tensor(law, sd.node_normal)     # (P, 2, 2)
        Hn = viscosity_tensor(law, sd.node_normal)
        for k in range(2):
            tz = sp.diags(Kn[:, k, 0]) @ ju[0] + sp.diags(Kn[:, k, 1]) @ ju[1]
            td = sp.diags(Hn[:, k, 0]) @ ju[0] + sp.diags(Hn[:, k, 1]) @ ju[1]
            blocks_z.append((dofmap.lambda_t(idx, +1, k) - lo, tz))
            blocks_z.append((dofmap.lambda_t(idx, -1, k) - lo, -tz))
            blocks_d.append((dofmap.lambda_t(idx, +1, k) - lo, td))
            blocks_d.append((dofmap.lambda_t(idx, -1, k) - lo, -td))

    def scatter(blocks):
        rows, cols, vals = [], [], []
        for ridx, M in blocks:
            M = M.tocoo()
            rows.append(ridx[M.row])
            cols.append(M.col)
            vals.append(M.data)
        if not rows:
            return sp.csr_matrix((nl, nz))
        A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(nl, nz)).tocsr()
        A.eliminate_zeros()
        return A

    return scatter(blocks_z), scatter(blocks_d)


# --------------------------------------------------------------------------
# state and system
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class State:
    t: float
    z: np.ndarray
    zdot: np.ndarray
    lam: np.ndarray | None = None

    def copy(self) -> "State":
        return State(self.t, self.z.copy(), self.zdot.copy(), None if self.lam is None else self.lam.copy())


@dataclass
class DAESystem:
    mode: str
    dofmap: DofMap
    blocks: assembly.SystemBlocks
    E: sp.csr_matrix               # effective (closure folded)
    K: sp.csr_matrix
    f: np.ndarray
    free: np.ndarray
    constraints: assembly.ConstraintSet
    G: sp.csr_matrix | None = None
    L_z: sp.csr_matrix | None = None
    L_zdot: sp.csr_matrix | None = None
    E_r: sp.csr_matrix = field(init=False, repr=False)
    K_r: sp.csr_matrix = field(init=False, repr=False)
    f_r: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.E_r, _, _ = assembly.apply_dirichlet(self.E, None, self.constraints)
        self.K_r, self.f_r, free = assembly.apply_dirichlet(self.K, self.f, self.constraints)
        if not np.array_equal(free, self.free):
            raise UsageError("free-dof set mismatch")

    @property
    def n_z(self) -> int:
        return self.dofmap.n_z

    def expand(self, zr):
        z = np.zeros(self.n_z)
        z[self.constraints.dofs] = self.constraints.values
        z[self.free] = zr
        return z

    def lam(self, z, zdot):
        if self.mode != "strong":
            return None
        return self.L_z @ z + self.L_zdot @ zdot


def build_system(split: SplitMesh, shifts, laws, mat: MaterialParams, sources, mode: str = "weak",
                 with_hessian: bool = False, bcs=None) -> DAESystem:
    """Assemble and compose the DAE; ``bcs`` maps to :func:`assembly.boundary_constraints` keywords."""
    dofmap = fem.build_dof_map(split, mode)
    cons = None if bcs is None else assembly.boundary_constraints(split, dofmap, **bcs)
    blocks = assembly.assemble_system(split, shifts, laws, mat, sources, mode, with_hessian, dofmap, cons)
    E, K, G = assembly.compose_system(blocks, mode)
    Lz = Ld = None
    if mode == "strong":
        Lz, Ld = closure_matrices(split, shifts, laws, dofmap)
        K = (K + G @ Lz).tocsr()
        E = (E + G @ Ld).tocsr()
    f = np.concatenate([blocks.f_p, blocks.f_u])
    cons = blocks.constraints
    mask = np.ones(dofmap.n_z, dtype=bool)
    mask[cons.dofs] = False
    return DAESystem(mode, dofmap, blocks, E, K, f, np.nonzero(mask)[0], cons, G, Lz, Ld)


def solve_initial(system: DAESystem, p0=None) -> State:
    """Equilibrium displacement for the initial pressure ``p0`` (default zero)."""
    dm = system.dofmap
    z = np.zeros(dm.n_z)
    z[system.constraints.dofs] = system.constraints.values
    if p0 is not None:
        p0 = np.asarray(p0, dtype=float)
        if p0.shape != (dm.n_p,):
            raise UsageError("p0 must give one value per pressure dof")
        pfree = np.setdiff1d(np.arange(dm.n_p), system.constraints.dofs)
        z[pfree] = p0[pfree]
    ufree = system.free[system.free >= dm.n_p]
    K = system.K.tocsr()
    A = K[ufree][:, ufree].tocsc()
    rhs = system.f[ufree] - K[ufree] @ z
    if np.any(rhs) or A.shape[0]:
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            raise ConfigurationError(f"mechanics block is singular (insufficient constraints?): {exc}") from exc
        z[ufree] = lu.solve(rhs)
    zdot = np.zeros(dm.n_z)
    return State(0.0, z, zdot, system.lam(z, zdot))


# --------------------------------------------------------------------------
# SDIRK2
# --------------------------------------------------------------------------

class _StageSolver:
    """Factorization of ``E + gamma dt K`` cached per ``dt`` value.

    Diagonal pivoting under a symmetric minimum-degree ordering is tried
    first; it keeps the fill several times lower on these block systems.  A
    factor that fails a residual probe is replaced by a partially pivoted one.
    """

    PROBE_TOL = 1e-8

    def __init__(self, E, K):
        self.E, self.K = E.tocsc(), K.tocsc()
        self.dt = None
        self.lu = None
        self.n_factor = 0
        self.n_fallback = 0

    def _factor(self, A):
        probe = np.ones(A.shape[0])
        try:
            lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                           options=dict(SymmetricMode=True))
            x = lu.solve(probe)
            r = np.linalg.norm(A @ x - probe) / (spla.norm(A, 1) * np.linalg.norm(x) + 1.0)
            if np.isfinite(r) and r < self.PROBE_TOL:
                return lu
        except RuntimeError:
            pass
        self.n_fallback += 1
        return spla.splu(A)

    def solve(self, dt, r):
        if self.dt != dt:
            try:
                self.lu = self._factor((self.E + (GAMMA_RK * dt) * self.K).tocsc())
            except RuntimeError as exc:
                raise NumericalError(f"stage matrix factorization failed at dt={dt:g}: {exc}") from exc
            self.dt = dt
            self.n_factor += 1
        return self.lu.solve(r)


def sdirk2_step(E, K, f, z, dt, stage: _StageSolver | None = None):
    """One SDIRK2 step of ``E zdot + K z = f`` (constant ``f``).

    Returns ``(z_new, k2, err_vec)`` where ``k2`` is the end-of-step rate and
    ``err_vec`` the difference to the embedded first-order solution.
    """
    stage = stage or _StageSolver(E, K)
    g = GAMMA_RK
    k1 = stage.solve(dt, f - K @ z)
    k2 = stage.solve(dt, f - K @ (z + dt * (1 - g) * k1))
    z_new = z + dt * ((1 - g) * k1 + g * k2)
    err = z_new - (z + dt * k1)
    return z_new, k2, err


def sdirk2_advance(system: DAESystem, state: State, dt: float, stage: _StageSolver | None = None):
    """Advance the reduced system by ``dt``; returns ``(new_state, err_vec_reduced)``."""
    if not dt > 0:
        raise UsageError("dt must be positive")
    stage = stage or _StageSolver(system.E_r, system.K_r)
    zr = state.z[system.free]
    zn, k2, err = sdirk2_step(system.E_r, system.K_r, system.f_r, zr, dt, stage)
    z = system.expand(zn)
    zdot = np.zeros(system.n_z)
    zdot[system.free] = k2
    return State(state.t + dt, z, zdot, system.lam(z, zdot)), err


@dataclass(frozen=True)
class ControllerSettings:
    atol: float = 1e-10
    rtol: float = 1e-6
    dt0: float = 1e-4
    safety: float = 0.9
    fac_min: float = 0.2
    fac_max: float = 5.0
    hold_below: float = 1.5      # keep dt (and its factorization) after accepts proposing less growth
    scaling: str = "field"
    dt_min: float = 1e-12
    max_steps: int = 100000


@dataclass
class RunStats:
    accepted: int = 0
    rejected: int = 0
    factorizations: int = 0
    pivot_fallbacks: int = 0
    wall: float = 0.0
    dts: list = field(default_factory=list)


def error_norm(err, z_old, z_new, atol, rtol, groups=None, scaling="field") -> float:
    """Weighted RMS of ``err``.

    ``scaling="field"`` measures the relative part against the max-norm of
    each field group (pressure, displacement), ``"component"`` against each
    entry.
    """
    if not err.size:
        return 0.0
    mag = np.maximum(np.abs(z_old), np.abs(z_new))
    if scaling == "field" and groups is not None:
        for gmask in groups:
            if gmask.any():
                mag[gmask] = mag[gmask].max()
    elif scaling not in ("field", "component"):
        raise UsageError(f"unknown error scaling {scaling!r}")
    scale = atol + rtol * mag
    return float(np.sqrt(np.mean((err / scale) ** 2)))


def run_transient(system: DAESystem, state: State, t_end: float, settings: ControllerSettings | None = None,
                  snapshots: str = "final", on_step=None):
    """Adaptive integration to ``t_end``.

    ``snapshots`` is ``final``, ``all`` or ``stride:K``.  ``on_step(state)``
    is called after every accepted step.  Returns ``(state, snaps, stats)``.
    """
    s = settings or ControllerSettings()
    stride = _parse_snapshots(snapshots)
    stats = RunStats()
    snaps = []
    t0 = time.perf_counter()
    stage = _StageSolver(system.E_r, system.K_r)
    is_p = system.free < system.dofmap.n_p
    groups = (is_p, ~is_p)
    dt = min(s.dt0, t_end - state.t)
    if t_end <= state.t:
        return state, [state.copy()], stats
    while state.t < t_end:
        if stats.accepted + stats.rejected >= s.max_steps:
            raise NumericalError(f"step budget exhausted at t={state.t:g}")
        last = state.t + dt >= t_end * (1 - 1e-14)
        h = t_end - state.t if last else dt
        new, err = sdirk2_advance(system, state, h, stage)
        en = error_norm(err, state.z[system.free], new.z[system.free], s.atol, s.rtol, groups, s.scaling)
        if not np.isfinite(en):
            stats.rejected += 1
            dt = 0.5 * h
        elif en <= 1.0:
            state = State(t_end if last else new.t, new.z, new.zdot, new.lam)
            stats.accepted += 1
            stats.dts.append(h)
            if on_step is not None:
                on_step(state)
            if stride == -1 or (stride > 0 and stats.accepted % stride == 0):
                snaps.append(state.copy())
            fac = s.fac_max if en == 0 else min(s.fac_max, max(s.fac_min, s.safety * en ** -0.5))
            if not last:
                dt = h if fac < s.hold_below else h * fac
        else:
            stats.rejected += 1
            dt = h * min(s.fac_max, max(s.fac_min, s.safety * en ** -0.5))
        if dt < s.dt_min:
            raise NumericalError(f"time step underflow (dt={dt:.3e} hr) at t={state.t:.6g} hr; "
                                 f"last error norm {en:.3e}")
    stats.factorizations = stage.n_factor
    stats.pivot_fallbacks = stage.n_fallback
    stats.wall = time.perf_counter() - t0
    if not snaps or snaps[-1].t != state.t:
        snaps.append(state.copy())
    return state, snaps, stats


def _parse_snapshots(spec: str) -> int:
    if spec == "final":
        return 0
    if spec == "all":
        return -1
    if isinstance(spec, str) and spec.startswith("stride:"):
        try:
            k = int(spec.split(":", 1)[1])
        except ValueError:
            k = 0
        if k >= 1:
            return k
    raise ConfigurationError(f"snapshot cadence must be final, all or stride:K, got {spec!r}")


# --------------------------------------------------------------------------
# pointwise closure and residuals
# --------------------------------------------------------------------------

def strong_closure(split: SplitMesh, dofmap: DofMap, state: State, shifts, laws) -> np.ndarray:
    """Interface unknowns evaluated node by node from element traces.

    This is an independent, loop-based evaluation of the linear closure used
    to check the folded matrix route.
    """
    if dofmap.mode != "strong":
        raise UsageError("strong_closure requires a strong-mode dof map")
    lam = np.zeros(dofmap.n_lambda)
    lo = dofmap.lambda_offset
    z, zd = state.z, state.zdot
    for c, (sd, law) in enumerate(zip(shifts, laws)):
        sg = split.surrogates[c]
        recs = split.crack_facets(c)
        P = len(sg.path_nodes)
        for i in range(P):
            x = split.base.nodes[sg.path_nodes[i]]
            D = sd.node_gap[i]
            touching = [(r, i - r.index) for r in recs if r.index in (i, i - 1)]
            hat = {}
            for s, sgn in ((0, 1), (1, -1)):
                pv, uv, udv = 0.0, np.zeros(2), np.zeros(2)
                for r, j in touching:
                    e = r.plus_elem if s == 0 else r.minus_elem
                    node = (r.plus_nodes if s == 0 else r.minus_nodes)[j]
                    _, g = _corner_gradients(split, e, x)
                    pd = split.quads[e]
                    ud = dofmap.element_u_dofs(split.quads[e], e)
                    gp = g[:4].T @ z[pd]
                    gu = np.array([[g[:, l] @ z[ud[k::2]] for l in range(2)] for k in range(2)])
                    gud = np.array([[g[:, l] @ zd[ud[k::2]] for l in range(2)] for k in range(2)])
                    pv += (z[node] + D @ gp) / len(touching)
                    uv += (z[dofmap.u_dofs(node, np.arange(2))] + gu @ D) / len(touching)
                    udv += (zd[dofmap.u_dofs(node, np.arange(2))] + gud @ D) / len(touching)
                hat[s] = (pv, uv, udv)
            jp = hat[0][0] - hat[1][0]
            ju = hat[0][1] - hat[1][1]
            jud = hat[0][2] - hat[1][2]
            g_idx = dofmap.path_offsets[c] + i
            q = -law.T_n * jp
            t = stiffness_tensor(law, sd.node_normal[i]) @ ju + viscosity_tensor(law, sd.node_normal[i]) @ jud
            lam[dofmap.lambda_q(g_idx, +1) - lo] = q
            lam[dofmap.lambda_q(g_idx, -1) - lo] = -q
            lam[dofmap.lambda_t(g_idx, +1, np.arange(2)) - lo] = t
            lam[dofmap.lambda_t(g_idx, -1, np.arange(2)) - lo] = -t
    return lam


def closure_residual(split: SplitMesh, dofmap: DofMap, state: State, shifts, laws) -> dict:
    """Max-norm residuals of the four algebraic relations at every interface node.

    ``jump_q``: ``[[q]] + 2 T_n [[p^]]``; ``avg_q``: ``<q>``; ``avg_t``: ``<t>``;
    ``jump_t``: ``[[t]] - 2 (K [[u^]] + H [[u^dot]])``.
    """
    ref = strong_closure(split, dofmap, state, shifts, laws)
    lam = state.lam
    n = dofmap.n_path_nodes
    qp, qm = lam[:n], lam[n:2 * n]
    tp, tm = lam[2 * n:4 * n].reshape(n, 2), lam[4 * n:].reshape(n, 2)
    rqp = ref[:n]
    rtp = ref[2 * n:4 * n].reshape(n, 2)
    out = {
        "jump_q": float(np.max(np.abs((qp - qm) - 2 * rqp), initial=0.0)),
        "avg_q": float(np.max(np.abs(0.5 * (qp + qm)), initial=0.0)),
        "avg_t": float(np.max(np.abs(0.5 * (tp + tm)), initial=0.0)),
        "jump_t": float(np.max(np.abs((tp - tm) - 2 * rtp), initial=0.0)),
    }
    out["max"] = max(out.values())
    return out
