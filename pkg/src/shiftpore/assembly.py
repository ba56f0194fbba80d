"""Sparse operator blocks for the bulk Biot system and the crack faces.

Row/column layout follows :class:`~shiftpore.fem.DofMap`.  Blocks keep their
natural field shapes (``n_p``/``n_u``/``n_lambda``); :func:`compose_system`
stacks them into the ``E``/``K`` pair of the semidiscrete DAE.

Face integrals are assembled facet by facet.  The plus trace always comes
from the K+ owner and ``[[a]] = a+ - a-``, ``<a> = (a+ + a-)/2``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import fem
from .errors import AssemblyError, ConfigurationError, UsageError
from .fem import DofMap
from .mesh import ShiftData, SplitMesh
from .physics import InterfaceLaw, MaterialParams, SourceTerm, stiffness_tensor, viscosity_tensor, wendland

log = logging.getLogger(__name__)

VOLUME_ORDER = 3
SOURCE_ORDER = 6


class _COO:
    """Triplet buffer; duplicates are summed on conversion."""

    def __init__(self, shape):
        self.shape = shape
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, block):
        r = np.asarray(rows, dtype=int)
        c = np.asarray(cols, dtype=int)
        b = np.asarray(block, dtype=float)
        self.rows.append(np.repeat(r, c.size))
        self.cols.append(np.tile(c, r.size))
        self.vals.append(b.ravel())

    def add_batch(self, rows, cols, blocks):
        """``rows (B, r)``, ``cols (B, c)``, ``blocks (B, r, c)``."""
        B, r = rows.shape
        c = cols.shape[1]
        self.rows.append(np.repeat(rows, c, axis=1).ravel())
        self.cols.append(np.tile(cols, (1, r)).ravel())
        self.vals.append(np.asarray(blocks, dtype=float).ravel())

    def tocsr(self) -> sp.csr_matrix:
        if not self.rows:
            return sp.csr_matrix(self.shape)
        A = sp.coo_matrix((np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
                          shape=self.shape)
        A = A.tocsr()
        A.sum_duplicates()
        A.sort_indices()
        return A


@dataclass(frozen=True)
class ConstraintSet:
    dofs: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.unique(self.dofs).size != self.dofs.size:
            raise UsageError("duplicate constrained dof")


@dataclass
class SystemBlocks:
    dofmap: DofMap
    M_p: sp.csr_matrix
    C: sp.csr_matrix
    K_p: sp.csr_matrix
    K_u: sp.csr_matrix
    Kc_p: sp.csr_matrix | None = None
    Kc_u: sp.csr_matrix | None = None
    Dc_u: sp.csr_matrix | None = None
    Rc_p: sp.csr_matrix | None = None
    Rc_uu: sp.csr_matrix | None = None
    Rc_up: sp.csr_matrix | None = None
    Sc_p: sp.csr_matrix | None = None
    Sc_uu: sp.csr_matrix | None = None
    Sc_up: sp.csr_matrix | None = None
    G_p: sp.csr_matrix | None = None
    G_u: sp.csr_matrix | None = None
    f_p: np.ndarray | None = None
    f_u: np.ndarray | None = None
    constraints: ConstraintSet | None = None

    BLOCK_NAMES = ("M_p", "C", "K_p", "K_u", "Kc_p", "Kc_u", "Dc_u", "Rc_p", "Rc_uu", "Rc_up",
                   "Sc_p", "Sc_uu", "Sc_up", "G_p", "G_u")

    def present(self) -> dict:
        return {k: getattr(self, k) for k in self.BLOCK_NAMES if getattr(self, k) is not None}


# --------------------------------------------------------------------------
# element geometry helpers
# --------------------------------------------------------------------------

def _element_geometry(split: SplitMesh):
    X = split.nodes[split.quads]            # (E, 4, 2)
    lo, hi = X[:, 0], X[:, 2]
    half = 0.5 * (hi - lo)
    tol = 1e-12 * (1.0 + np.abs(X).max())
    rect = (np.all(np.abs(X[:, 1] - np.column_stack([hi[:, 0], lo[:, 1]])) <= tol, axis=1)
            & np.all(np.abs(X[:, 3] - np.column_stack([lo[:, 0], hi[:, 1]])) <= tol, axis=1)
            & np.all(half > 0, axis=1))
    if not rect.all():
        bad = np.nonzero(~rect)[0][:5]
        raise AssemblyError(f"elements {bad.tolist()} have a singular or non-rectangular map")
    return 0.5 * (lo + hi), half


def side_tables(split: SplitMesh, e: int, X):
    """Physical Q1 and Q1+bubble tables of element ``e`` at points ``X (Q, 2)``.

    Returns ``(N, g, H)`` for the 5-function family; the first 4 columns are
    the Q1 pressure basis.
    """
    rm = fem.rect_map(split.nodes[split.quads[e]])
    ref = rm.to_reference(X)
    if np.any(np.abs(ref) > 1 + 1e-9):
        raise AssemblyError(f"trace point outside element {e}")
    N, dN, d2N = fem.basis_tables(fem.Q1_BUBBLE, ref)
    g, H = fem.physical_derivatives(dN, d2N, rm)
    return N, g, H


def vector_ops(N, g, H):
    """Displacement operators for the 10 local u dofs (corner x/y, bubble x/y).

    ``V (Q, 2, 10)`` values, ``Gr (Q, 2, 2, 10)`` gradients ``u_{k,l}`` and
    ``Hs (Q, 2, 2, 2, 10)`` Hessians ``u_{k,l m}``.
    """
    Q = N.shape[0]
    V = np.zeros((Q, 2, 10))
    Gr = np.zeros((Q, 2, 2, 10))
    Hs = np.zeros((Q, 2, 2, 2, 10))
    for k in range(2):
        V[:, k, k::2] = N
        Gr[:, k, :, k::2] = np.swapaxes(g, 1, 2)
        Hs[:, k, :, :, k::2] = np.moveaxis(H, 1, 3)
    return V, Gr, Hs


# --------------------------------------------------------------------------
# bulk
# --------------------------------------------------------------------------

def assemble_bulk(split: SplitMesh, dofmap: DofMap, mat: MaterialParams) -> dict:
    """``M_p``, ``C``, ``K_p`` and ``K_u`` by 3x3 Gauss on every element."""
    center, half = _element_geometry(split)
    pts, w = fem.tensor_rule(VOLUME_ORDER)
    N, dN, _ = fem.basis_tables(fem.Q1_BUBBLE, pts)      # (Q, 5), (Q, 5, 2)
    det = half[:, 0] * half[:, 1]                          # (E,)
    g = dN[None, :, :, :] / half[:, None, None, :]         # (E, Q, 5, 2)
    wd = w[None, :] * det[:, None]                         # (E, Q)

    Np = N[:, :4]
    gp = g[:, :, :4, :]
    Me = mat.beta * np.einsum("eq,qa,qb->eab", wd, Np, Np)
    Kpe = mat.gamma * np.einsum("eq,eqai,eqbi->eab", wd, gp, gp)
    # u dof (a, k): div = g[a, k]
    div = g.reshape(g.shape[0], g.shape[1], 10)            # (E, Q, 10), order a-major k-minor
    Ce = mat.alpha * np.einsum("eq,qa,eqj->eaj", wd, Np, div)
    # grad operator Gr[e, q, k, l, j] for u dof j = (a, m): delta_km g[a, l]
    E, Q = g.shape[0], g.shape[1]
    Gr = np.zeros((E, Q, 2, 2, 10))
    for k in range(2):
        Gr[:, :, k, :, k::2] = np.swapaxes(g, 2, 3)
    Ct = mat.elasticity_tensor()
    Kue = np.einsum("eq,klmn,eqkli,eqmnj->eij", wd, Ct, Gr, Gr)

    pd = split.quads
    ud = dofmap.all_element_u_dofs(split.quads)
    out = {}
    for name, rows, cols, blocks, shape in (
        ("M_p", pd, pd, Me, (dofmap.n_p, dofmap.n_p)),
        ("K_p", pd, pd, Kpe, (dofmap.n_p, dofmap.n_p)),
        ("C", pd, ud - dofmap.n_p, Ce, (dofmap.n_p, dofmap.n_u)),
        ("K_u", ud - dofmap.n_p, ud - dofmap.n_p, Kue, (dofmap.n_u, dofmap.n_u)),
    ):
        buf = _COO(shape)
        buf.add_batch(rows, cols, blocks)
        out[name] = buf.tocsr()
    return out


# --------------------------------------------------------------------------
# crack faces
# --------------------------------------------------------------------------

@dataclass
class _FacetSides:
    """Two-sided tables at the facet quadrature points."""

    pdofs: np.ndarray          # (8,) plus then minus
    udofs: np.ndarray          # (20,) local u indices (offset removed)
    Np: tuple                  # per side (Q, 4)
    gp: tuple                  # per side (Q, 4, 2)
    Hp: tuple                  # per side (Q, 4, 2, 2)
    V: tuple                   # per side (Q, 2, 10)
    Gr: tuple
    Hs: tuple


def _facet_sides(split, dofmap, rec, X) -> _FacetSides:
    tabs = []
    for e in (rec.plus_elem, rec.minus_elem):
        N, g, H = side_tables(split, e, X)
        tabs.append((N, g, H, vector_ops(N, g, H)))
    pd = np.concatenate([split.quads[rec.plus_elem], split.quads[rec.minus_elem]])
    ud = np.concatenate([dofmap.element_u_dofs(split.quads[rec.plus_elem], rec.plus_elem),
                         dofmap.element_u_dofs(split.quads[rec.minus_elem], rec.minus_elem)]) - dofmap.n_p
    return _FacetSides(
        pd, ud,
        tuple(t[0][:, :4] for t in tabs), tuple(t[1][:, :4] for t in tabs), tuple(t[2][:, :4] for t in tabs),
        tuple(t[3][0] for t in tabs), tuple(t[3][1] for t in tabs), tuple(t[3][2] for t in tabs),
    )


def _jump(plus, minus):
    return np.concatenate([plus, -minus], axis=-1)


def _avg(plus, minus):
    return 0.5 * np.concatenate([plus, minus], axis=-1)


def _check_shift(split: SplitMesh, shifts):
    if shifts is None or len(shifts) != split.n_cracks:
        raise AssemblyError("shift data must be supplied for every crack")
    for c, sd in enumerate(shifts):
        if sd is None or sd.n_facets != split.surrogates[c].n_facets:
            raise AssemblyError(f"shift data missing or mismatched for crack {c}")


def assemble_interface_weak(split: SplitMesh, shifts, laws, dofmap: DofMap, mat: MaterialParams,
                            with_hessian: bool = False) -> dict:
    """Constitutive (``Kc``, ``Dc``), mismatch (``Rc``) and optional Hessian (``Sc``) blocks.

    ``Rc`` and ``Sc`` depend only on geometry and bulk material and are
    shared by both enforcement modes.  The mechanics mismatch blocks enter
    with ``+`` and the mechanics Hessian blocks with ``-``, the signs that
    follow from adding the mechanics face functional to the momentum residual.
    """
    _check_shift(split, shifts)
    if len(laws) != split.n_cracks:
        raise AssemblyError("one interface law per crack is required")
    n_p, n_u = dofmap.n_p, dofmap.n_u
    bufs = {k: _COO(s) for k, s in (("Kc_p", (n_p, n_p)), ("Kc_u", (n_u, n_u)), ("Dc_u", (n_u, n_u)),
                                     ("Rc_p", (n_p, n_p)), ("Rc_uu", (n_u, n_u)), ("Rc_up", (n_u, n_p)),
                                     ("Sc_p", (n_p, n_p)), ("Sc_uu", (n_u, n_u)), ("Sc_up", (n_u, n_p)))}
    Ct = mat.elasticity_tensor()
    gam, alp = mat.gamma, mat.alpha

    for c, (sd, law) in enumerate(zip(shifts, laws)):
        for k, rec in enumerate(split.crack_facets(c)):
            X = sd.x[k]
            S = _facet_sides(split, dofmap, rec, X)
            for q in range(X.shape[0]):
                w, cph = sd.weight[k, q], sd.cos_phi[k, q]
                D, nh, npp = sd.gap[k, q], sd.normal[k, q], sd.n_perp[k, q]
                Kt = stiffness_tensor(law, nh)
                Ht = viscosity_tensor(law, nh)

                # scalar traces
                vP, vM = S.Np[0][q], S.Np[1][q]
                shP = vP + S.gp[0][q] @ D
                shM = vM + S.gp[1][q] @ D
                Jv, Av = _jump(vP, vM), _avg(vP, vM)
                Jsh = _jump(shP, shM)
                if law.T_n != 0.0:
                    bufs["Kc_p"].add(S.pdofs, S.pdofs, w * cph * law.T_n * np.outer(Jv, Jsh))
                qP, qM = -gam * S.gp[0][q] @ npp, -gam * S.gp[1][q] @ npp
                bufs["Rc_p"].add(S.pdofs, S.pdofs,
                                 -w * (np.outer(Jv, _avg(qP, qM)) + np.outer(Av, _jump(qP, qM))))

                # vector traces: (2, 20)
                VP, VM = S.V[0][q], S.V[1][q]
                JV, AV = _jump(VP, VM), _avg(VP, VM)
                SVP = VP + np.einsum("klj,l->kj", S.Gr[0][q], D)
                SVM = VM + np.einsum("klj,l->kj", S.Gr[1][q], D)
                JS = _jump(SVP, SVM)
                if law.k_n or law.k_t:
                    bufs["Kc_u"].add(S.udofs, S.udofs, w * cph * JV.T @ Kt @ JS)
                if law.h_n or law.h_t:
                    bufs["Dc_u"].add(S.udofs, S.udofs, w * cph * JV.T @ Ht @ JS)
                TP = np.einsum("kmpq,pqj,m->kj", Ct, S.Gr[0][q], npp)
                TM = np.einsum("kmpq,pqj,m->kj", Ct, S.Gr[1][q], npp)
                bufs["Rc_uu"].add(S.udofs, S.udofs, w * (JV.T @ _avg(TP, TM) + AV.T @ _jump(TP, TM)))
                TpP = -alp * np.outer(npp, vP)
                TpM = -alp * np.outer(npp, vM)
                bufs["Rc_up"].add(S.udofs, S.pdofs, w * (JV.T @ _avg(TpP, TpM) + AV.T @ _jump(TpP, TpM)))

                if with_hessian:
                    hP = -gam * np.einsum("ajl,l,j->a", S.Hp[0][q], D, nh)
                    hM = -gam * np.einsum("ajl,l,j->a", S.Hp[1][q], D, nh)
                    bufs["Sc_p"].add(S.pdofs, S.pdofs,
                                     w * cph * (np.outer(Jv, _avg(hP, hM)) + np.outer(Av, _jump(hP, hM))))
                    HP = np.einsum("kmpr,prlj,l,m->kj", Ct, S.Hs[0][q], D, nh)
                    HM = np.einsum("kmpr,prlj,l,m->kj", Ct, S.Hs[1][q], D, nh)
                    bufs["Sc_uu"].add(S.udofs, S.udofs,
                                      -w * cph * (JV.T @ _avg(HP, HM) + AV.T @ _jump(HP, HM)))
                    HpP = -alp * np.outer(nh, S.gp[0][q] @ D)
                    HpM = -alp * np.outer(nh, S.gp[1][q] @ D)
                    bufs["Sc_up"].add(S.udofs, S.pdofs,
                                      -w * cph * (JV.T @ _avg(HpP, HpM) + AV.T @ _jump(HpP, HpM)))

    out = {k: b.tocsr() for k, b in bufs.items()}
    if not with_hessian:
        for k in ("Sc_p", "Sc_uu", "Sc_up"):
            out[k] = None
    return out


def interface_hats(xi):
    """Facet-wise linear interface basis at reference abscissae ``xi`` (``(Q, 2)``)."""
    xi = np.asarray(xi, dtype=float)
    return np.column_stack([0.5 * (1 - xi), 0.5 * (1 + xi)])


def assemble_coupling(split: SplitMesh, shifts, dofmap: DofMap) -> dict:
    """``G_p`` and ``G_u`` pairing bulk tests with the one-sided interface unknowns."""
    if dofmap.mode != "strong":
        raise UsageError("coupling blocks require a strong-mode dof map")
    _check_shift(split, shifts)
    n_p, n_u, n_l = dofmap.n_p, dofmap.n_u, dofmap.n_lambda
    Gp, Gu = _COO((n_p, n_l)), _COO((n_u, n_l))
    lo = dofmap.lambda_offset
    for c, sd in enumerate(shifts):
        off = dofmap.path_offsets[c]
        L = interface_hats(sd.xi)
        for k, rec in enumerate(split.crack_facets(c)):
            S = _facet_sides(split, dofmap, rec, sd.x[k])
            ga = off + k + np.array([0, 1])
            qcols = np.concatenate([dofmap.lambda_q(ga, +1), dofmap.lambda_q(ga, -1)]) - lo
            for q in range(sd.xi.size):
                w, cph = sd.weight[k, q], sd.cos_phi[k, q]
                Jv = _jump(S.Np[0][q], S.Np[1][q])
                Av = _avg(S.Np[0][q], S.Np[1][q])
                jl = np.concatenate([L[q], -L[q]])
                al = 0.5 * np.concatenate([L[q], L[q]])
                Gp.add(S.pdofs, qcols, -w * cph * (0.5 * np.outer(Jv, jl) + 2.0 * np.outer(Av, al)))
                JV = _jump(S.V[0][q], S.V[1][q])
                AV = _avg(S.V[0][q], S.V[1][q])
                for comp in range(2):
                    tcols = np.concatenate([dofmap.lambda_t(ga, +1, comp), dofmap.lambda_t(ga, -1, comp)]) - lo
                    Gu.add(S.udofs, tcols,
                           w * cph * (0.5 * np.outer(JV[comp], jl) + 2.0 * np.outer(AV[comp], al)))
    return {"G_p": Gp.tocsr(), "G_u": Gu.tocsr()}


# --------------------------------------------------------------------------
# loads and constraints
# --------------------------------------------------------------------------

def assemble_rhs(split: SplitMesh, dofmap: DofMap, sources, t: float = 0.0, order: int = SOURCE_ORDER):
    """Source load ``f_p`` (Wendland-weighted) and zero ``f_u``.

    Source rates are constant in time, so ``t`` only documents the call.
    """
    f_p = np.zeros(dofmap.n_p)
    f_u = np.zeros(dofmap.n_u)
    if not sources:
        return f_p, f_u
    center, half = _element_geometry(split)
    pts, w = fem.tensor_rule(order)
    N, _, _ = fem.basis_tables(fem.Q1, pts)
    det = half[:, 0] * half[:, 1]
    X = center[:, None, :] + pts[None, :, :] * half[:, None, :]      # (E, Q, 2)
    dens = np.zeros(X.shape[:2])
    for s in sources:
        dens += s.Q * wendland(X, s)
    fe = np.einsum("eq,q,qa->ea", dens * det[:, None], w, N)
    np.add.at(f_p, split.quads, fe)
    return f_p, f_u


def source_mass(split: SplitMesh, source: SourceTerm, order: int = SOURCE_ORDER) -> float:
    """Discrete integral of the unit-rate source density."""
    center, half = _element_geometry(split)
    pts, w = fem.tensor_rule(order)
    X = center[:, None, :] + pts[None, :, :] * half[:, None, :]
    det = half[:, 0] * half[:, 1]
    return float(np.einsum("eq,q,e->", wendland(X, source), w, det))


SIDES = ("left", "right", "bottom", "top")


def side_mask(split: SplitMesh, side: str) -> np.ndarray:
    """Split nodes lying on one side of the domain box (both copies of duplicates)."""
    (x0, x1), (y0, y1) = split.base.domain
    tol = 1e-12 * (1 + max(abs(x1 - x0), abs(y1 - y0)))
    x, y = split.nodes[:, 0], split.nodes[:, 1]
    if side == "left":
        return np.abs(x - x0) <= tol
    if side == "right":
        return np.abs(x - x1) <= tol
    if side == "bottom":
        return np.abs(y - y0) <= tol
    if side == "top":
        return np.abs(y - y1) <= tol
    raise ConfigurationError(f"unknown boundary side {side!r}; expected one of {SIDES}")


def boundary_constraints(split: SplitMesh, dofmap: DofMap, pressure_sides=SIDES,
                         displacement_sides=("left", "right")) -> ConstraintSet:
    """Homogeneous ``p = 0`` and ``u = 0`` (both components) on the listed sides."""
    nodes = np.arange(split.n_nodes)
    pm = np.zeros(split.n_nodes, dtype=bool)
    um = np.zeros(split.n_nodes, dtype=bool)
    for sd in pressure_sides:
        pm |= side_mask(split, sd)
    for sd in displacement_sides:
        um |= side_mask(split, sd)
    dofs = np.concatenate([dofmap.p_dofs(nodes[pm]), dofmap.u_dofs(nodes[um], 0), dofmap.u_dofs(nodes[um], 1)])
    dofs = np.unique(dofs)
    return ConstraintSet(dofs, np.zeros(dofs.size))


def benchmark_constraints(split: SplitMesh, dofmap: DofMap) -> ConstraintSet:
    """``p = 0`` on all sides, ``u = 0`` on left/right; duplicates constrained individually."""
    return boundary_constraints(split, dofmap)


def apply_dirichlet(A: sp.spmatrix, b: np.ndarray | None, constraints: ConstraintSet | None):
    """Eliminate constrained rows/columns.

    Returns the reduced matrix, the reduced right-hand side (lifted by the
    prescribed values) and the array of free dofs.
    """
    n = A.shape[0]
    if constraints is None or constraints.dofs.size == 0:
        return A.tocsr(), (None if b is None else np.asarray(b, dtype=float).copy()), np.arange(n)
    d = constraints.dofs
    if d.min() < 0 or d.max() >= n:
        raise UsageError("constraint on a nonexistent dof")
    mask = np.ones(n, dtype=bool)
    mask[d] = False
    free = np.nonzero(mask)[0]
    A = A.tocsr()
    Ar = A[free][:, free]
    br = None
    if b is not None:
        g = np.zeros(n)
        g[d] = constraints.values
        br = (np.asarray(b, dtype=float) - A @ g)[free]
    return Ar, br, free


def assemble_system(split: SplitMesh, shifts, laws, mat: MaterialParams, sources, mode: str = "weak",
                    with_hessian: bool = False, dofmap: DofMap | None = None,
                    constraints: ConstraintSet | None = None) -> SystemBlocks:
    """All blocks needed by either enforcement mode."""
    dofmap = dofmap or fem.build_dof_map(split, mode)
    bulk = assemble_bulk(split, dofmap, mat)
    face = assemble_interface_weak(split, shifts, laws, dofmap, mat, with_hessian)
    blocks = SystemBlocks(dofmap=dofmap, **bulk, **face)
    if mode == "strong":
        cpl = assemble_coupling(split, shifts, dofmap)
        blocks.G_p, blocks.G_u = cpl["G_p"], cpl["G_u"]
    blocks.f_p, blocks.f_u = assemble_rhs(split, dofmap, sources)
    blocks.constraints = constraints if constraints is not None else benchmark_constraints(split, dofmap)
    return blocks


def compose_system(blocks: SystemBlocks, mode: str):
    """Stack blocks into ``(E, K, G)`` over ``z = (p, u)``.

    Weak mode folds the constitutive face blocks into ``E``/``K``; strong
    mode leaves them out and returns the coupling ``G = [G_p; G_u]``.
    """
    def nz(A, shape):
        return A if A is not None else sp.csr_matrix(shape)

    dm = blocks.dofmap
    n_p, n_u = dm.n_p, dm.n_u
    pp, uu, up = (n_p, n_p), (n_u, n_u), (n_u, n_p)
    Kpp = blocks.K_p + nz(blocks.Rc_p, pp) + nz(blocks.Sc_p, pp)
    Kup = -blocks.C.T + nz(blocks.Rc_up, up) + nz(blocks.Sc_up, up)
    Kuu = blocks.K_u + nz(blocks.Rc_uu, uu) + nz(blocks.Sc_uu, uu)
    Euu = sp.csr_matrix(uu)
    G = None
    if mode == "weak":
        Kpp = Kpp + nz(blocks.Kc_p, pp)
        Kuu = Kuu + nz(blocks.Kc_u, uu)
        Euu = nz(blocks.Dc_u, uu)
    elif mode == "strong":
        G = sp.vstack([blocks.G_p, blocks.G_u]).tocsr()
    else:
        raise UsageError(f"unknown mode {mode!r}")
    E = sp.bmat([[blocks.M_p, blocks.C], [sp.csr_matrix((n_u, n_p)), Euu]], format="csr")
    K = sp.bmat([[Kpp, sp.csr_matrix((n_p, n_u))], [Kup, Kuu]], format="csr")
    return E, K, G


def dump_triplets(path, A: sp.spmatrix) -> None:
    """Debug dump ``row col value`` per line."""
    C = A.tocoo()
    order = np.lexsort((C.col, C.row))
    with open(path, "w") as fh:
        for r, c, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")
