"""Gradient recovery, transfer to the true crack and interface diagnostics.

Residual profiles are sampled at the surrogate facet quadrature points and
placed on the true crack through the closest-point arclength.  Each sample
owns a sub-interval ``[lo, hi]`` of arclength so that trimmed norms can clip
samples exactly.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import assembly, fem
from .errors import ConfigurationError, UsageError
from .fem import DofMap
from .mesh import ShiftData, SplitMesh
from .physics import (InterfaceLaw, MaterialParams, interface_frame, plane_strain_stress,
                      stiffness_tensor, viscosity_tensor)

log = logging.getLogger(__name__)

KINDS = ("rJ", "rJumpQ", "rJumpT_n", "rJumpT_m", "rConstT_n", "rConstT_m")
LAMBDA_KINDS = tuple(k + "_lam" for k in KINDS)


# --------------------------------------------------------------------------
# gradient recovery
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RecoveredGradients:
    """Nodal gradients on the split mesh.

    ``p (N, 2)`` holds ``p_{,j}``; ``u (N, 2, 2)`` holds ``u_{i,j}``;
    ``udot`` is filled only when a rate-dependent law needs it.
    """

    p: np.ndarray
    u: np.ndarray
    udot: np.ndarray | None = None


def mass_matrix(split: SplitMesh) -> sp.csr_matrix:
    """Consistent scalar Q1 mass matrix on the split mesh."""
    center, half = assembly._element_geometry(split)
    pts, w = fem.tensor_rule(2)
    N, _, _ = fem.basis_tables(fem.Q1, pts)
    det = half[:, 0] * half[:, 1]
    Me = np.einsum("q,e,qa,qb->eab", w, det, N, N)
    rows = np.repeat(split.quads, 4, axis=1)
    cols = np.tile(split.quads, (1, 4))
    return sp.csr_matrix((Me.ravel(), (rows.ravel(), cols.ravel())),
                         shape=(split.n_nodes, split.n_nodes))


class GradientRecovery:
    """L2 projection of weak gradients onto the nodal Q1 space.

    The mass matrix is factorized once per split mesh and reused for every
    field component.  Displacement right-hand sides include the bubble dofs.
    """

    def __init__(self, split: SplitMesh):
        self.split = split
        self.M = mass_matrix(split)
        self._lu = spla.splu(self.M.tocsc())
        center, half = assembly._element_geometry(split)
        pts, w = fem.tensor_rule(3)
        N, dN, _ = fem.basis_tables(fem.Q1_BUBBLE, pts)
        self._wd = w[None, :] * (half[:, 0] * half[:, 1])[:, None]      # (E, Q)
        self._N4 = N[:, :4]
        self._g = dN[None, :, :, :] / half[:, None, None, :]             # (E, Q, 5, 2)

    def _project(self, fe):
        """``fe (E, nb)`` local coefficients -> nodal gradient ``(N, 2)``."""
        nb = fe.shape[1]
        df = np.einsum("eqbj,eb->eqj", self._g[:, :, :nb, :], fe)
        rhs_e = np.einsum("eq,qa,eqj->eaj", self._wd, self._N4, df)
        out = np.empty((self.split.n_nodes, 2))
        for j in range(2):
            rhs = np.bincount(self.split.quads.ravel(), rhs_e[..., j].ravel(), minlength=self.split.n_nodes)
            out[:, j] = self._lu.solve(rhs)
        return out

    def scalar(self, f_nodal) -> np.ndarray:
        f = np.asarray(f_nodal, dtype=float)
        if f.shape != (self.split.n_nodes,):
            raise UsageError("scalar field must have one value per split node")
        return self._project(f[self.split.quads])

    def vector(self, z, dofmap: DofMap) -> np.ndarray:
        ud = dofmap.all_element_u_dofs(self.split.quads)
        return np.stack([self._project(z[ud[:, k::2]]) for k in range(2)], axis=1)

    def __call__(self, z, dofmap: DofMap, zdot=None) -> RecoveredGradients:
        gp = self.scalar(z[: dofmap.n_p])
        gu = self.vector(z, dofmap)
        gud = None if zdot is None else self.vector(zdot, dofmap)
        return RecoveredGradients(gp, gu, gud)


def project_gradients(split: SplitMesh, z, dofmap: DofMap, zdot=None) -> RecoveredGradients:
    return GradientRecovery(split)(z, dofmap, zdot)


# --------------------------------------------------------------------------
# transfer to the true crack
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CrackTraces:
    """One-sided fields at the facet quadrature points of one crack.

    Arrays carry a leading side axis (0 plus, 1 minus) followed by
    ``(F, Q)``.  ``p_hat``/``u_hat`` are Taylor transferred; flux and stress
    come from the recovered gradients at the surrogate points.
    """

    p: np.ndarray              # (2, F, Q)
    p_hat: np.ndarray
    u: np.ndarray              # (2, F, Q, 2)
    u_hat: np.ndarray
    udot_hat: np.ndarray
    grad_p: np.ndarray         # (2, F, Q, 2) recovered
    grad_u: np.ndarray         # (2, F, Q, 2, 2) recovered


def taylor_transfer(value, grad, gap):
    """``f + gap_j f_{,j}``; ``grad`` carries the derivative index last."""
    return np.asarray(value) + np.einsum("...j,...j->...", np.asarray(grad), np.asarray(gap))


def transfer_to_true_crack(split: SplitMesh, dofmap: DofMap, state, grads: RecoveredGradients,
                           sd: ShiftData) -> CrackTraces:
    F, Q = sd.x.shape[:2]
    p = np.zeros((2, F, Q))
    ph = np.zeros((2, F, Q))
    u = np.zeros((2, F, Q, 2))
    uh = np.zeros((2, F, Q, 2))
    udh = np.zeros((2, F, Q, 2))
    gp = np.zeros((2, F, Q, 2))
    gu = np.zeros((2, F, Q, 2, 2))
    z, zd = state.z, state.zdot
    for rec in split.crack_facets(sd.crack_id):
        k = rec.index
        X, D = sd.x[k], sd.gap[k]
        for s, e in enumerate((rec.plus_elem, rec.minus_elem)):
            N, g, _ = assembly.side_tables(split, e, X)
            conn = split.quads[e]
            ud = dofmap.element_u_dofs(conn, e)
            N4 = N[:, :4]
            p[s, k] = N4 @ z[conn]
            gp[s, k] = N4 @ grads.p[conn]
            u[s, k] = np.stack([N @ z[ud[c::2]] for c in range(2)], axis=-1)
            gu[s, k] = np.einsum("qa,aij->qij", N4, grads.u[conn])
            ph[s, k] = taylor_transfer(p[s, k], gp[s, k], D)
            uh[s, k] = u[s, k] + np.einsum("qij,qj->qi", gu[s, k], D)
            if grads.udot is not None:
                vd = np.stack([N @ zd[ud[c::2]] for c in range(2)], axis=-1)
                gud = np.einsum("qa,aij->qij", N4, grads.udot[conn])
                udh[s, k] = vd + np.einsum("qij,qj->qi", gud, D)
    return CrackTraces(p, ph, u, uh, udh, gp, gu)


# --------------------------------------------------------------------------
# residual profiles
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ResidualProfile:
    """Samples ``value`` at arclength ``s`` on the true crack.

    ``lo``/``hi`` bound the arclength interval owned by each sample and
    ``weight`` is its quadrature weight.
    """

    crack_id: int
    kind: str
    s: np.ndarray
    value: np.ndarray
    weight: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    length: float

    def __post_init__(self):
        if not (self.s.shape == self.value.shape == self.weight.shape == self.lo.shape == self.hi.shape):
            raise UsageError("profile arrays must have matching shapes")

    def norm(self, eps: float = 0.0) -> float:
        return trimmed_norm(self, eps)


def _sample_intervals(sd: ShiftData, weight):
    """Split each facet's projected arclength range among its samples by weight."""
    s0, s1 = sd.node_s[:-1], sd.node_s[1:]
    a, b = np.minimum(s0, s1), np.maximum(s0, s1)
    w = np.clip(weight, 0.0, None)
    tot = w.sum(axis=1, keepdims=True)
    frac = np.divide(w, tot, out=np.full_like(w, 1.0 / w.shape[1]), where=tot > 0)
    # samples are ordered along the facet; reverse when the facet runs against s
    order = np.where((s1 >= s0)[:, None], frac, frac[:, ::-1])
    cum = np.concatenate([np.zeros((w.shape[0], 1)), np.cumsum(order, axis=1)], axis=1)
    lo_o = a[:, None] + (b - a)[:, None] * cum[:, :-1]
    hi_o = a[:, None] + (b - a)[:, None] * cum[:, 1:]
    rev = s1 < s0
    lo = np.where(rev[:, None], lo_o[:, ::-1], lo_o)
    hi = np.where(rev[:, None], hi_o[:, ::-1], hi_o)
    return lo, hi


def residual_profiles(split: SplitMesh, dofmap: DofMap, state, grads: RecoveredGradients,
                      shifts, laws, mat: MaterialParams) -> list[ResidualProfile]:
    """The six interface residuals per crack, in :data:`KINDS` order."""
    out = []
    for sd, law in zip(shifts, laws):
        tr = transfer_to_true_crack(split, dofmap, state, grads, sd)
        n, m = interface_frame(sd.normal)                        # (F, Q, 2)
        q = -mat.gamma * tr.grad_p                               # (2, F, Q, 2)
        sig = plane_strain_stress(tr.grad_u, tr.p, mat)          # (2, F, Q, 2, 2)
        qn = np.einsum("sfqi,fqi->sfq", q, n)
        t = np.einsum("sfqij,fqj->sfqi", sig, n)
        jump_p = tr.p_hat[0] - tr.p_hat[1]
        jump_u = tr.u_hat[0] - tr.u_hat[1]
        jump_ud = tr.udot_hat[0] - tr.udot_hat[1]
        J = -law.T_n * jump_p
        T = (np.einsum("fqij,fqj->fqi", stiffness_tensor(law, sd.normal), jump_u)
             + np.einsum("fqij,fqj->fqi", viscosity_tensor(law, sd.normal), jump_ud))
        rt_jump = t[0] - t[1]
        rt_const = 0.5 * (t[0] + t[1]) - T
        vals = {
            "rJ": 0.5 * (qn[0] + qn[1]) - J,
            "rJumpQ": qn[0] - qn[1],
            "rJumpT_n": np.einsum("fqi,fqi->fq", rt_jump, n),
            "rJumpT_m": np.einsum("fqi,fqi->fq", rt_jump, m),
            "rConstT_n": np.einsum("fqi,fqi->fq", rt_const, n),
            "rConstT_m": np.einsum("fqi,fqi->fq", rt_const, m),
        }
        w = sd.weight * sd.cos_phi
        lo, hi = _sample_intervals(sd, w)
        order = np.argsort(sd.s.ravel(), kind="stable")
        L = split.surrogates[sd.crack_id].curve.length
        for kind in KINDS:
            out.append(ResidualProfile(sd.crack_id, kind, sd.s.ravel()[order], vals[kind].ravel()[order],
                                       w.ravel()[order], lo.ravel()[order], hi.ravel()[order], L))
    return out


def lambda_profiles(split: SplitMesh, dofmap: DofMap, state, shifts, laws) -> list[ResidualProfile]:
    """Closure residuals evaluated on the interface unknowns at the path nodes."""
    from .solver import strong_closure

    if dofmap.mode != "strong" or state.lam is None:
        raise UsageError("interface unknown residuals need a strong-mode state")
    ref = strong_closure(split, dofmap, state, shifts, laws)
    lam = state.lam
    lo_off = dofmap.lambda_offset
    out = []
    for c, sd in enumerate(shifts):
        P = sd.node_s.shape[0]
        idx = dofmap.path_offsets[c] + np.arange(P)
        qp = lam[dofmap.lambda_q(idx, +1) - lo_off]
        qm = lam[dofmap.lambda_q(idx, -1) - lo_off]
        tp = np.stack([lam[dofmap.lambda_t(idx, +1, k) - lo_off] for k in range(2)], axis=-1)
        tm = np.stack([lam[dofmap.lambda_t(idx, -1, k) - lo_off] for k in range(2)], axis=-1)
        J = ref[dofmap.lambda_q(idx, +1) - lo_off]
        T = np.stack([ref[dofmap.lambda_t(idx, +1, k) - lo_off] for k in range(2)], axis=-1)
        n, m = interface_frame(sd.node_normal)
        rt_jump = tp + tm
        rt_const = 0.5 * (tp - tm) - T
        vals = {
            "rJ_lam": 0.5 * (qp - qm) - J,
            "rJumpQ_lam": qp + qm,
            "rJumpT_n_lam": np.einsum("pi,pi->p", rt_jump, n),
            "rJumpT_m_lam": np.einsum("pi,pi->p", rt_jump, m),
            "rConstT_n_lam": np.einsum("pi,pi->p", rt_const, n),
            "rConstT_m_lam": np.einsum("pi,pi->p", rt_const, m),
        }
        s = sd.node_s
        order = np.argsort(s, kind="stable")
        ss = s[order]
        mid = 0.5 * (ss[1:] + ss[:-1])
        lo = np.concatenate([ss[:1], mid])
        hi = np.concatenate([mid, ss[-1:]])
        L = split.surrogates[c].curve.length
        for kind in LAMBDA_KINDS:
            out.append(ResidualProfile(c, kind, ss, vals[kind][order], hi - lo, lo, hi, L))
    return out


def trimmed_norm(profile: ResidualProfile, eps: float = 0.0) -> float:
    """Quadrature L2 norm over arclength ``[eps L, (1 - eps) L]``.

    Sample weights are scaled by the fraction of their interval that
    survives the trim; zero-width intervals count when their ``s`` does.
    """
    if not 0.0 <= eps < 0.5:
        raise ConfigurationError(f"trim fraction must lie in [0, 0.5), got {eps!r}")
    if eps == 0.0:
        w = profile.weight
    else:
        a, b = eps * profile.length, (1.0 - eps) * profile.length
        width = profile.hi - profile.lo
        kept = np.clip(np.minimum(profile.hi, b) - np.maximum(profile.lo, a), 0.0, None)
        inside = (profile.s >= a) & (profile.s <= b)
        frac = np.where(width > 0, kept / np.where(width > 0, width, 1.0), inside.astype(float))
        w = profile.weight * frac
    return float(np.sqrt(np.sum(w * profile.value ** 2)))


# --------------------------------------------------------------------------
# self-convergence
# --------------------------------------------------------------------------

def nested_transfer(coarse: SplitMesh, fine: SplitMesh, f_fine) -> np.ndarray:
    """Fine nodal values at the coarse split nodes of a nested grid pair.

    Each coarse element corner reads the fine element at the same corner of
    the refined cell, so duplicated nodes pick up the fine copy from their
    own side.  Coarse nodes seen by several fine copies take the mean.
    """
    nc, nf = coarse.base.n, fine.base.n
    if nf != 2 * nc or coarse.base.domain != fine.base.domain:
        raise ConfigurationError(f"grids n={nc} and n={nf} are not a nested refinement pair")
    f_fine = np.asarray(f_fine, dtype=float)
    E = coarse.n_elements
    ei, ej = np.arange(E) % nc, np.arange(E) // nc
    acc = np.zeros((coarse.n_nodes,) + f_fine.shape[1:])
    cnt = np.zeros(coarse.n_nodes)
    for k, (dx, dy) in enumerate(((0, 0), (1, 0), (1, 1), (0, 1))):
        fe = (2 * ej + dy) * nf + (2 * ei + dx)
        fnode = fine.quads[fe, k]
        np.add.at(acc, coarse.quads[:, k], f_fine[fnode])
        np.add.at(cnt, coarse.quads[:, k], 1.0)
    return acc / cnt.reshape((-1,) + (1,) * (acc.ndim - 1))


def _nodal_field(split: SplitMesh, dofmap: DofMap, z, tag: str) -> np.ndarray:
    if tag == "p":
        return np.asarray(z[: dofmap.n_p])
    if tag == "u":
        return np.asarray(z[dofmap.u_offset: dofmap.bubble_offset]).reshape(split.n_nodes, 2)
    raise UsageError(f"field tag must be 'p' or 'u', got {tag!r}")


def self_convergence_error(coarse_z, fine_z, coarse: SplitMesh, fine: SplitMesh,
                           coarse_dofs: DofMap, fine_dofs: DofMap, tag: str = "p",
                           M: sp.spmatrix | None = None) -> float:
    """Relative mass-weighted nodal error between a coarse level and its refinement."""
    fc = _nodal_field(coarse, coarse_dofs, coarse_z, tag)
    ff = nested_transfer(coarse, fine, _nodal_field(fine, fine_dofs, fine_z, tag))
    M = mass_matrix(coarse) if M is None else M
    d = (fc - ff).reshape(coarse.n_nodes, -1)
    r = ff.reshape(coarse.n_nodes, -1)
    num = sum(float(d[:, k] @ (M @ d[:, k])) for k in range(d.shape[1]))
    den = sum(float(r[:, k] @ (M @ r[:, k])) for k in range(r.shape[1]))
    if den == 0.0:
        return 0.0 if num == 0.0 else float("inf")
    return float(np.sqrt(num / den))


# --------------------------------------------------------------------------
# export
# --------------------------------------------------------------------------

def projected_coordinates(split: SplitMesh, shifts) -> np.ndarray:
    """Split-node coordinates with every crack path copy moved onto the true crack."""
    X = np.array(split.nodes, dtype=float)
    for sd in shifts:
        moved = {}
        for rec in split.crack_facets(sd.crack_id):
            for j in range(2):
                i = rec.index + j
                for v in (rec.plus_nodes[j], rec.minus_nodes[j]):
                    moved[v] = i
        for v, i in moved.items():
            X[v] = split.nodes[v] + sd.node_gap[i]
    return X


def stress_invariants(grad_u, p, mat: MaterialParams):
    """Mean effective stress ``tr(sigma')/3`` and ``sqrt(J2)`` in plane strain."""
    g = np.asarray(grad_u, dtype=float)
    eps = 0.5 * (g + np.swapaxes(g, -1, -2))
    tr = eps[..., 0, 0] + eps[..., 1, 1]
    s_eff = mat.lam * tr[..., None, None] * np.eye(2) + 2.0 * mat.G * eps
    szz = mat.lam * tr
    mean = (s_eff[..., 0, 0] + s_eff[..., 1, 1] + szz) / 3.0
    dxx, dyy, dzz = s_eff[..., 0, 0] - mean, s_eff[..., 1, 1] - mean, szz - mean
    J2 = 0.5 * (dxx**2 + dyy**2 + dzz**2) + s_eff[..., 0, 1] ** 2
    return mean, np.sqrt(J2)


def write_vtk(path, split: SplitMesh, dofmap: DofMap, z, grads: RecoveredGradients | None,
              mat: MaterialParams, coords=None, title: str = "shiftpore") -> None:
    """Legacy ASCII unstructured grid with nodal point data."""
    X = split.nodes if coords is None else np.asarray(coords)
    p = np.asarray(z[: dofmap.n_p])
    u = _nodal_field(split, dofmap, z, "u")
    if grads is None:
        mean = sqrtj2 = np.zeros(split.n_nodes)
    else:
        mean, sqrtj2 = stress_invariants(grads.u, p, mat)
    E = split.n_elements
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {split.n_nodes} double"]
    lines += [f"{x:.17g} {y:.17g} 0" for x, y in X]
    lines.append(f"CELLS {E} {5 * E}")
    lines += ["4 " + " ".join(map(str, q)) for q in split.quads]
    lines.append(f"CELL_TYPES {E}")
    lines += ["9"] * E
    lines.append(f"POINT_DATA {split.n_nodes}")
    for name, arr in (("p", p), ("p_eff_mean", mean), ("sqrt_J2", sqrtj2),
                      ("u_norm", np.linalg.norm(u, axis=1))):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.17g}" for v in arr]
    lines.append("VECTORS u double")
    lines += [f"{a:.17g} {b:.17g} 0" for a, b in u]
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


PROFILE_COLUMNS = ("mode", "crack", "s", "kind", "value", "weight")


def write_profiles_csv(path, groups) -> None:
    """``groups`` maps an enforcement mode to its list of profiles."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for mode, profiles in groups.items():
            for pr in profiles:
                for s, v, wt in zip(pr.s, pr.value, pr.weight):
                    w.writerow([mode, pr.crack_id, f"{s:.17g}", pr.kind, f"{v:.17g}", f"{wt:.17g}"])


def read_profiles_csv(path) -> list[dict]:
    with open(path, newline="", encoding="ascii") as fh:
        return [dict(r, crack=int(r["crack"]), s=float(r["s"]), value=float(r["value"]),
                     weight=float(r["weight"])) for r in csv.DictReader(fh)]


NORM_COLUMNS = ("mode", "crack", "n", "h", "kind", "eps", "norm")


def write_norms_csv(path, rows) -> None:
    """Rows are mappings with the keys of :data:`NORM_COLUMNS`."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(NORM_COLUMNS)
        for r in rows:
            w.writerow([r["mode"], r["crack"], r["n"], f"{r['h']:.17g}", r["kind"],
                        f"{r['eps']:.17g}", f"{r['norm']:.17g}"])


def ensure_dir(path) -> str:
    os.makedirs(path, exist_ok=True)
    return path
