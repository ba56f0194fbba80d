"""Structured quad meshes, staircase surrogates and split connectivity.

Node ``(i, j)`` of an ``n x n`` grid has id ``j * (n + 1) + i`` and element
``(i, j)`` has id ``j * n + i`` with counterclockwise corners
``(i, j), (i+1, j), (i+1, j+1), (i, j+1)``.  Horizontal facets are numbered
first (``j * n + i``, owners below/above), then vertical facets
(``n (n + 1) + j * (n + 1) + i``, owners left/right).
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .errors import ConfigurationError, GeometryError, UnsupportedConfigurationError
from .geometry import CrackCurve

log = logging.getLogger(__name__)

DEFAULT_DOMAIN = ((-0.5, 0.5), (-0.5, 0.5))

GAUSS2 = (np.array([-1.0, 1.0]) / np.sqrt(3.0), np.array([1.0, 1.0]))


@dataclass(frozen=True)
class StructuredQuadMesh:
    n: int
    domain: tuple
    nodes: np.ndarray          # (N, 2)
    quads: np.ndarray          # (E, 4)
    facets: np.ndarray         # (F, 2) node pairs
    facet_owners: np.ndarray   # (F, 2) element ids, -1 on the boundary
    facet_vertical: np.ndarray  # (F,) bool

    @property
    def h(self) -> tuple[float, float]:
        (x0, x1), (y0, y1) = self.domain
        return (x1 - x0) / self.n, (y1 - y0) / self.n

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.quads.shape[0]

    @property
    def boundary_facets(self) -> np.ndarray:
        return np.any(self.facet_owners < 0, axis=1)

    def centroids(self) -> np.ndarray:
        return self.nodes[self.quads].mean(axis=1)

    def node_ij(self, node):
        return node % (self.n + 1), node // (self.n + 1)

    def on_boundary(self, node) -> np.ndarray:
        i, j = self.node_ij(np.asarray(node))
        return (i == 0) | (j == 0) | (i == self.n) | (j == self.n)

    def is_corner(self, node) -> np.ndarray:
        i, j = self.node_ij(np.asarray(node))
        return ((i == 0) | (i == self.n)) & ((j == 0) | (j == self.n))

    def node_elements(self, node: int) -> list[int]:
        """Elements of the base grid touching ``node`` (ascending ids)."""
        i, j = self.node_ij(node)
        out = []
        for dj in (-1, 0):
            for di in (-1, 0):
                ei, ej = i + di, j + dj
                if 0 <= ei < self.n and 0 <= ej < self.n:
                    out.append(ej * self.n + ei)
        return sorted(out)

    def node_facets(self, node: int) -> list[int]:
        i, j = self.node_ij(node)
        n = self.n
        out = []
        if i > 0:
            out.append(j * n + i - 1)
        if i < n:
            out.append(j * n + i)
        nh = n * (n + 1)
        if j > 0:
            out.append(nh + (j - 1) * (n + 1) + i)
        if j < n:
            out.append(nh + j * (n + 1) + i)
        return out


def build_grid(n: int, domain=DEFAULT_DOMAIN) -> StructuredQuadMesh:
    """Uniform ``n x n`` quad grid on an axis-aligned box."""
    if int(n) != n or n < 2:
        raise ConfigurationError(f"grid needs n >= 2 elements per side, got {n!r}")
    n = int(n)
    (x0, x1), (y0, y1) = domain
    if not (x1 > x0 and y1 > y0):
        raise ConfigurationError("degenerate domain box")
    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    jj, ii = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    ii, jj = ii.ravel(), jj.ravel()
    base = jj * (n + 1) + ii
    quads = np.column_stack([base, base + 1, base + n + 2, base + n + 1])

    # horizontal facets
    jh, ih = np.meshgrid(np.arange(n + 1), np.arange(n), indexing="ij")
    jh, ih = jh.ravel(), ih.ravel()
    h_nodes = np.column_stack([jh * (n + 1) + ih, jh * (n + 1) + ih + 1])
    below = np.where(jh > 0, (jh - 1) * n + ih, -1)
    above = np.where(jh < n, jh * n + ih, -1)
    # vertical facets
    jv, iv = np.meshgrid(np.arange(n), np.arange(n + 1), indexing="ij")
    jv, iv = jv.ravel(), iv.ravel()
    v_nodes = np.column_stack([jv * (n + 1) + iv, (jv + 1) * (n + 1) + iv])
    left = np.where(iv > 0, jv * n + iv - 1, -1)
    right = np.where(iv < n, jv * n + iv, -1)

    facets = np.vstack([h_nodes, v_nodes])
    owners = np.vstack([np.column_stack([below, above]), np.column_stack([left, right])])
    vertical = np.concatenate([np.zeros(len(h_nodes), bool), np.ones(len(v_nodes), bool)])
    for a in (nodes, quads, facets, owners, vertical):
        a.setflags(write=False)
    return StructuredQuadMesh(n, tuple(map(tuple, domain)), nodes, quads, facets, owners, vertical)


# --------------------------------------------------------------------------
# surrogate selection
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SurrogateInterface:
    """Ordered staircase of mesh facets standing in for one crack."""

    crack_id: int
    curve: CrackCurve
    facets: np.ndarray         # (F,) facet ids in path order
    minus_elem: np.ndarray     # (F,)
    plus_elem: np.ndarray      # (F,)
    normals: np.ndarray        # (F, 2) unit, K- -> K+
    facet_nodes: np.ndarray    # (F, 2) base node ids in path order (a, b)
    path_nodes: np.ndarray     # (P,) = F + 1 base node ids
    end_on_boundary: tuple     # (bool, bool) for path_nodes[0], path_nodes[-1]
    element_side: np.ndarray   # (E,) centroid labels in {+1, -1}

    @property
    def n_facets(self) -> int:
        return int(self.facets.shape[0])

    @property
    def boundary_reaching(self) -> bool:
        return any(self.end_on_boundary)

    @property
    def tip_nodes(self) -> np.ndarray:
        ends = [self.path_nodes[0], self.path_nodes[-1]]
        return np.array([v for v, b in zip(ends, self.end_on_boundary) if not b], dtype=int)


def _order_path(mesh: StructuredQuadMesh, facet_ids: np.ndarray):
    adj: dict[int, list[int]] = {}
    for f in facet_ids:
        a, b = mesh.facets[f]
        adj.setdefault(int(a), []).append(int(f))
        adj.setdefault(int(b), []).append(int(f))
    deg = {v: len(fs) for v, fs in adj.items()}
    if max(deg.values()) > 2:
        bad = [v for v, d in deg.items() if d > 2]
        raise GeometryError(f"surrogate branches at nodes {bad}; facets {sorted(map(int, facet_ids))}")
    ends = sorted(v for v, d in deg.items() if d == 1)
    if len(ends) != 2:
        raise GeometryError(f"surrogate is not a single open path (end nodes {ends}); "
                            f"facets {sorted(map(int, facet_ids))}")
    start = ends[0]
    nodes_order = [start]
    facets_order = []
    used = set()
    v = start
    while True:
        nxt = [f for f in adj[v] if f not in used]
        if not nxt:
            break
        f = nxt[0]
        used.add(f)
        facets_order.append(f)
        a, b = map(int, mesh.facets[f])
        v = b if a == v else a
        nodes_order.append(v)
    if len(facets_order) != len(facet_ids):
        raise GeometryError(f"surrogate path is disconnected: reached {len(facets_order)} of "
                            f"{len(facet_ids)} facets; facets {sorted(map(int, facet_ids))}")
    return np.array(nodes_order, dtype=int), np.array(facets_order, dtype=int)


def select_surrogate(mesh: StructuredQuadMesh, curve: CrackCurve, crack_id: int = 0) -> SurrogateInterface:
    """Staircase of interior facets separating opposite centroid labels.

    A facet is kept when its owners carry opposite ``side_of`` labels, at
    least one owner centroid projects to a non-endpoint point of the crack,
    and the facet midpoint lies within one element width of the crack.
    """
    cent = mesh.centroids()
    pb = geometry.project_points(curve, cent)
    val = np.einsum("ij,ij->i", -pb.gap, pb.normal)
    label = np.where(np.abs(val) < geometry.SIDE_TIE_TOL, 1, np.sign(val)).astype(int)
    clamped = pb.on_endpoint

    interior = ~mesh.boundary_facets
    fid = np.nonzero(interior)[0]
    e0, e1 = mesh.facet_owners[fid, 0], mesh.facet_owners[fid, 1]
    cand = (label[e0] != label[e1]) & ~(clamped[e0] & clamped[e1])
    fid = fid[cand]
    if fid.size:
        mid = mesh.nodes[mesh.facets[fid]].mean(axis=1)
        dist = np.linalg.norm(geometry.project_points(curve, mid).gap, axis=1)
        fid = fid[dist <= max(mesh.h) * (1 + 1e-12)]
    if fid.size == 0:
        raise ConfigurationError(f"crack {crack_id} produces an empty surrogate (outside the domain?)")

    path_nodes, ordered = _order_path(mesh, fid)
    # orient the path along increasing arc length
    s_ends = geometry.project_points(curve, mesh.nodes[path_nodes[[0, -1]]]).s
    if s_ends[0] > s_ends[1]:
        path_nodes, ordered = path_nodes[::-1].copy(), ordered[::-1].copy()

    own = mesh.facet_owners[ordered]
    lab = label[own]
    plus = np.where(lab[:, 0] > 0, own[:, 0], own[:, 1])
    minus = np.where(lab[:, 0] > 0, own[:, 1], own[:, 0])
    d = cent[plus] - cent[minus]
    normals = d / np.linalg.norm(d, axis=1)[:, None]
    facet_nodes = np.column_stack([path_nodes[:-1], path_nodes[1:]])
    ends = (bool(mesh.on_boundary(path_nodes[0])), bool(mesh.on_boundary(path_nodes[-1])))
    if mesh.is_corner(path_nodes[0]) or mesh.is_corner(path_nodes[-1]):
        raise UnsupportedConfigurationError(f"crack {crack_id} surrogate ends on a domain corner")
    for a in (ordered, minus, plus, normals, facet_nodes, path_nodes, label):
        a.setflags(write=False)
    return SurrogateInterface(crack_id, curve, ordered, minus, plus, normals, facet_nodes,
                              path_nodes, ends, label)


def dump_surrogate_csv(path, mesh: StructuredQuadMesh, surrogate: SurrogateInterface) -> None:
    """Debug dump: one row per element with its side label and surrogate facets."""
    facets_of = {}
    for k, f in enumerate(surrogate.facets):
        for e in (surrogate.minus_elem[k], surrogate.plus_elem[k]):
            facets_of.setdefault(int(e), []).append(int(f))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["element", "side", "surrogate_facets"])
        for e in range(mesh.n_elements):
            w.writerow([e, int(surrogate.element_side[e]), " ".join(map(str, facets_of.get(e, [])))])


# --------------------------------------------------------------------------
# split connectivity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SurrogateFacet:
    """One split surrogate facet with its two-sided node quadruple."""

    crack_id: int
    index: int                 # position along the crack's path
    facet: int
    plus_elem: int
    minus_elem: int
    normal: np.ndarray         # K- -> K+
    base_nodes: tuple          # (a, b) base ids in path order (xi = -1, +1)
    plus_nodes: tuple          # split ids of a, b seen from K+
    minus_nodes: tuple         # split ids of a, b seen from K-
    coords: np.ndarray         # (2, 2) endpoints

    @property
    def length(self) -> float:
        return float(np.linalg.norm(self.coords[1] - self.coords[0]))


@dataclass(frozen=True)
class SplitMesh:
    base: StructuredQuadMesh
    nodes: np.ndarray          # (N', 2)
    quads: np.ndarray          # (E, 4) split connectivity
    origin: np.ndarray         # (N',) base node id of each split node
    node_side: np.ndarray      # (N',) +1 plus copy, -1 minus copy, 0 single-valued
    dup_map: dict              # base id -> (plus id, minus id)
    surrogates: tuple          # SurrogateInterface per crack
    facets: tuple              # SurrogateFacet records, all cracks
    element_side: np.ndarray   # (n_cracks, E) centroid labels

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.quads.shape[0]

    @property
    def n_cracks(self) -> int:
        return len(self.surrogates)

    def crack_facets(self, crack_id: int) -> list[SurrogateFacet]:
        return [f for f in self.facets if f.crack_id == crack_id]


def split_along(mesh: StructuredQuadMesh, surrogates) -> SplitMesh:
    """Duplicate nodes along every surrogate path.

    Interior path nodes and path ends on the outer boundary are duplicated;
    ends in the interior (crack tips) stay single-valued.
    """
    surrogates = tuple(surrogates)
    seen_facets: dict[int, int] = {}
    seen_nodes: dict[int, int] = {}
    for sg in surrogates:
        for f in sg.facets:
            if int(f) in seen_facets:
                raise UnsupportedConfigurationError(
                    f"cracks {seen_facets[int(f)]} and {sg.crack_id} share surrogate facet {int(f)}")
            seen_facets[int(f)] = sg.crack_id
        for v in sg.path_nodes:
            if int(v) in seen_nodes:
                raise UnsupportedConfigurationError(
                    f"cracks {seen_nodes[int(v)]} and {sg.crack_id} share surrogate node {int(v)}")
            seen_nodes[int(v)] = sg.crack_id

    quads = mesh.quads.copy()
    coords = [mesh.nodes]
    origin = [np.arange(mesh.n_nodes)]
    node_side = np.zeros(mesh.n_nodes, dtype=int)
    side_ext = []
    dup_map: dict[int, tuple[int, int]] = {}
    next_id = mesh.n_nodes
    surrogate_facet_set = set(seen_facets)

    for sg in surrogates:
        P = len(sg.path_nodes)
        plus_of_facet = {int(f): int(e) for f, e in zip(sg.facets, sg.plus_elem)}
        minus_of_facet = {int(f): int(e) for f, e in zip(sg.facets, sg.minus_elem)}
        for k, v in enumerate(sg.path_nodes):
            v = int(v)
            is_end = k in (0, P - 1)
            if is_end and not sg.end_on_boundary[0 if k == 0 else 1]:
                continue
            elems = mesh.node_elements(v)
            # group elements around v through non-surrogate facets
            parent = {e: e for e in elems}

            def find(e):
                while parent[e] != e:
                    parent[e] = parent[parent[e]]
                    e = parent[e]
                return e

            for f in mesh.node_facets(v):
                if f in surrogate_facet_set:
                    continue
                e0, e1 = map(int, mesh.facet_owners[f])
                if e0 >= 0 and e1 >= 0:
                    parent[find(e0)] = find(e1)
            groups = {}
            for e in elems:
                groups.setdefault(find(e), []).append(e)
            group_side = {}
            for f in mesh.node_facets(v):
                if f in plus_of_facet:
                    for e, sgn in ((plus_of_facet[f], 1), (minus_of_facet[f], -1)):
                        r = find(e)
                        if group_side.setdefault(r, sgn) != sgn:
                            raise GeometryError(f"inconsistent side labels around node {v}")
            if len(groups) != 2 or len(group_side) != 2:
                raise GeometryError(f"node {v} of crack {sg.crack_id} does not separate into two sides")
            plus_root = next(r for r, s in group_side.items() if s > 0)
            new = next_id
            next_id += 1
            for e in groups[plus_root]:
                quads[e][quads[e] == v] = new
            coords.append(mesh.nodes[v][None, :])
            origin.append(np.array([v]))
            side_ext.append(1)
            node_side[v] = -1
            dup_map[v] = (new, v)

    nodes = np.vstack(coords)
    origin = np.concatenate(origin)
    node_side = np.concatenate([node_side, np.array(side_ext, dtype=int)])

    records = []
    for sg in surrogates:
        for k, f in enumerate(sg.facets):
            a, b = map(int, sg.facet_nodes[k])
            pe, me = int(sg.plus_elem[k]), int(sg.minus_elem[k])
            pn = tuple(_local_copy(quads[pe], mesh.quads[pe], v) for v in (a, b))
            mn = tuple(_local_copy(quads[me], mesh.quads[me], v) for v in (a, b))
            records.append(SurrogateFacet(sg.crack_id, k, int(f), pe, me, sg.normals[k].copy(),
                                          (a, b), pn, mn, mesh.nodes[[a, b]].copy()))

    elem_side = (np.array([sg.element_side for sg in surrogates]) if surrogates
                 else np.zeros((0, mesh.n_elements), dtype=int))
    for a in (nodes, quads, origin, node_side):
        a.setflags(write=False)
    return SplitMesh(mesh, nodes, quads, origin, node_side, dup_map, surrogates, tuple(records), elem_side)


def _local_copy(split_conn, base_conn, v) -> int:
    return int(split_conn[list(base_conn).index(v)])


# --------------------------------------------------------------------------
# shift geometry
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ShiftData:
    """Per-facet gap vectors and normal mismatch for one crack.

    Facet arrays have shape ``(F, Q, ...)`` for ``Q`` facet quadrature
    points; node arrays are aligned with the surrogate ``path_nodes``.
    """

    crack_id: int
    xi: np.ndarray             # (Q,) reference abscissae on [-1, 1]
    x: np.ndarray              # (F, Q, 2) surrogate points
    weight: np.ndarray         # (F, Q) physical quadrature weights on the facet
    gap: np.ndarray            # (F, Q, 2)
    normal: np.ndarray         # (F, Q, 2) true normal at the projection
    tangent: np.ndarray        # (F, Q, 2)
    cos_phi: np.ndarray        # (F, Q)
    n_perp: np.ndarray         # (F, Q, 2)
    s: np.ndarray              # (F, Q)
    on_endpoint: np.ndarray    # (F, Q)
    node_gap: np.ndarray       # (P, 2)
    node_normal: np.ndarray    # (P, 2)
    node_tangent: np.ndarray   # (P, 2)
    node_s: np.ndarray         # (P,)
    node_on_endpoint: np.ndarray
    flagged: np.ndarray        # (F,) facets with cos(phi) <= 0 somewhere

    @property
    def n_facets(self) -> int:
        return self.x.shape[0]


def shift_data(surrogate: SurrogateInterface, mesh: StructuredQuadMesh, rule=GAUSS2) -> ShiftData:
    """Project surrogate quadrature points and path nodes onto the true crack."""
    xi, wq = (np.asarray(r, dtype=float) for r in rule)
    curve = surrogate.curve
    A = mesh.nodes[surrogate.facet_nodes[:, 0]]
    B = mesh.nodes[surrogate.facet_nodes[:, 1]]
    F, Q = A.shape[0], xi.shape[0]
    X = 0.5 * (A + B)[:, None, :] + 0.5 * xi[None, :, None] * (B - A)[:, None, :]
    L = np.linalg.norm(B - A, axis=1)
    weight = 0.5 * L[:, None] * wq[None, :]

    pb = geometry.project_points(curve, X.reshape(-1, 2))
    nhat = pb.normal.reshape(F, Q, 2)
    nt = np.broadcast_to(surrogate.normals[:, None, :], (F, Q, 2))
    cos_phi = np.einsum("fqk,fqk->fq", nt, nhat)
    n_perp = nt - cos_phi[..., None] * nhat
    flagged = np.any(cos_phi <= 0.0, axis=1)
    if flagged.any():
        warnings.warn(f"crack {surrogate.crack_id}: {int(flagged.sum())} surrogate facets have "
                      "cos(phi) <= 0 (surrogate face nearly tangent to the crack)", RuntimeWarning)

    pn = geometry.project_points(curve, mesh.nodes[surrogate.path_nodes])
    return ShiftData(
        crack_id=surrogate.crack_id, xi=xi, x=X, weight=weight,
        gap=pb.gap.reshape(F, Q, 2), normal=nhat, tangent=pb.tangent.reshape(F, Q, 2),
        cos_phi=cos_phi, n_perp=n_perp, s=pb.s.reshape(F, Q),
        on_endpoint=pb.on_endpoint.reshape(F, Q),
        node_gap=pn.gap, node_normal=pn.normal, node_tangent=pn.tangent, node_s=pn.s,
        node_on_endpoint=pn.on_endpoint, flagged=flagged,
    )
