"""Reference-element machinery for Q1 pressure and Q1+bubble displacement.

Reference square ``[-1, 1]^2`` with corners ordered counterclockwise from
``(-1, -1)``.  Mesh elements are axis-aligned rectangles, so the map to
physical space is affine and second derivatives transform exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import AssemblyError, UsageError

Q1 = "Q1"
Q1_BUBBLE = "Q1Bubble"

CORNERS = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])


def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


@lru_cache(maxsize=None)
def tensor_rule(order: int = 3):
    """Tensor Gauss rule on the reference square (points ``(Q, 2)``, weights ``(Q,)``)."""
    x, w = gauss_legendre(order)
    X, Y = np.meshgrid(x, x, indexing="xy")
    W = np.outer(w, w)
    pts = np.column_stack([X.ravel(), Y.ravel()])
    pts.setflags(write=False)
    W = W.ravel()
    W.setflags(write=False)
    return pts, W


def _n_functions(family: str) -> int:
    if family == Q1:
        return 4
    if family == Q1_BUBBLE:
        return 5
    raise UsageError(f"unknown element family {family!r}")


def basis_tables(family: str, points):
    """Values, reference gradients and reference Hessians at many points.

    Returns ``N (Q, nb)``, ``dN (Q, nb, 2)`` and ``d2N (Q, nb, 2, 2)``.
    """
    nb = _n_functions(family)
    P = np.atleast_2d(np.asarray(points, dtype=float))
    xi, eta = P[:, 0], P[:, 1]
    Q = P.shape[0]
    N = np.empty((Q, nb))
    dN = np.zeros((Q, nb, 2))
    d2N = np.zeros((Q, nb, 2, 2))
    for a, (xa, ya) in enumerate(CORNERS):
        fx, fy = 1 + xa * xi, 1 + ya * eta
        N[:, a] = 0.25 * fx * fy
        dN[:, a, 0] = 0.25 * xa * fy
        dN[:, a, 1] = 0.25 * ya * fx
        d2N[:, a, 0, 1] = d2N[:, a, 1, 0] = 0.25 * xa * ya
    if nb == 5:
        bx, by = 1 - xi**2, 1 - eta**2
        N[:, 4] = bx * by
        dN[:, 4, 0] = -2 * xi * by
        dN[:, 4, 1] = -2 * eta * bx
        d2N[:, 4, 0, 0] = -2 * by
        d2N[:, 4, 1, 1] = -2 * bx
        d2N[:, 4, 0, 1] = d2N[:, 4, 1, 0] = 4 * xi * eta
    return N, dN, d2N


def eval_basis(family: str, point):
    """Values ``(nb,)`` and reference gradients ``(nb, 2)`` at one reference point."""
    N, dN, _ = basis_tables(family, np.asarray(point, dtype=float)[None, :])
    return N[0], dN[0]


@dataclass(frozen=True)
class RectMap:
    """Affine map of the reference square onto an axis-aligned rectangle."""

    center: np.ndarray
    half: np.ndarray           # (hx/2, hy/2)

    @property
    def det(self) -> float:
        return float(self.half[0] * self.half[1])

    @property
    def inv_jac(self) -> np.ndarray:
        return np.diag(1.0 / self.half)

    def to_physical(self, ref):
        return self.center + np.asarray(ref) * self.half

    def to_reference(self, x):
        return (np.asarray(x) - self.center) / self.half


def rect_map(coords) -> RectMap:
    """Map for an element given its 4 corner coordinates (CCW from lower-left)."""
    c = np.asarray(coords, dtype=float)
    lo, hi = c[0], c[2]
    half = 0.5 * (hi - lo)
    ok = (np.allclose(c[1], [hi[0], lo[1]], rtol=0, atol=1e-12 * (1 + abs(hi).max()))
          and np.allclose(c[3], [lo[0], hi[1]], rtol=0, atol=1e-12 * (1 + abs(hi).max())))
    if not ok or np.any(half <= 0):
        raise AssemblyError(f"element is not a positively oriented axis-aligned rectangle: {c.tolist()}")
    return RectMap(0.5 * (lo + hi), half)


def physical_derivatives(dN, d2N, rmap: RectMap):
    """Physical gradients and Hessians from reference tables."""
    s = 1.0 / rmap.half
    g = dN * s
    H = d2N * s[:, None] * s[None, :]
    return g, H


# --------------------------------------------------------------------------
# degrees of freedom
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DofMap:
    """Global numbering: p per node, u node-major, bubbles, then interface unknowns.

    Interface unknowns are grouped as ``q+ | q- | t+ | t-`` over all crack
    path nodes (cracks in order, nodes in path order); traction blocks are
    component-minor.
    """

    mode: str
    n_nodes: int
    n_elements: int
    path_offsets: tuple        # start of each crack's path-node range
    n_path_nodes: int

    @property
    def n_p(self) -> int:
        return self.n_nodes

    @property
    def n_u(self) -> int:
        return 2 * self.n_nodes + 2 * self.n_elements

    @property
    def n_z(self) -> int:
        return self.n_p + self.n_u

    @property
    def n_lambda(self) -> int:
        return 6 * self.n_path_nodes if self.mode == "strong" else 0

    @property
    def n_total(self) -> int:
        return self.n_z + self.n_lambda

    @property
    def u_offset(self) -> int:
        return self.n_p

    @property
    def bubble_offset(self) -> int:
        return self.n_p + 2 * self.n_nodes

    @property
    def lambda_offset(self) -> int:
        return self.n_z

    def p_dofs(self, nodes):
        return np.asarray(nodes, dtype=int)

    def u_dofs(self, nodes, comp):
        return self.n_p + 2 * np.asarray(nodes, dtype=int) + comp

    def element_u_dofs(self, conn, e) -> np.ndarray:
        """10 displacement dofs of element ``e``: corners (x, y) then bubble (x, y)."""
        conn = np.asarray(conn, dtype=int)
        d = np.empty(10, dtype=int)
        d[0:8:2] = self.n_p + 2 * conn
        d[1:8:2] = self.n_p + 2 * conn + 1
        d[8] = self.bubble_offset + 2 * e
        d[9] = self.bubble_offset + 2 * e + 1
        return d

    def all_element_u_dofs(self, quads) -> np.ndarray:
        E = quads.shape[0]
        d = np.empty((E, 10), dtype=int)
        d[:, 0:8:2] = self.n_p + 2 * quads
        d[:, 1:8:2] = self.n_p + 2 * quads + 1
        d[:, 8] = self.bubble_offset + 2 * np.arange(E)
        d[:, 9] = d[:, 8] + 1
        return d

    def _require_strong(self):
        if self.mode != "strong":
            raise UsageError("interface unknowns exist only in strong mode")

    def lambda_q(self, path_index, side: int) -> np.ndarray:
        self._require_strong()
        base = self.n_z + (0 if side > 0 else self.n_path_nodes)
        return base + np.asarray(path_index, dtype=int)

    def lambda_t(self, path_index, side: int, comp) -> np.ndarray:
        self._require_strong()
        base = self.n_z + (2 if side > 0 else 4) * self.n_path_nodes
        return base + 2 * np.asarray(path_index, dtype=int) + comp


def build_dof_map(split, mode: str = "weak") -> DofMap:
    if mode not in ("weak", "strong"):
        raise UsageError(f"enforcement mode must be 'weak' or 'strong', got {mode!r}")
    offsets, total = [], 0
    for sg in split.surrogates:
        offsets.append(total)
        total += len(sg.path_nodes)
    return DofMap(mode, split.n_nodes, split.n_elements, tuple(offsets), total)
