"""True crack curves: construction, closest-point projection and side tests.

Cracks are open polylines.  The reference normal at any point is the
left-hand normal of the local tangent, i.e. ``n = (-t_y, t_x)``.  Units are
km throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import ConfigurationError

SEGMENT_MIN_LENGTH = 1e-12
SIDE_TIE_TOL = 1e-14


@dataclass(frozen=True)
class CrackCurve:
    """Open piecewise-linear curve with arc-length parameterization."""

    vertices: np.ndarray
    arclength: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 2:
            raise ConfigurationError("a crack needs at least two 2D vertices")
        seg = np.linalg.norm(np.diff(v, axis=0), axis=1)
        if np.any(seg <= SEGMENT_MIN_LENGTH):
            raise ConfigurationError("consecutive crack vertices must be distinct")
        v.setflags(write=False)
        s = np.concatenate([[0.0], np.cumsum(seg)])
        s.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "arclength", s)

    @property
    def closed(self) -> bool:
        return False

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    @property
    def n_segments(self) -> int:
        return self.vertices.shape[0] - 1

    def segment_tangents(self) -> np.ndarray:
        d = np.diff(self.vertices, axis=0)
        return d / np.linalg.norm(d, axis=1)[:, None]

    def segment_normals(self) -> np.ndarray:
        t = self.segment_tangents()
        return np.column_stack([-t[:, 1], t[:, 0]])

    def point_at(self, s: float) -> np.ndarray:
        """Point at arc-length ``s`` (clamped to the curve)."""
        s = min(max(float(s), 0.0), self.length)
        k = int(np.searchsorted(self.arclength, s, side="right") - 1)
        k = min(k, self.n_segments - 1)
        t = (s - self.arclength[k]) / (self.arclength[k + 1] - self.arclength[k])
        return (1 - t) * self.vertices[k] + t * self.vertices[k + 1]


@dataclass(frozen=True)
class Projection:
    """Closest point on a crack for one query point."""

    point: np.ndarray
    s: float
    tangent: np.ndarray
    normal: np.ndarray
    gap: np.ndarray
    on_endpoint: bool


@dataclass(frozen=True)
class ProjectionBatch:
    """Vectorized result of projecting many points (row-aligned arrays)."""

    point: np.ndarray
    s: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    gap: np.ndarray
    on_endpoint: np.ndarray

    def __len__(self):
        return self.s.shape[0]

    def __getitem__(self, i) -> Projection:
        return Projection(self.point[i], float(self.s[i]), self.tangent[i],
                          self.normal[i], self.gap[i], bool(self.on_endpoint[i]))


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

def _direction(angle) -> np.ndarray:
    """Unit vector at ``angle``; round-off components of axis directions are snapped to 0."""
    d = np.array([math.cos(angle), math.sin(angle)])
    d[np.abs(d) < 1e-15] = 0.0
    return d


def segment(center, length, angle) -> CrackCurve:
    if not length > 0:
        raise ConfigurationError("segment length must be positive")
    c = np.asarray(center, dtype=float)
    d = 0.5 * length * _direction(angle)
    return CrackCurve(np.array([c - d, c + d]))


def clipped_line(center, angle, box=((-0.5, 0.5), (-0.5, 0.5))) -> CrackCurve:
    """Infinite line through ``center`` at ``angle`` clipped to ``box``."""
    c = np.asarray(center, dtype=float)
    d = _direction(angle)
    (x0, x1), (y0, y1) = box
    if not (x0 < c[0] < x1 and y0 < c[1] < y1):
        raise ConfigurationError("clipped_line center must lie inside the box")
    tmin, tmax = -np.inf, np.inf
    for k, (lo, hi) in enumerate(((x0, x1), (y0, y1))):
        if abs(d[k]) > 1e-15:
            ta, tb = (lo - c[k]) / d[k], (hi - c[k]) / d[k]
            tmin = max(tmin, min(ta, tb))
            tmax = min(tmax, max(ta, tb))
    return CrackCurve(np.array([c + tmin * d, c + tmax * d]))


def arc_polyline(center, radius, span_deg, n_seg, mid_angle_deg=180.0) -> CrackCurve:
    """Polyline with ``n_seg`` chords inscribed on a circular arc.

    The arc is centred on the direction ``mid_angle_deg`` and traversed
    counterclockwise, so the reference normal points towards the centre.
    """
    if not radius > 0 or not span_deg > 0 or int(n_seg) < 1:
        raise ConfigurationError("arc needs radius > 0, span > 0 and n_seg >= 1")
    if span_deg >= 360.0:
        raise ConfigurationError("arc span must be below 360 degrees (open curve)")
    c = np.asarray(center, dtype=float)
    mid = math.radians(mid_angle_deg)
    half = 0.5 * math.radians(span_deg)
    th = np.linspace(mid - half, mid + half, int(n_seg) + 1)
    return CrackCurve(c + radius * np.column_stack([np.cos(th), np.sin(th)]))


def sine_curve(center, extent, amplitude, n_seg=64) -> CrackCurve:
    """One full sine period ``y = yc + A sin(2 pi (x - xc) / L)`` over ``|x - xc| <= L/2``."""
    if not extent > 0 or int(n_seg) < 1:
        raise ConfigurationError("sine curve needs extent > 0 and n_seg >= 1")
    xc, yc = map(float, center)
    x = np.linspace(xc - 0.5 * extent, xc + 0.5 * extent, int(n_seg) + 1)
    y = yc + amplitude * np.sin(2.0 * np.pi * (x - xc) / extent)
    return CrackCurve(np.column_stack([x, y]))


def parabola_polyline(center, half_width, height, n_seg=8) -> CrackCurve:
    """Parabolic cap spanning the box ``center +- (half_width, height/2)``.

    Apex at ``(xc, yc + height/2)``, endpoints at ``(xc +- half_width, yc - height/2)``.
    """
    if not half_width > 0 or not height > 0 or int(n_seg) < 1:
        raise ConfigurationError("parabola needs half_width > 0, height > 0, n_seg >= 1")
    xc, yc = map(float, center)
    x = np.linspace(xc - half_width, xc + half_width, int(n_seg) + 1)
    y = yc + 0.5 * height - height * ((x - xc) / half_width) ** 2
    return CrackCurve(np.column_stack([x, y]))


def polyline(vertices) -> CrackCurve:
    return CrackCurve(np.asarray(vertices, dtype=float))


_GENERATORS = {
    "segment": segment,
    "clipped_line": clipped_line,
    "arc_polyline": arc_polyline,
    "sine_curve": sine_curve,
    "parabola_polyline": parabola_polyline,
    "polyline": polyline,
}


def make_crack(descriptor: Mapping[str, Any]) -> CrackCurve:
    """Build a crack from a descriptor such as ``{"kind": "segment", ...}``.

    The remaining keys are passed as keyword arguments to the generator of
    that name: ``segment``, ``clipped_line``, ``arc_polyline``,
    ``sine_curve``, ``parabola_polyline`` or ``polyline``.
    """
    params = dict(descriptor)
    kind = params.pop("kind", None)
    if kind not in _GENERATORS:
        raise ConfigurationError(f"unknown crack kind {kind!r}; expected one of {sorted(_GENERATORS)}")
    try:
        return _GENERATORS[kind](**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for crack kind {kind!r}: {exc}") from exc


# --------------------------------------------------------------------------
# projection
# --------------------------------------------------------------------------

def _vertex_normals(curve: CrackCurve) -> np.ndarray:
    sn = curve.segment_normals()
    vn = np.empty((curve.vertices.shape[0], 2))
    vn[0], vn[-1] = sn[0], sn[-1]
    if curve.n_segments > 1:
        avg = sn[:-1] + sn[1:]
        vn[1:-1] = avg / np.linalg.norm(avg, axis=1)[:, None]
    return vn


def project_points(curve: CrackCurve, X) -> ProjectionBatch:
    """Globally nearest points on ``curve`` for every row of ``X``.

    Equidistant candidates resolve to the smallest arc length.  A foot that
    lands on an interior vertex takes the averaged normal of the two adjacent
    segments.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    A = curve.vertices[:-1]
    D = np.diff(curve.vertices, axis=0)
    L2 = np.einsum("ij,ij->i", D, D)
    # (npts, nseg)
    rel = X[:, None, :] - A[None, :, :]
    t = np.clip(np.einsum("psk,sk->ps", rel, D) / L2[None, :], 0.0, 1.0)
    foot = A[None, :, :] + t[..., None] * D[None, :, :]
    dist = np.linalg.norm(foot - X[:, None, :], axis=2)
    s_all = curve.arclength[:-1][None, :] + t * np.sqrt(L2)[None, :]

    dmin = dist.min(axis=1, keepdims=True)
    tie = dist <= dmin + 1e-14 * (1.0 + dmin)
    s_masked = np.where(tie, s_all, np.inf)
    k = np.argmin(s_masked, axis=1)
    rows = np.arange(X.shape[0])
    tk = t[rows, k]
    pt = foot[rows, k]
    s = s_all[rows, k]

    seg_n = curve.segment_normals()
    vn = _vertex_normals(curve)
    normal = seg_n[k].copy()
    nseg = curve.n_segments
    at_start = tk <= 0.0
    at_end = tk >= 1.0
    # interior vertex hits get the averaged normal
    iv_start = at_start & (k > 0)
    iv_end = at_end & (k < nseg - 1)
    normal[iv_start] = vn[k[iv_start]]
    normal[iv_end] = vn[k[iv_end] + 1]
    tangent = np.column_stack([normal[:, 1], -normal[:, 0]])
    on_endpoint = (at_start & (k == 0)) | (at_end & (k == nseg - 1))
    return ProjectionBatch(pt, s, tangent, normal, pt - X, on_endpoint)


def project_to_crack(curve: CrackCurve, x) -> Projection:
    return project_points(curve, np.asarray(x, dtype=float)[None, :])[0]


def side_values(curve: CrackCurve, X) -> np.ndarray:
    """Signs in {+1, -1} of ``(x - P(x)) . n`` for many points."""
    pb = project_points(curve, X)
    val = np.einsum("ij,ij->i", -pb.gap, pb.normal)
    return np.where(np.abs(val) < SIDE_TIE_TOL, 1, np.sign(val)).astype(int)


def side_of(curve: CrackCurve, x) -> int:
    return int(side_values(curve, np.asarray(x, dtype=float)[None, :])[0])
