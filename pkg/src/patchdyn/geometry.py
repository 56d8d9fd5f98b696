"""Exact planar geometry on oriented polygonal contours.

A closed boundary is stored as an ordered list of vertices with implicit
closure (last vertex connects back to the first).  Counterclockwise
orientation carries positive signed area.  Areas, moments and perimeters are
exact per-edge polynomial contour integrals (Green's theorem); the
patch-vs-disk intersection is an exact circular-arc-aware clip, so the
L1 distance between a patch and a disk needs no quadrature at all.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray

import shapely
import shapely.affinity

from .errors import InvalidInputError

FloatArray = NDArray[np.float64]

#: On-boundary membership tolerance, in plane units.  Well below any mesh
#: spacing used by the builders or the remesher.
BOUNDARY_TOL = 1e-9


def _as_vertex_array(vertices, name: str = "vertices") -> FloatArray:
    arr = np.asarray(vertices, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise InvalidInputError(f"{name} must have shape (M, 2)")
    if not np.isfinite(arr).all():
        raise InvalidInputError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


class Contour:
    """Oriented closed polyline (implicit closure, no repeated endpoint).

    Parameters
    ----------
    vertices : (M, 2) array_like
        Vertex coordinates in traversal order, M >= 3.
    check_simple : bool
        Run the O(M log M) self-intersection test on construction.  Call
        sites that advance a boundary every time step disable it and test
        once per output frame instead.
    """

    __slots__ = ("vertices",)

    def __init__(self, vertices, *, check_simple: bool = True):
        arr = _as_vertex_array(vertices)
        if arr.shape[0] < 3:
            raise InvalidInputError(
                f"a contour needs at least 3 vertices, got {arr.shape[0]}"
            )
        gaps = np.linalg.norm(np.roll(arr, -1, axis=0) - arr, axis=1)
        if np.any(gaps == 0.0):
            raise InvalidInputError("contour has consecutive duplicate vertices")
        self.vertices = arr
        if check_simple and not self.is_simple():
            raise InvalidInputError("contour is not simple (self-intersecting)")

    def __len__(self) -> int:
        return self.vertices.shape[0]

    @property
    def is_ccw(self) -> bool:
        return signed_area(self) > 0.0

    def is_simple(self) -> bool:
        """Exact self-intersection test (GEOS sweepline)."""
        return bool(shapely.Polygon(self.vertices).is_valid)

    def reversed(self) -> "Contour":
        return Contour(self.vertices[::-1], check_simple=False)

    def translated(self, v) -> "Contour":
        return Contour(self.vertices + np.asarray(v, dtype=np.float64),
                       check_simple=False)

    def rotated(self, angle: float) -> "Contour":
        c, s = math.cos(angle), math.sin(angle)
        rot = np.array([[c, -s], [s, c]])
        return Contour(self.vertices @ rot.T, check_simple=False)

    def scaled(self, factor: float) -> "Contour":
        return Contour(self.vertices * factor, check_simple=False)

    def edge_lengths(self) -> FloatArray:
        return np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices,
                              axis=1)

    def to_shapely(self) -> shapely.Polygon:
        return shapely.Polygon(self.vertices)


class Patch:
    """Simply connected vorticity-1 region bounded by a single CCW contour."""

    __slots__ = ("boundary",)

    def __init__(self, boundary: Contour):
        area = signed_area(boundary)
        if area <= 0.0:
            raise InvalidInputError(
                "patch boundary must be counterclockwise with positive area"
            )
        self.boundary = boundary

    @property
    def vertices(self) -> FloatArray:
        return self.boundary.vertices

    def translated(self, v) -> "Patch":
        return Patch(self.boundary.translated(v))

    def rotated(self, angle: float) -> "Patch":
        return Patch(self.boundary.rotated(angle))


@dataclass(frozen=True, slots=True)
class Disk:
    """Disk B(center, radius), radius > 0."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        if not (self.radius > 0.0 and math.isfinite(self.radius)):
            raise InvalidInputError("disk radius must be positive and finite")

    @property
    def area(self) -> float:
        return math.pi * self.radius**2


# ---------------------------------------------------------------------------
# areas, moments, perimeters
# ---------------------------------------------------------------------------

def signed_area(c: Contour | FloatArray) -> float:
    """Shoelace signed area; positive for counterclockwise traversal."""
    v = c.vertices if isinstance(c, Contour) else _as_vertex_array(c)
    if v.shape[0] < 3:
        raise InvalidInputError("signed_area needs at least 3 vertices")
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return float(0.5 * np.sum(x * yn - xn * y))


def perimeter(c: Contour) -> float:
    """Sum of segment lengths of the closed polyline."""
    return float(c.edge_lengths().sum())


def moments(p: Patch) -> tuple[float, FloatArray, float]:
    """Mass, first moment and scalar second moment of the unit-vorticity patch.

    Returns ``(mass, first, second)`` with mass the enclosed area,
    ``first = integral of x dA`` and ``second = integral of |x|^2 dA``.
    All three are exact per-edge polynomial contour integrals, so they are
    exact for polygons up to round-off.
    """
    v = p.vertices
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    mass = 0.5 * float(np.sum(cross))
    fx = float(np.sum(cross * (x + xn))) / 6.0
    fy = float(np.sum(cross * (y + yn))) / 6.0
    sxx = float(np.sum(cross * (x * x + x * xn + xn * xn))) / 12.0
    syy = float(np.sum(cross * (y * y + y * yn + yn * yn))) / 12.0
    return mass, np.array([fx, fy]), sxx + syy


def moment_tensor(p: Patch) -> tuple[float, float, float]:
    """Exact (Ixx, Ixy, Iyy) = (int x^2, int xy, int y^2) over the patch."""
    v = p.vertices
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    ixx = float(np.sum(cross * (x * x + x * xn + xn * xn))) / 12.0
    iyy = float(np.sum(cross * (y * y + y * yn + yn * yn))) / 12.0
    ixy = float(np.sum(cross * (2 * x * y + x * yn + xn * y + 2 * xn * yn))) / 24.0
    return ixx, ixy, iyy


def centroid(p: Patch) -> FloatArray:
    mass, first, _ = moments(p)
    return first / mass


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------

def _crossing_parity(vertices: FloatArray, pts: FloatArray) -> NDArray[np.bool_]:
    """Even-odd ray casting, vectorized over points and edges."""
    x0, y0 = vertices[:, 0], vertices[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    px = pts[:, 0][:, None]
    py = pts[:, 1][:, None]
    # half-open vertical rule avoids double counting at shared vertices
    straddles = (y0[None, :] > py) != (y1[None, :] > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        xin = x0[None, :] + (py - y0[None, :]) * (x1 - x0)[None, :] / (y1 - y0)[None, :]
    hits = straddles & (px < xin)
    return np.bitwise_and(hits.sum(axis=1), 1).astype(bool)


def _distance_to_boundary(vertices: FloatArray, pts: FloatArray) -> FloatArray:
    """Min distance from each point to the closed polyline."""
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    e = b - a
    ee = np.einsum("ij,ij->i", e, e)
    d = pts[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", d, e) / ee[None, :], 0.0, 1.0)
    foot = a[None, :, :] + t[..., None] * e[None, :, :]
    dist = np.linalg.norm(pts[:, None, :] - foot, axis=2)
    return dist.min(axis=1)


def locate(p: Patch, x, tol: float = BOUNDARY_TOL) -> Literal["inside", "outside", "boundary"]:
    """Classify a point against the patch, flagging near-boundary points.

    Points within ``tol`` of the polyline are reported as ``"boundary"``
    rather than resolved to either side.
    """
    pt = np.asarray(x, dtype=np.float64).reshape(1, 2)
    if float(_distance_to_boundary(p.vertices, pt)[0]) <= tol:
        return "boundary"
    return "inside" if bool(_crossing_parity(p.vertices, pt)[0]) else "outside"


def contains(p: Patch, x) -> bool:
    """True iff the point lies strictly inside the patch."""
    pt = np.asarray(x, dtype=np.float64).reshape(1, 2)
    return bool(_crossing_parity(p.vertices, pt)[0])


def contains_many(p: Patch, pts) -> NDArray[np.bool_]:
    """Vectorized membership for a batch of points (chunked over edges)."""
    pts = _as_vertex_array(pts, "pts")
    out = np.empty(pts.shape[0], dtype=bool)
    step = max(1, int(4_000_000 // max(len(p.boundary), 1)))
    for lo in range(0, pts.shape[0], step):
        out[lo:lo + step] = _crossing_parity(p.vertices, pts[lo:lo + step])
    return out


# ---------------------------------------------------------------------------
# exact disk clipping
# ---------------------------------------------------------------------------

def _circle_clip_sum(px, py, qx, qy, r: float):
    """Signed area of triangle (0, p, q) clipped to the disk |x| <= r.

    Works on arrays of edges.  Each edge is split at its circle crossings
    into up to three pieces; inside pieces contribute a signed triangle
    (chord) area, outside pieces a signed circular sector.  Summed over the
    edges of a simple polygon this yields the exact polygon-disk
    intersection area.
    """
    dx = qx - px
    dy = qy - py
    a = dx * dx + dy * dy
    b = px * dx + py * dy
    c = px * px + py * py - r * r
    disc = b * b - a * c
    ok = disc > 0.0
    root = np.sqrt(np.where(ok, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(ok, np.clip((-b - root) / a, 0.0, 1.0), 0.0)
        t2 = np.where(ok, np.clip((-b + root) / a, 0.0, 1.0), 0.0)
    x1 = px + t1 * dx
    y1 = py + t1 * dy
    x2 = px + t2 * dx
    y2 = py + t2 * dy

    def sector(ux, uy, vx, vy):
        crossv = ux * vy - uy * vx
        dotv = ux * vx + uy * vy
        return 0.5 * r * r * np.arctan2(crossv, dotv)

    chord = 0.5 * (x1 * y2 - y1 * x2)
    return sector(px, py, x1, y1) + chord + sector(x2, y2, qx, qy)


def disk_intersection_area(p: Patch, d: Disk) -> float:
    """Exact area of the patch-disk intersection."""
    v = p.vertices - np.asarray(d.center, dtype=np.float64)
    w = np.roll(v, -1, axis=0)
    return float(np.sum(_circle_clip_sum(v[:, 0], v[:, 1], w[:, 0], w[:, 1],
                                         d.radius)))


def disk_intersection_area_many(p: Patch, centers, radius: float) -> FloatArray:
    """Intersection areas against disks of one radius at many centers."""
    centers = _as_vertex_array(centers, "centers")
    v = p.vertices
    w = np.roll(v, -1, axis=0)
    out = np.empty(centers.shape[0])
    step = max(1, int(2_000_000 // max(v.shape[0], 1)))
    for lo in range(0, centers.shape[0], step):
        cc = centers[lo:lo + step]
        px = v[None, :, 0] - cc[:, 0, None]
        py = v[None, :, 1] - cc[:, 1, None]
        qx = w[None, :, 0] - cc[:, 0, None]
        qy = w[None, :, 1] - cc[:, 1, None]
        out[lo:lo + step] = _circle_clip_sum(px, py, qx, qy, radius).sum(axis=1)
    return out


def disk_symmetric_difference(p: Patch, d: Disk) -> float:
    """|patch symdiff disk| = |patch| + pi r^2 - 2 |patch and disk|, exactly.

    For characteristic functions this equals the L1 distance between the
    patch vorticity and the disk indicator.
    """
    area = signed_area(p.boundary)
    inter = disk_intersection_area(p, d)
    return area + d.area - 2.0 * inter


def check_mfold_symmetry(p: Patch, m: int) -> float:
    """Symmetric-difference area between the patch and its 2*pi/m rotation.

    Zero means the patch is m-fold symmetric.  Computed with exact polygon
    booleans (GEOS); the opt-in quadrature oracle in the test-suite provides
    the independent route.
    """
    if m < 2:
        raise InvalidInputError("m-fold symmetry needs m >= 2")
    poly = p.boundary.to_shapely()
    rot = shapely.affinity.rotate(poly, 360.0 / m, origin=(0.0, 0.0))
    inter = poly.intersection(rot).area
    return poly.area + rot.area - 2.0 * inter


# ---------------------------------------------------------------------------
# distances and I/O
# ---------------------------------------------------------------------------

def hausdorff_distance(a: Contour, b: Contour) -> float:
    """Symmetric Hausdorff distance between the two vertex sets."""
    from scipy.spatial import cKDTree

    ta, tb = cKDTree(a.vertices), cKDTree(b.vertices)
    d_ab = ta.query(b.vertices)[0].max()
    d_ba = tb.query(a.vertices)[0].max()
    return float(max(d_ab, d_ba))


def write_contour_csv(path, c: Contour) -> None:
    """Plain-text exchange format: header ``x,y``, one vertex per row,
    counterclockwise, implicit closure."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y"])
        for vx, vy in c.vertices:
            writer.writerow([repr(float(vx)), repr(float(vy))])


def read_contour_csv(path_or_buf, *, check_simple: bool = True) -> Contour:
    if isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__"):
        fh = open(path_or_buf, newline="")
        close = True
    else:
        fh = path_or_buf
        close = False
    try:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header[:2]] != ["x", "y"]:
            raise InvalidInputError("contour CSV must start with an 'x,y' header")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    finally:
        if close:
            fh.close()
    return Contour(np.array(rows, dtype=np.float64), check_simple=check_simple)
