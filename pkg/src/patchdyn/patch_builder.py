"""Constructors for the initial data: Rankine disk, thin-armed patch,
Kirchhoff ellipse.

Every builder ends with a uniform radial rescale, so the enclosed polygon
area hits its target mass exactly (up to round-off), not just up to the
inscribed-polygon deficit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import InvalidInputError
from .geometry import Contour, Patch

TWO_PI = 2.0 * math.pi


def _regular_ring(n: int) -> np.ndarray:
    th = TWO_PI * np.arange(n) / n
    return np.column_stack([np.cos(th), np.sin(th)])


def rankine(r: float = 1.0, vertices: int = 512) -> Patch:
    """Regular-polygon approximation of the disk B(0, r), area exactly pi r^2."""
    if not r > 0:
        raise InvalidInputError("radius must be positive")
    if vertices < 16:
        raise InvalidInputError("need at least 16 vertices")
    ring = _regular_ring(vertices)
    area = 0.5 * vertices * math.sin(TWO_PI / vertices)
    ring *= r * math.sqrt(math.pi / area)
    return Patch(Contour(ring, check_simple=False))


def kirchhoff_ellipse(a: float, b: float, vertices: int = 512) -> Patch:
    """Polygonal ellipse with semi-axes a >= b > 0, area exactly pi a b.

    Classical validation case: the exact patch rotates rigidly at rate
    a b / (a + b)^2 under unit vorticity.
    """
    if not (a >= b > 0):
        raise InvalidInputError("need a >= b > 0")
    # equal-arc-length sampling keeps the node spacing uniform
    fine = TWO_PI * np.arange(8192) / 8192
    pts = np.column_stack([a * np.cos(fine), b * np.sin(fine)])
    seg = np.linalg.norm(np.diff(pts, axis=0, append=pts[:1]), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    total = arc[-1]
    want = total * np.arange(vertices) / vertices
    phi = np.interp(want, arc, np.concatenate([fine, [TWO_PI]]))
    v = np.column_stack([a * np.cos(phi), b * np.sin(phi)])
    v *= math.sqrt(math.pi * a * b / geometry.signed_area(v))
    return Patch(Contour(v, check_simple=False))


# ---------------------------------------------------------------------------
# the m-armed patch
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class ArmedPatchSpec:
    """Near-unit disk with m thin radial arms of length N and total arm area gamma.

    The default profile is a constant-width arm (width gamma/(m N)) with a
    semicircular tip cap and a root fillet of radius equal to the width, so
    the boundary is star-shaped about the origin and has no corners sharper
    than the width scale.  ``resolution`` is the target vertex spacing along
    the base circle and the arm sides; caps and fillets are sampled at the
    width scale regardless.
    """

    m: int = 3
    N: float = 5.0
    gamma: float = 0.05
    resolution: float = 0.02
    arm_profile: str = "constant"

    def __post_init__(self):
        if self.m < 2:
            raise InvalidInputError("m must be >= 2")
        if not (self.N > 0 and self.gamma > 0 and self.resolution > 0):
            raise InvalidInputError("N, gamma, resolution must be positive")
        if self.arm_profile != "constant":
            raise InvalidInputError("only the constant-width profile is implemented")

    @property
    def width(self) -> float:
        return self.gamma / (self.m * self.N)


def _arm_angles(spec: ArmedPatchSpec, rho: float):
    """Piecewise breakpoints of the arm profile in sector-local angle."""
    w = spec.width
    f = w  # fillet radius
    tip_c = rho + spec.N - 0.5 * w
    if 0.5 * w >= rho:
        raise InvalidInputError("arm width exceeds the disk radius")
    yc = 0.5 * w + f
    if (rho + f) <= yc:
        raise InvalidInputError("fillet does not fit the disk")
    xc = math.sqrt((rho + f) ** 2 - yc**2)
    phi_tip = math.atan2(0.5 * w, tip_c)
    phi_side = math.atan2(0.5 * w, xc)
    phi_fillet = math.atan2(yc, xc)
    return w, f, tip_c, xc, yc, phi_tip, phi_side, phi_fillet


def _half_sector_profile(spec: ArmedPatchSpec, rho: float):
    """Polar samples (phi, r) for phi in [0, pi/m], arm apex at phi = 0."""
    m = spec.m
    w, f, tip_c, xc, yc, phi_tip, phi_side, phi_fillet = _arm_angles(spec, rho)
    sector = math.pi / m
    if not (phi_tip < phi_side < phi_fillet < 0.9 * sector):
        raise InvalidInputError("arm pieces overlap the sector; gamma too large")

    phis: list[float] = []
    rs: list[float] = []

    # tip cap: r = tip_c cos(phi) + sqrt((w/2)^2 - (tip_c sin(phi))^2)
    n_cap = max(3, int(math.ceil((math.pi * w / 4) / min(spec.resolution, w / 3))))
    for k in range(n_cap):
        phi = phi_tip * k / n_cap
        s = tip_c * math.sin(phi)
        phis.append(phi)
        rs.append(tip_c * math.cos(phi) + math.sqrt(max((0.5 * w) ** 2 - s * s, 0.0)))

    # straight side, uniform in radius
    r_hi = 0.5 * w / math.sin(phi_tip)
    r_lo = 0.5 * w / math.sin(phi_side)
    n_side = max(4, int(math.ceil((r_hi - r_lo) / spec.resolution)))
    for k in range(n_side):
        r = r_hi + (r_lo - r_hi) * k / n_side
        phis.append(math.asin(0.5 * w / r))
        rs.append(r)

    # root fillet: near branch of the fillet circle
    n_fil = max(4, int(math.ceil((phi_fillet - phi_side) * (rho + f)
                                 / min(spec.resolution, f / 2))))
    for k in range(n_fil):
        phi = phi_side + (phi_fillet - phi_side) * k / n_fil
        a = xc * math.cos(phi) + yc * math.sin(phi)
        b = yc * math.cos(phi) - xc * math.sin(phi)
        phis.append(phi)
        rs.append(a - math.sqrt(max(f * f - b * b, 0.0)))

    # base circle up to the sector edge
    n_base = max(4, int(math.ceil((sector - phi_fillet) * rho / spec.resolution)))
    for k in range(n_base + 1):
        phis.append(phi_fillet + (sector - phi_fillet) * k / n_base)
        rs.append(rho)

    return np.asarray(phis), np.asarray(rs)


def _armed_vertices(spec: ArmedPatchSpec, rho: float) -> np.ndarray:
    phis, rs = _half_sector_profile(spec, rho)
    # mirror into the full sector [-pi/m, pi/m); drop both half-endpoints on
    # the mirrored side to avoid duplicates
    phi_full = np.concatenate([-phis[1:][::-1][1:], phis])
    r_full = np.concatenate([rs[1:][::-1][1:], rs])
    vertices = []
    for k in range(spec.m):
        ang = phi_full + TWO_PI * k / spec.m
        vertices.append(np.column_stack([r_full * np.cos(ang),
                                         r_full * np.sin(ang)]))
    return np.concatenate(vertices)


def max_feasible_gamma(m: int, N: float, resolution: float = 0.02) -> float:
    """Largest combined arm area for which the construction stays embedded."""
    lo, hi = 1e-9, math.pi * 0.98
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        try:
            spec = ArmedPatchSpec(m=m, N=N, gamma=mid, resolution=resolution)
            rho = math.sqrt(max(1.0 - mid / math.pi, 1e-12))
            _half_sector_profile(spec, rho)
            lo = mid
        except InvalidInputError:
            hi = mid
    return lo


def armed_patch(spec: ArmedPatchSpec) -> Patch:
    """Build the m-armed patch: total area exactly pi, m-fold symmetric by
    construction, star-shaped about the origin.

    Raises ``InvalidInputError`` naming the maximal feasible gamma when the
    arms would overlap or the disk cannot absorb the arm area.
    """
    if spec.gamma >= math.pi * 0.9:
        raise InvalidInputError(
            f"gamma={spec.gamma} infeasible (arms would overlap); "
            f"max feasible gamma ~= {max_feasible_gamma(spec.m, spec.N):.3f}")
    rho = math.sqrt(1.0 - spec.gamma / math.pi)
    try:
        # secant on the base radius so the polygon area hits pi
        area = geometry.signed_area(_armed_vertices(spec, rho))
        rho2 = rho * math.sqrt(1 + (math.pi - area) / (math.pi * rho * rho))
        for _ in range(3):
            a2 = geometry.signed_area(_armed_vertices(spec, rho2))
            if abs(a2 - math.pi) < 1e-12:
                break
            d_area = (a2 - area) / (rho2 - rho) if rho2 != rho else 2 * math.pi * rho
            rho, area = rho2, a2
            rho2 = rho + (math.pi - area) / d_area
        v = _armed_vertices(spec, rho2)
    except InvalidInputError as exc:
        raise InvalidInputError(
            f"{exc}; max feasible gamma ~= "
            f"{max_feasible_gamma(spec.m, spec.N, spec.resolution):.3f}") from exc
    v *= math.sqrt(math.pi / geometry.signed_area(v))
    return Patch(Contour(v, check_simple=True))
