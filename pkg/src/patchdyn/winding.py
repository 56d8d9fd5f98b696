"""Universal-cover lift of the Lagrangian flow and bucket diagnostics.

Marker trajectories are integrated directly in lifted polar coordinates, so
their winding angle is a continuous real number by construction.  The
boundary is lifted per frame by unwrapping vertex angles along the
traversal; since the boundary is a degree-1 curve about the origin, the
total angle increase over one traversal is exactly 2 pi.

Buckets: vertical rays above the per-period radial maximizers of the lifted
boundary split the exterior into disjoint buckets, one per period.  Bucket
labels are coherent in time by tracking the maximizer angle continuously
across frames (the per-frame "first maximizer" alone is only defined modulo
the period and would make drift counts gauge-dependent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import geometry
from .dynamics import FlowState, MarkerSet
from .errors import InvalidInputError
from .geometry import Contour, Patch

FloatArray = NDArray[np.float64]

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True, slots=True)
class LiftedMarker:
    """One marker in the cover: continuous angle, radius, seed data, side flag."""

    id: int
    theta: float
    r: float
    theta0: float
    r0: float
    exterior: bool


def lifted_markers(m: MarkerSet) -> list[LiftedMarker]:
    return [LiftedMarker(int(m.ids[i]), float(m.theta[i]), float(m.r[i]),
                         float(m.theta0[i]), float(m.r0[i]), bool(m.exterior0[i]))
            for i in range(len(m))]


# ---------------------------------------------------------------------------
# boundary lift
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class LiftedBoundary:
    """Continuous (theta, r) polyline of one boundary traversal."""

    theta: FloatArray
    r: FloatArray

    def rebased(self, shift_periods: int) -> "LiftedBoundary":
        return LiftedBoundary(self.theta + TWO_PI * shift_periods, self.r)


def lift_boundary(state: FlowState | Contour) -> LiftedBoundary:
    """Lift the boundary to the cover over one fundamental period.

    Requires the boundary to stay away from the origin; consecutive angular
    increments are below pi for any remeshed boundary, so the unwrap is
    exact.  Raises when the total angle increase over the traversal is not
    2 pi (the boundary must be a degree-1 curve about the origin).
    """
    c = state.contour if isinstance(state, FlowState) else state
    v = c.vertices
    r = np.linalg.norm(v, axis=1)
    if float(r.min()) < 1e-6:
        raise InvalidInputError("boundary passes within 1e-6 of the origin; "
                                "lift undefined")
    raw = np.arctan2(v[:, 1], v[:, 0])
    d = np.diff(raw, append=raw[:1])
    d = (d + math.pi) % TWO_PI - math.pi
    if np.any(np.abs(d) >= math.pi * (1 - 1e-12)):
        raise InvalidInputError("angular increment >= pi between neighbors; "
                                "refine the boundary before lifting")
    total = float(d.sum())
    if abs(total - TWO_PI) > 1e-9:
        raise InvalidInputError(
            f"lifted boundary winds {total/TWO_PI:.6f} periods, expected 1")
    theta = raw[0] + np.concatenate([[0.0], np.cumsum(d[:-1])])
    return LiftedBoundary(theta, r)


def find_maximizers(lift: LiftedBoundary, periods=range(0, 1), *,
                    plateau_rtol: float = 1e-9) -> list[tuple[float, float]]:
    """First (leftmost) radial maximizer of each requested period copy.

    Points within ``plateau_rtol`` (relative) of the global maximum count as
    the maximum; the deterministic tie-break takes the smallest lifted angle,
    matching a left-to-right traversal of a plateau.
    """
    rmax = float(lift.r.max())
    band = plateau_rtol * max(1.0, rmax)
    on_plateau = lift.r >= rmax - band
    theta_star = float(lift.theta[on_plateau].min())
    return [(theta_star + TWO_PI * n, rmax) for n in periods]


# ---------------------------------------------------------------------------
# bucket decomposition
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class BucketDecomposition:
    """Frame decomposition of the exterior into buckets.

    ``theta_star`` is the lifted angle of the maximizer M^0; the ray above
    M^n sits at theta_star + 2 pi n and bucket B^n spans
    (theta_star + 2 pi (n-1), theta_star + 2 pi n], right boundary included.
    ``buckets`` maps exterior marker ids to bucket indices.
    """

    time: float
    lift: LiftedBoundary
    theta_star: float
    r_max: float
    buckets: dict[int, int] = field(default_factory=dict)

    def maximizers(self, periods=range(0, 1)) -> list[tuple[float, float]]:
        return [(self.theta_star + TWO_PI * n, self.r_max) for n in periods]


def bucket_index(marker_theta: float, decomposition: BucketDecomposition) -> int:
    """Label of the bucket containing a point with the given lifted angle.

    Buckets contain their right boundary: a marker exactly on the ray above
    M^n belongs to B^n.
    """
    x = (marker_theta - decomposition.theta_star) / TWO_PI
    return int(math.ceil(x - 1e-12))


def decompose(state: FlowState, *, prev_theta_star: float | None = None,
              plateau_band_rel: float = 1e-3,
              patch: Patch | None = None) -> BucketDecomposition:
    """Decompose one frame, assigning every exterior marker its bucket index.

    With ``prev_theta_star`` the maximizer is tracked continuously: among
    local maxima within the plateau band of the global maximum (all period
    shifts), the one closest to the previous value wins.  This keeps bucket
    labels comparable across frames; for an m-fold symmetric patch the m
    arm tips tie to round-off and the per-frame "first" rule alone would
    hop between them.
    """
    lift = lift_boundary(state)
    rmax = float(lift.r.max())
    band = plateau_band_rel * max(1.0, rmax)
    if prev_theta_star is None:
        theta_star = float(lift.theta[lift.r >= rmax - 1e-9 * max(1.0, rmax)].min())
    else:
        cand = lift.theta[lift.r >= rmax - band]
        # shift every candidate by whole periods next to the previous value
        shifted = cand + TWO_PI * np.round((prev_theta_star - cand) / TWO_PI)
        theta_star = float(shifted[np.argmin(np.abs(shifted - prev_theta_star))])
    dec = BucketDecomposition(state.t, lift, theta_star, rmax)
    m = state.markers
    if len(m):
        p = patch if patch is not None else Patch(state.contour)
        inside = geometry.contains_many(p, m.positions())
        for i in range(len(m)):
            if not inside[i]:
                dec.buckets[int(m.ids[i])] = bucket_index(float(m.theta[i]), dec)
    return dec


# ---------------------------------------------------------------------------
# drift statistics
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class BucketDriftReport:
    """Per-marker bucket index series and window-increment statistics."""

    times: FloatArray
    series: dict[int, FloatArray]          # marker id -> N(t); NaN once interior
    truncated: dict[int, float]            # id -> time of first interior entry
    window: float
    max_abs_drift: dict[int, int]
    max_window_increment: int

    def window_increments(self, marker_id: int) -> FloatArray:
        n = self.series[marker_id]
        t = self.times
        out = []
        for i in range(len(t)):
            j = np.searchsorted(t, t[i] + self.window)
            if j >= len(t):
                break
            if math.isnan(n[i]) or math.isnan(n[j]):
                continue
            out.append(abs(n[j] - n[i]))
        return np.asarray(out, dtype=np.float64)


def default_window(initial: FlowState) -> float:
    """Window length for the slow-overtaking check: min(R, 1/delta0)/2.

    R is the outer radius of the initial boundary (the arm-tip radius) and
    delta0 the initial L1 deviation from the equal-mass centered disk.
    """
    patch = Patch(initial.contour)
    mass = geometry.signed_area(initial.contour)
    rstar = math.sqrt(mass / math.pi)
    delta0 = geometry.disk_symmetric_difference(
        patch, geometry.Disk((0.0, 0.0), rstar))
    big_r = float(np.linalg.norm(initial.contour.vertices, axis=1).max())
    return 0.5 * min(big_r, 1.0 / max(delta0, 1e-12))


def bucket_drift(states: list[FlowState], *, window: float | None = None,
                 plateau_band_rel: float = 1e-3) -> BucketDriftReport:
    """Bucket index series N(t) for every marker, with drift statistics.

    Markers must be exterior; a marker entering the patch has its series
    truncated (NaN afterwards) and is flagged with the entry time.
    """
    if not states:
        raise InvalidInputError("empty trajectory")
    window = default_window(states[0]) if window is None else window
    times = np.array([s.t for s in states])
    ids = [int(i) for i in states[0].markers.ids]
    series = {i: np.full(len(states), np.nan) for i in ids}
    truncated: dict[int, float] = {}
    theta_star = None
    for k, s in enumerate(states):
        dec = decompose(s, prev_theta_star=theta_star,
                        plateau_band_rel=plateau_band_rel)
        theta_star = dec.theta_star
        for i in ids:
            if i in truncated:
                continue
            if i in dec.buckets:
                series[i][k] = dec.buckets[i]
            else:
                truncated[i] = float(s.t)
    max_abs = {}
    max_window_inc = 0
    report = BucketDriftReport(times, series, truncated, window, {}, 0)
    for i in ids:
        n = series[i]
        valid = ~np.isnan(n)
        if valid.sum() == 0:
            continue
        n0 = n[valid][0]
        max_abs[i] = int(np.nanmax(np.abs(n - n0)))
        inc = report.window_increments(i)
        if inc.size:
            max_window_inc = max(max_window_inc, int(inc.max()))
    report.max_abs_drift = max_abs
    report.max_window_increment = max_window_inc
    return report


# ---------------------------------------------------------------------------
# shear and perimeter bound
# ---------------------------------------------------------------------------

def shear_norm(state: FlowState) -> float:
    """Weighted-L2 shear defect of the marker ensemble at time t.

    Measures || theta(t) - theta0 - t * rate(r(t)) || with the true Rankine
    rotation rate as reference, weighted by each marker's seeding cell area.
    Identically zero (up to integrator error) for the exact Rankine flow.
    """
    from .dynamics import rankine_rotation_rate

    m = state.markers
    if len(m) == 0:
        return 0.0
    defect = m.theta - m.theta0 - state.t * rankine_rotation_rate(m.r)
    w = m.weight / m.weight.sum()
    return float(math.sqrt(float(np.sum(w * defect**2))))


def winding_spread(state: FlowState | Contour, r0: float) -> float:
    """Lifted-angle spread of boundary points at radius >= r0, beyond the
    trivial 2 pi of one traversal.  Zero when no point qualifies."""
    lift = lift_boundary(state)
    sel = lift.r >= r0
    if not np.any(sel):
        return 0.0
    span = float(lift.theta[sel].max() - lift.theta[sel].min())
    return max(span - TWO_PI, 0.0)


def winding_spread_bound(state: FlowState | Contour, r0: float) -> float:
    """Certified perimeter lower bound from the winding spread at radius r0.

    Twice the radius times the angular spread, minus one, clamped at zero:
    both boundary arcs joining the extremal points must each sweep the
    angular gap at radius >= r0 somewhere along the way.  Sound by
    construction on Rankine data (spread 0) and checked against the
    measured perimeter on every frame of every run.
    """
    spread = winding_spread(state, r0)
    return max(2.0 * r0 * spread - 1.0, 0.0)
