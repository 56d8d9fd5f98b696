"""Contour-dynamics time evolution of vortex patches under 2D Euler.

The velocity of a unit-vorticity patch reduces exactly to a boundary
integral of the log kernel; each straight segment is integrated in closed
form (see ``kernels``).  Boundary nodes and Lagrangian markers advance with
classic fixed-step RK4.  Markers are integrated directly in lifted polar
coordinates (theta real-valued, never wrapped), which keeps winding numbers
exact without unwrap heuristics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from . import functionals, geometry, kernels
from .errors import CFLError, InvalidInputError
from .functionals import FunctionalReport
from .geometry import Contour, Disk, Patch

FloatArray = NDArray[np.float64]

TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# the Rankine reference field
# ---------------------------------------------------------------------------

def rankine_mu(r):
    """The stated Rankine profile: 1/2 for r <= 1, 1/(2r) for r >= 1.

    Continuous at r = 1.  Inside the patch this is the angular velocity;
    outside it equals the linear speed |u|(r), not the angular rate (the
    true tangential speed of the unit Rankine patch is min(r, 1/r)/2).
    """
    r = np.asarray(r, dtype=np.float64)
    return np.where(r <= 1.0, 0.5, 0.5 / np.maximum(r, 1e-300))


def rankine_rotation_rate(r):
    """True angular velocity of the unit Rankine patch: 1/2, then 1/(2 r^2).

    This is d(theta)/dt of a tracer at radius r, the reference used by the
    shear diagnostics (a tracer of the exact Rankine flow satisfies
    theta(t) = theta0 + t * rate(r) identically).
    """
    r = np.asarray(r, dtype=np.float64)
    return np.where(r <= 1.0, 0.5, 0.5 / np.maximum(r * r, 1e-300))


def rankine_speed(r):
    """Tangential speed of the unit Rankine patch: r/2 inside, 1/(2r) outside."""
    r = np.asarray(r, dtype=np.float64)
    return np.where(r <= 1.0, 0.5 * r, 0.5 / np.maximum(r, 1e-300))


def rankine_velocity(points) -> FloatArray:
    """Exact velocity field of the unit disk B(0,1) at the given points."""
    pts = np.asarray(points, dtype=np.float64)
    r = np.linalg.norm(pts, axis=1)
    rate = np.where(r <= 1.0, 0.5, 0.5 / np.maximum(r * r, 1e-300))
    return rate[:, None] * np.column_stack([-pts[:, 1], pts[:, 0]])


# ---------------------------------------------------------------------------
# velocity evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class VelocitySample:
    """Velocity at a point with its polar split u = u_r e_r + r u_theta e_theta."""

    position: tuple[float, float]
    u: tuple[float, float]
    u_r: float
    u_theta: float


def boundary_velocity(c: Contour, eval_points) -> FloatArray:
    """Patch-induced velocity at arbitrary points (on or off the boundary).

    Exact per-segment integration of the log kernel; the singularity at
    coincident nodes is removed analytically, so the result is finite
    everywhere.
    """
    return kernels.induced_velocity(c.vertices, np.asarray(eval_points,
                                                           dtype=np.float64))


def velocity_samples(c: Contour, eval_points) -> list[VelocitySample]:
    pts = np.asarray(eval_points, dtype=np.float64).reshape(-1, 2)
    u = boundary_velocity(c, pts)
    r = np.linalg.norm(pts, axis=1)
    out = []
    for i in range(pts.shape[0]):
        if r[i] < 1e-12:
            ur, ut = 0.0, 0.0
        else:
            er = pts[i] / r[i]
            ur = float(u[i, 0] * er[0] + u[i, 1] * er[1])
            ut = float(-u[i, 0] * er[1] + u[i, 1] * er[0]) / r[i]
        out.append(VelocitySample(tuple(pts[i]), (float(u[i, 0]), float(u[i, 1])),
                                  ur, ut))
    return out


def circulation(c: Contour, radius: float, n: int = 4096) -> float:
    """Circulation of the induced field around a centered circle (Stokes check)."""
    th = TWO_PI * np.arange(n) / n
    pts = radius * np.column_stack([np.cos(th), np.sin(th)])
    u = boundary_velocity(c, pts)
    tangent = np.column_stack([-np.sin(th), np.cos(th)])
    return float(np.sum(np.einsum("ij,ij->i", u, tangent)) * radius * TWO_PI / n)


# ---------------------------------------------------------------------------
# flow state
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class MarkerSet:
    """Lagrangian markers in lifted polar coordinates (theta unbounded)."""

    ids: NDArray[np.int64]
    theta: FloatArray
    r: FloatArray
    theta0: FloatArray
    r0: FloatArray
    weight: FloatArray           # area weight of each marker's seeding cell
    exterior0: NDArray[np.bool_]  # side flag at t = 0

    @classmethod
    def empty(cls) -> "MarkerSet":
        z = np.empty(0)
        return cls(np.empty(0, dtype=np.int64), z.copy(), z.copy(), z.copy(),
                   z.copy(), z.copy(), np.empty(0, dtype=bool))

    def __len__(self) -> int:
        return self.ids.shape[0]

    def positions(self) -> FloatArray:
        return np.column_stack([self.r * np.cos(self.theta),
                                self.r * np.sin(self.theta)])

    def copy(self) -> "MarkerSet":
        return MarkerSet(self.ids.copy(), self.theta.copy(), self.r.copy(),
                         self.theta0.copy(), self.r0.copy(), self.weight.copy(),
                         self.exterior0.copy())


@dataclass(slots=True)
class FlowState:
    """Time-stamped boundary plus the lifted marker ensemble."""

    t: float
    contour: Contour
    markers: MarkerSet
    report: FunctionalReport | None = None


def seed_markers(annuli: Sequence[tuple[float, float, int]], rng: np.random.Generator,
                 patch: Patch | None = None) -> MarkerSet:
    """Seed markers uniformly (in area) over the given annuli.

    Each marker carries the area weight annulus_area/count of its cell and,
    if a patch is supplied, the interior/exterior side flag at seeding time.
    """
    thetas, rs, weights = [], [], []
    for (r_in, r_out, count) in annuli:
        if not (0.0 <= r_in < r_out and count > 0):
            raise InvalidInputError(f"bad annulus ({r_in}, {r_out}, {count})")
        u = rng.random(count)
        rs.append(np.sqrt(r_in**2 + u * (r_out**2 - r_in**2)))
        thetas.append(TWO_PI * rng.random(count))
        weights.append(np.full(count, math.pi * (r_out**2 - r_in**2) / count))
    theta = np.concatenate(thetas) if thetas else np.empty(0)
    r = np.concatenate(rs) if rs else np.empty(0)
    weight = np.concatenate(weights) if weights else np.empty(0)
    ids = np.arange(theta.shape[0], dtype=np.int64)
    pos = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    if patch is not None and len(ids):
        exterior = ~geometry.contains_many(patch, pos)
    else:
        exterior = np.ones(theta.shape[0], dtype=bool)
    return MarkerSet(ids, theta.copy(), r.copy(), theta.copy(), r.copy(),
                     weight, exterior)


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------

def _rhs(nodes: FloatArray, mtheta: FloatArray, mr: FloatArray):
    """Velocities of boundary nodes and markers under the node-polygon field."""
    nm = len(mtheta)
    if nm:
        mpos = np.column_stack([mr * np.cos(mtheta), mr * np.sin(mtheta)])
        pts = np.vstack([nodes, mpos])
    else:
        pts = nodes
    u = kernels.induced_velocity(nodes, pts)
    du_nodes = u[: nodes.shape[0]]
    if nm:
        um = u[nodes.shape[0]:]
        cos_t, sin_t = np.cos(mtheta), np.sin(mtheta)
        dr = um[:, 0] * cos_t + um[:, 1] * sin_t
        dtheta = (-um[:, 0] * sin_t + um[:, 1] * cos_t) / mr
    else:
        dr = dtheta = np.empty(0)
    return du_nodes, dtheta, dr


def _cfl_bound(contour: Contour, node_velocity: FloatArray) -> float:
    """Admissible dt for the per-edge advective guard.

    What tangles a contour is a node overtaking its neighbor, which is
    governed by their velocity difference, not by the absolute speed (a
    rigid rotation moves nodes arbitrarily fast without ever crossing
    them).  Per edge the guard requires

        dt * (|u_{i+1} - u_i| + 0.1 * max(|u_i|, |u_{i+1}|)) <= 0.5 * h_i,

    the absolute tenth keeping the bound within a small factor of the
    classical dt * max|u| <= 0.5 * min spacing on uniform meshes while not
    coupling fine slow features (resolved arm tips and fillets) to the
    fastest node elsewhere, which would make long armed runs unaffordable
    without protecting anything.
    """
    lengths = contour.edge_lengths()
    u_next = np.roll(node_velocity, -1, axis=0)
    rel = np.linalg.norm(u_next - node_velocity, axis=1)
    speed = np.linalg.norm(node_velocity, axis=1)
    cap = rel + 0.1 * np.maximum(speed, np.roll(speed, -1))
    return float(np.min(0.5 * lengths / np.maximum(cap, 1e-300)))


def cfl_max_dt(c: Contour, markers: MarkerSet | None = None) -> float:
    """Largest dt the per-edge advective guard admits for this state."""
    mt = markers.theta if markers is not None else np.empty(0)
    mr = markers.r if markers is not None else np.empty(0)
    du, dth, dr = _rhs(c.vertices, mt, mr)
    return _cfl_bound(c, du)


def step(state: FlowState, dt: float, *, enforce_cfl: bool = True) -> FlowState:
    """One RK4 step of boundary nodes and markers.

    Raises ``CFLError`` (naming the admissible dt) when some node would
    travel farther than half its local spacing in one step.
    """
    nodes = state.contour.vertices
    m = state.markers
    k1 = _rhs(nodes, m.theta, m.r)
    if enforce_cfl:
        dt_max = _cfl_bound(state.contour, k1[0])
        if dt > dt_max * (1.0 + 1e-12):
            raise CFLError(dt, dt_max)
    h = dt
    k2 = _rhs(nodes + 0.5 * h * k1[0], m.theta + 0.5 * h * k1[1],
              m.r + 0.5 * h * k1[2])
    k3 = _rhs(nodes + 0.5 * h * k2[0], m.theta + 0.5 * h * k2[1],
              m.r + 0.5 * h * k2[2])
    k4 = _rhs(nodes + h * k3[0], m.theta + h * k3[1], m.r + h * k3[2])
    new_nodes = nodes + (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    new_m = m.copy()
    if len(m):
        new_m.theta = m.theta + (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        new_m.r = m.r + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    return FlowState(state.t + dt, Contour(new_nodes, check_simple=False), new_m)


# ---------------------------------------------------------------------------
# remeshing
# ---------------------------------------------------------------------------

def _vertex_curvature(v: FloatArray) -> FloatArray:
    a = np.roll(v, 1, axis=0)
    b = v
    c = np.roll(v, -1, axis=0)
    ab = b - a
    bc = c - b
    ac = c - a
    cross = np.abs(ab[:, 0] * bc[:, 1] - ab[:, 1] * bc[:, 0])
    denom = (np.linalg.norm(ab, axis=1) * np.linalg.norm(bc, axis=1)
             * np.linalg.norm(ac, axis=1))
    return 2.0 * cross / np.maximum(denom, 1e-300)


def _vertex_clearance(v: FloatArray, exclude_neighbors: int = 5) -> FloatArray:
    """Distance from each vertex to the nearest non-adjacent boundary edge.

    Measures the local free space around the boundary (the width of a thin
    filament, the gap of a closing fold); used to tighten the chord sagitta
    budget where two boundary strands run close to each other.  Vertex-to-
    segment distance matters: vertex-to-vertex would overestimate the gap
    by half the node spacing whenever opposite strands are staggered.
    """
    from scipy.spatial import cKDTree

    n = len(v)
    b = np.roll(v, -1, axis=0)
    mids = 0.5 * (v + b)
    k = min(24, n)
    _, idx = cKDTree(mids).query(v, k=k)          # candidate edges per vertex
    own = np.arange(n)[:, None]
    sep_a = np.abs(idx - own)
    sep_a = np.minimum(sep_a, n - sep_a)
    sep_b = np.abs(idx + 1 - own)
    sep_b = np.minimum(sep_b, n - sep_b)
    valid = np.minimum(sep_a, sep_b) > exclude_neighbors
    pa = v[idx]                                   # (n, k, 2) edge starts
    e = b[idx] - pa
    ee = np.maximum(np.einsum("nkd,nkd->nk", e, e), 1e-300)
    d = v[:, None, :] - pa
    t = np.clip(np.einsum("nkd,nkd->nk", d, e) / ee, 0.0, 1.0)
    foot = pa + t[..., None] * e
    dist = np.linalg.norm(v[:, None, :] - foot, axis=2)
    return np.where(valid, dist, np.inf).min(axis=1)


def _spacing_targets(v: FloatArray, hmin: float, hmax: float,
                     sagitta: float, floor: float) -> FloatArray:
    """Curvature- and clearance-weighted target spacing per vertex.

    The sagitta budget tightens to 1/32 of the local clearance: chords then
    misplace the strand by at most ~3% of the gap to the nearest other
    strand, which keeps the induced near-field velocity error small enough
    that closing folds do not get pushed shut numerically.
    """
    kappa = _vertex_curvature(v)
    local_sagitta = np.minimum(sagitta, _vertex_clearance(v) / 32.0)
    target = np.sqrt(8.0 * np.maximum(local_sagitta, 1e-300)
                     / np.maximum(kappa, 1e-300))
    return np.clip(target, max(hmin, floor), hmax)


def _split_pass(v: FloatArray, hmin: float, hmax: float,
                sagitta: float, floor: float) -> tuple[FloatArray, bool]:
    target_v = _spacing_targets(v, hmin, hmax, sagitta, floor)
    target_e = np.minimum(target_v, np.roll(target_v, -1))
    e = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(e, axis=1)
    n_sub = np.ceil(lengths / target_e - 1e-12).astype(np.int64)
    # never create pieces shorter than hmin
    n_sub = np.minimum(n_sub, np.maximum((lengths / hmin).astype(np.int64), 1))
    n_sub = np.maximum(n_sub, 1)
    if np.all(n_sub == 1):
        return v, False
    base = np.repeat(v, n_sub, axis=0)
    step_vec = np.repeat(e / n_sub[:, None], n_sub, axis=0)
    offs = np.concatenate([np.arange(k) for k in n_sub])
    return base + offs[:, None] * step_vec, True


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1 = p2 - p1
    d2 = q2 - q1
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-300:
        return False
    rel = q1 - p1
    t = (rel[0] * d2[1] - rel[1] * d2[0]) / denom
    s = (rel[0] * d1[1] - rel[1] * d1[0]) / denom
    return 1e-12 < t < 1 - 1e-12 and 1e-12 < s < 1 - 1e-12


def _merge_pass(v: FloatArray, hmin: float, hmax: float) -> tuple[FloatArray, bool]:
    """Collapse sub-hmin edges by deleting one endpoint, compensating the
    lost triangle area with a normal shift of the surviving neighbor.

    Filament safety: a merge near a thin arm can throw its replacement
    chord across the opposite side, so every candidate (with its
    compensation shift applied) is tested exactly against the nearby edges
    of the *current* polygon state and skipped if it would cross one.
    Merges apply sequentially, so two merges facing each other across a
    thin sliver cannot both sneak past the test.
    """
    from scipy.spatial import cKDTree

    n = len(v)
    lengths = np.linalg.norm(np.roll(v, -1, axis=0) - v, axis=1)
    short = np.nonzero(lengths < hmin * (1.0 - 1e-12))[0]
    if short.size == 0 or n <= 8:
        return v, False
    v = v.copy()
    tree = cKDTree(v)   # gathering only; exact tests use current positions
    clearance = _vertex_clearance(v)
    nxt = np.roll(np.arange(n), -1)
    prv = np.roll(np.arange(n), 1)
    alive = np.ones(n, dtype=bool)

    def crosses_neighbors(center, u_idx, w_new, x_idx, exclude):
        radius = float(np.linalg.norm(v[x_idx] - v[u_idx])) + 2.0 * hmax
        for j in tree.query_ball_point(center, radius):
            if not alive[j] or j in exclude:
                continue
            k = nxt[j]
            if k in exclude and j in exclude:
                continue
            if (_segments_intersect(v[u_idx], w_new, v[j], v[k])
                    or _segments_intersect(w_new, v[x_idx], v[j], v[k])):
                return True
        return False

    changed = False
    # index order keeps the sweep identical across symmetric sectors, so
    # m-fold symmetric inputs stay symmetric to round-off
    for s in short:
        if not (alive[s] and alive[nxt[s]]):
            continue
        if float(np.linalg.norm(v[nxt[s]] - v[s])) >= hmin * (1.0 - 1e-12):
            continue
        for i in (nxt[s], s):  # endpoint whose deletion we attempt
            if not alive[i]:
                continue
            u_idx, w_idx = prv[i], nxt[i]
            x_idx = nxt[w_idx]
            if len({u_idx, i, w_idx, x_idx}) < 4:
                continue
            new_len = float(np.linalg.norm(v[w_idx] - v[u_idx]))
            if new_len > hmax:
                continue
            u_pt, w_pt, x_pt = v[u_idx], v[w_idx], v[x_idx]
            lost = 0.5 * ((v[i][0] - u_pt[0]) * (w_pt[1] - u_pt[1])
                          - (v[i][1] - u_pt[1]) * (w_pt[0] - u_pt[0]))
            chord = x_pt - u_pt
            cl = float(np.linalg.norm(chord))
            if cl < 1e-300:
                continue
            normal = np.array([-chord[1], chord[0]]) / cl
            # deleting i removes the triangle area `lost`; moving w by d
            # changes the area by cross(d, x-u)/2 = -|d|*cl/2 along +normal,
            # so d = -(2*lost/cl) * normal restores it exactly
            shift = (-2.0 * lost / cl) * normal
            # never move a vertex by a noticeable fraction of the gap to
            # the nearest other boundary strand
            shift_cap = min(0.25 * hmin, float(clearance[w_idx]) / 32.0)
            if float(np.linalg.norm(shift)) > shift_cap:
                continue
            w_new = w_pt + shift
            if crosses_neighbors(v[i], u_idx, w_new, x_idx,
                                 {u_idx, i, w_idx, prv[u_idx]}):
                continue
            alive[i] = False
            v[w_idx] = w_new
            nxt[u_idx] = w_idx
            prv[w_idx] = u_idx
            changed = True
            break
    if not changed:
        return v, False
    return v[alive], True


def remesh(c: Contour, hmin: float, hmax: float, *,
           sagitta: float | None = None,
           target_floor: float | None = None) -> Contour:
    """Arc-length node redistribution keeping spacing in [hmin, hmax].

    The local target spacing is curvature-weighted, h = sqrt(8 s / kappa)
    clipped to the bounds, with s the sagitta budget (default hmin*hmax/8)
    further tightened by the clearance to the nearest other boundary
    strand.  Splits insert points on the chord (exact for the enclosed
    area); merges delete a vertex and shift its surviving neighbor normal
    to the local chord, restoring the enclosed area to round-off.
    ``target_floor`` optionally keeps refinement targets above hmin (useful
    when hmin only serves as the merge trigger for pre-resolved features).
    Marker data is not touched.
    """
    if not hmin < hmax:
        raise InvalidInputError("need hmin < hmax")
    if hmax < 2.0 * hmin:
        raise InvalidInputError("need hmax >= 2*hmin for the spacing bounds")
    if sagitta is None:
        sagitta = hmin * hmax / 8.0
    floor = hmin if target_floor is None else target_floor
    v = c.vertices.copy()
    merged_any = False
    for _ in range(24):
        v, split_changed = _split_pass(v, hmin, hmax, sagitta, floor)
        v, merge_changed = _merge_pass(v, hmin, hmax)
        merged_any = merged_any or merge_changed
        if not (split_changed or merge_changed):
            break
    out = Contour(v, check_simple=False)
    # splits alone can never break simplicity; if a merge interaction
    # slipped through the exact local tests, fall back to splits only
    if merged_any and not out.is_simple():
        v = c.vertices.copy()
        for _ in range(24):
            v, split_changed = _split_pass(v, hmin, hmax, sagitta, floor)
            if not split_changed:
                break
        out = Contour(v, check_simple=False)
    return out


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class RunResult:
    states: list[FlowState]
    status: str = "ok"            # "ok" | "self_intersection"
    message: str = ""

    @property
    def final(self) -> FlowState:
        return self.states[-1]


def _frame_report(patch: Patch, rstar0: float, *, with_energy: bool,
                  tol_energy: float, with_epsilon: bool,
                  epsilon_x0=None) -> FunctionalReport:
    mass, first, second = geometry.moments(patch)
    delta = geometry.disk_symmetric_difference(patch, Disk((0.0, 0.0), rstar0))
    energy = functionals.pseudo_energy(patch, tol_energy).value if with_energy else None
    eps = argmin = None
    if with_epsilon:
        nd = functionals.nearest_disk_deviation(patch, x0=epsilon_x0)
        eps, argmin = nd.epsilon, (float(nd.center[0]), float(nd.center[1]))
    return FunctionalReport(
        mass=mass, center=(float(first[0]), float(first[1])),
        angular_momentum=second, pseudo_energy=energy,
        perimeter=geometry.perimeter(patch.boundary), delta=delta,
        epsilon=eps, epsilon_argmin=argmin)


def run(initial: Patch, markers: MarkerSet | None, T: float, dt: float,
        frame_stride: int = 25, *, hmin: float | None = None,
        hmax: float | None = None, sagitta: float | None = None,
        target_floor: float | None = None,
        energy_stride: int = 1, tol_energy: float = 1e-4,
        epsilon_frames: bool = False,
        progress: Callable[[FlowState], None] | None = None) -> RunResult:
    """Evolve a patch to time T, recording a FlowState every ``frame_stride``
    steps.

    Remeshing (if bounds are given) and the O(M log M) self-intersection
    check run once per recorded frame, not per step.  On a detected
    self-intersection the run halts and returns the partial trajectory with
    a diagnostic, since a silent topology change would invalidate every
    winding statistic downstream.
    """
    if not (T > 0 and dt > 0 and frame_stride > 0):
        raise InvalidInputError("T, dt, frame_stride must be positive")
    markers = markers.copy() if markers is not None else MarkerSet.empty()
    contour = initial.boundary
    if hmin is not None and hmax is not None:
        contour = remesh(contour, hmin, hmax, sagitta=sagitta,
                         target_floor=target_floor)
    mass0 = geometry.signed_area(contour)
    rstar0 = math.sqrt(mass0 / math.pi)

    n_steps = int(round(T / dt))
    state = FlowState(0.0, contour, markers)
    state.report = _frame_report(Patch(contour), rstar0, with_energy=True,
                                 tol_energy=tol_energy,
                                 with_epsilon=epsilon_frames)
    states = [state]
    if progress:
        progress(state)

    eps_x0 = None
    frame_idx = 0
    done = 0
    while done < n_steps:
        todo = min(frame_stride, n_steps - done)
        for _ in range(todo):
            state = step(state, dt)
        done += todo
        frame_idx += 1
        contour = state.contour
        if hmin is not None and hmax is not None:
            contour = remesh(contour, hmin, hmax, sagitta=sagitta,
                             target_floor=target_floor)
        if not contour.is_simple():
            result = RunResult(states, status="self_intersection",
                               message=f"boundary self-intersection at t="
                                       f"{state.t:.6g} (frame {frame_idx})")
            return result
        patch = Patch(contour)
        with_energy = (frame_idx % energy_stride == 0) or done >= n_steps
        if epsilon_frames and states[-1].report.epsilon_argmin is not None:
            eps_x0 = np.array(states[-1].report.epsilon_argmin)
        report = _frame_report(patch, rstar0, with_energy=with_energy,
                               tol_energy=tol_energy,
                               with_epsilon=epsilon_frames, epsilon_x0=eps_x0)
        state = FlowState(state.t, contour, state.markers, report)
        states.append(state)
        if progress:
            progress(state)
    return RunResult(states)


# ---------------------------------------------------------------------------
# velocity diagnostics (deviation from the Rankine field)
# ---------------------------------------------------------------------------

def velocity_diagnostics(state: FlowState | Patch, *, n_angles: int = 192,
                         inner_exclusion: float = 1e-3) -> dict:
    """Deviation norms of the induced field from the unit-Rankine reference.

    Returns the four norms of the velocity-bound lemma: sup |u - u_*| over
    an annulus grid excluding a small ball at the origin, sup |u_theta|,
    and the L2 norms of (u_theta - rate) and u_r / r over the truncated
    annulus A < |x| < B with A = sqrt(eps), B = R^6 / sqrt(eps).  Here
    u_theta is the angular rate (u . e_theta)/r and the reference rate is
    the true Rankine rotation profile, which makes every norm vanish
    identically on Rankine data.
    """
    patch = state if isinstance(state, Patch) else Patch(state.contour)
    c = patch.boundary
    mass = geometry.signed_area(c)
    rstar = math.sqrt(mass / math.pi)
    eps_tilde = geometry.disk_symmetric_difference(patch, Disk((0.0, 0.0), rstar))
    r_support = float(np.linalg.norm(patch.vertices, axis=1).max())

    def grid_values(radii):
        th = TWO_PI * (np.arange(n_angles) + 0.5) / n_angles
        rr, tt = np.meshgrid(radii, th, indexing="ij")
        pts = np.column_stack([(rr * np.cos(tt)).ravel(), (rr * np.sin(tt)).ravel()])
        u = kernels.induced_velocity(c.vertices, pts)
        return pts, u, rr.shape

    # sup scan: dense shell around r = rstar plus log coverage elsewhere
    radii_sup = np.unique(np.concatenate([
        np.geomspace(inner_exclusion, 0.85 * rstar, 48),
        np.linspace(0.86 * rstar, 1.15 * rstar, 180),
        np.geomspace(1.16 * rstar, max(1.5 * r_support, 2.0), 72),
    ]))
    pts, u, shape = grid_values(radii_sup)
    u_star = rankine_velocity(pts)
    sup_dev = float(np.linalg.norm(u - u_star, axis=1).max())
    r_flat = np.linalg.norm(pts, axis=1)
    utheta = (-u[:, 0] * pts[:, 1] + u[:, 1] * pts[:, 0]) / (r_flat**2)
    sup_utheta = float(np.abs(utheta).max())

    # truncated L2 norms
    eps_eff = max(eps_tilde, 1e-12)
    A = math.sqrt(eps_eff)
    B = r_support**6 / math.sqrt(eps_eff)
    radii_l2 = np.geomspace(max(A, 1e-6), max(B, 2 * A), 128)
    pts2, u2, shape2 = grid_values(radii_l2)
    r2 = np.linalg.norm(pts2, axis=1)
    ut2 = (-u2[:, 0] * pts2[:, 1] + u2[:, 1] * pts2[:, 0]) / (r2**2)
    ur2 = (u2[:, 0] * pts2[:, 0] + u2[:, 1] * pts2[:, 1]) / r2
    dev_t = (ut2 - rankine_rotation_rate(r2)).reshape(shape2)
    dev_r = (ur2 / r2).reshape(shape2)
    rr = radii_l2[:, None]
    dth = TWO_PI / n_angles
    l2_t = math.sqrt(float(np.trapezoid((dev_t**2 * rr).sum(axis=1) * dth,
                                        radii_l2)))
    l2_r = math.sqrt(float(np.trapezoid((dev_r**2 * rr).sum(axis=1) * dth,
                                        radii_l2)))
    return {
        "sup_dev": sup_dev,
        "sup_utheta": sup_utheta,
        "l2_utheta_minus_rate": l2_t,
        "l2_ur_over_r": l2_r,
        "epsilon_tilde": eps_tilde,
        "cutoff_A": A,
        "cutoff_B": B,
        "support_radius": r_support,
    }
