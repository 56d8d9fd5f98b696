"""Pure-NumPy boundary-integral kernels (fallback for the C extension).

Same closed forms as ``_core.pyx``: for each straight segment the line
integral of ln|y - x| is evaluated exactly, which desingularizes the log
kernel analytically.  Evaluation points are processed in chunks so the
broadcast (points x segments) temporaries stay cache-friendly.
"""

import numpy as np

_TINY = 1e-300
_CHUNK = 262_144  # point-segment pairs per broadcast block


def _segment_frames(vertices):
    a = vertices
    b = np.roll(vertices, -1, axis=0)
    e = b - a
    length = np.linalg.norm(e, axis=1)
    ex = e[:, 0] / length
    ey = e[:, 1] / length
    return a, b, ex, ey, length


def _log_integral(pts, a, b, ex, ey, length):
    """ln|y-x| integrated over each segment, for each point: (P, M)."""
    dx = pts[:, 0][:, None] - a[None, :, 0]
    dy = pts[:, 1][:, None] - a[None, :, 1]
    fx = pts[:, 0][:, None] - b[None, :, 0]
    fy = pts[:, 1][:, None] - b[None, :, 1]
    t1 = -(dx * ex[None, :] + dy * ey[None, :])
    t2 = t1 + length[None, :]
    r1sq = dx * dx + dy * dy
    r2sq = fx * fx + fy * fy
    h = ex[None, :] * dy - ey[None, :] * dx
    ang = np.arctan2(length[None, :] * h, h * h + t1 * t2)
    integral = (0.5 * (t2 * np.log(np.maximum(r2sq, _TINY))
                       - t1 * np.log(np.maximum(r1sq, _TINY)))
                - length[None, :] + h * ang)
    return integral, h


def induced_velocity(vertices, points):
    """Velocity induced by the unit-vorticity patch bounded by ``vertices``.

    u(x) = -(1/2pi) sum over segments of (unit tangent) * int_seg ln|y-x| ds
    """
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    a, b, ex, ey, length = _segment_frames(vertices)
    n = points.shape[0]
    u = np.empty((n, 2))
    step = max(1, _CHUNK // max(vertices.shape[0], 1))
    for lo in range(0, n, step):
        integral, _ = _log_integral(points[lo:lo + step], a, b, ex, ey, length)
        u[lo:lo + step, 0] = integral @ ex
        u[lo:lo + step, 1] = integral @ ey
    u *= -1.0 / (2.0 * np.pi)
    return u


def log_potential(vertices, points):
    """Inner potential psi(x) = int over patch of ln|x-y| dy, exactly per point.

    The area integral is reduced to the boundary with the divergence theorem;
    (y-x).n is constant along each straight segment.
    """
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    points = np.ascontiguousarray(points, dtype=np.float64)
    a, b, ex, ey, length = _segment_frames(vertices)
    n = points.shape[0]
    psi = np.empty(n)
    step = max(1, _CHUNK // max(vertices.shape[0], 1))
    for lo in range(0, n, step):
        integral, h = _log_integral(points[lo:lo + step], a, b, ex, ey, length)
        psi[lo:lo + step] = np.sum(h * (0.5 * integral - 0.25 * length[None, :]),
                                   axis=1)
    return psi
