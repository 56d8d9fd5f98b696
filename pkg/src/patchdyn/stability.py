"""Executable checks of the quantitative stability inequalities.

Three families of checks:

* the m-fold symmetry bound: for m-fold symmetric vorticities the centered
  L1 deviation is at most three times the optimal translated deviation;
* the bounded-angular-momentum bound: for centered, momentum-bounded
  vorticities the optimal deviation controls the square of the centered
  one, with a constant reconstructed explicitly from the proof chain;
* trajectory monitors: along a simulated run the squared (resp. fourth
  power) centered deviation stays bounded by the initial energy deficit.

Violations are only counted beyond a combined numerical tolerance; nothing
explainable by optimizer step size or quadrature error is ever reported as
a counterexample.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import functionals, geometry
from .errors import InvalidInputError
from .geometry import Contour, Disk, Patch

TWO_PI = 2.0 * math.pi


@dataclass(slots=True)
class InequalityReport:
    """Outcome of an inequality check over a corpus (or a trajectory)."""

    corpus_size: int
    violations: int
    min_ratio: float
    witness: str
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def merge_reports(a: InequalityReport, b: InequalityReport) -> InequalityReport:
    """Associative merge, so corpus checks can be sharded and recombined."""
    if a.corpus_size == 0:
        return b
    if b.corpus_size == 0:
        return a
    smaller = a if a.min_ratio <= b.min_ratio else b
    return InequalityReport(
        corpus_size=a.corpus_size + b.corpus_size,
        violations=a.violations + b.violations,
        min_ratio=smaller.min_ratio,
        witness=smaller.witness,
        details={"merged": [a.details, b.details]},
    )


# ---------------------------------------------------------------------------
# corpus generation
# ---------------------------------------------------------------------------

def fourier_mfold_patch(m: int, rng: np.random.Generator, *, vertices: int = 360,
                        kmax: int = 4, r0: float = 1.0) -> Patch:
    """Random m-fold symmetric star-shaped boundary.

    r(t) = r0 (1 + sum_k a_k cos(m k t + phi_k)) with |a_k| <= 0.3/k^2, which
    keeps the boundary simple.  The vertex count is a multiple of m so the
    vertex set itself is m-fold symmetric to round-off.
    """
    n = int(m * math.ceil(vertices / m))
    th = TWO_PI * np.arange(n) / n
    r = np.full(n, 1.0)
    for k in range(1, kmax + 1):
        amp = rng.uniform(0.1, 1.0) * 0.3 / k**2
        phase = rng.uniform(0.0, TWO_PI)
        r += amp * np.cos(m * k * th + phase)
    v = r0 * np.column_stack([r * np.cos(th), r * np.sin(th)])
    return Patch(Contour(v, check_simple=False))


def centered_perturbed_patch(rng: np.random.Generator, *, vertices: int = 360,
                             kmax: int = 5, amplitude: float = 0.25) -> Patch:
    """Random star-shaped patch normalized to mass pi and zero first moment."""
    th = TWO_PI * np.arange(vertices) / vertices
    r = np.full(vertices, 1.0)
    for k in range(2, kmax + 1):
        amp = rng.uniform(0.0, amplitude / k)
        phase = rng.uniform(0.0, TWO_PI)
        r += amp * np.cos(k * th + phase)
    v = np.column_stack([r * np.cos(th), r * np.sin(th)])
    for _ in range(3):  # rescale to mass pi, recenter; converges fast
        p = Patch(Contour(v, check_simple=False))
        mass, first, _ = geometry.moments(p)
        v = (v - first / mass) * math.sqrt(math.pi / mass)
    return Patch(Contour(v, check_simple=False))


# ---------------------------------------------------------------------------
# the m-fold bound
# ---------------------------------------------------------------------------

def check_mfold_bound(corpus, ms, *, symmetry_tol: float = 1e-6,
                      xatol: float = 1e-6) -> InequalityReport:
    """Verify eps >= delta/3 over a corpus of m-fold symmetric patches.

    delta is the L1 deviation from the equal-mass disk at the origin, eps
    the optimal deviation over translates.  The combined violation
    tolerance covers the optimizer step and the (exact) clipping round-off.
    Patches with delta at the discretization floor are vacuous and skipped
    in the ratio statistics.
    """
    min_ratio = math.inf
    witness = "none"
    violations = 0
    checked = 0
    ratios = []
    for idx, (p, m) in enumerate(zip(corpus, ms)):
        defect = geometry.check_mfold_symmetry(p, m)
        if defect > symmetry_tol:
            raise InvalidInputError(
                f"corpus patch {idx} is not {m}-fold symmetric "
                f"(defect {defect:.2e} > {symmetry_tol:g})")
        mass = geometry.signed_area(p.boundary)
        rstar = math.sqrt(mass / math.pi)
        delta = geometry.disk_symmetric_difference(p, Disk((0.0, 0.0), rstar))
        nd = functionals.nearest_disk_deviation(p, xatol=xatol)
        eps = nd.epsilon
        checked += 1
        tol = 3.0 * (4.0 * rstar * xatol + 1e-12)
        if delta <= 10.0 * tol:
            continue  # vacuous: already (numerically) a centered disk
        ratio = eps / delta
        ratios.append(ratio)
        if eps < delta / 3.0 - tol:
            violations += 1
        if ratio < min_ratio:
            min_ratio = ratio
            witness = (f"patch {idx} (m={m}): eps={eps:.6g} delta={delta:.6g} "
                       f"ratio={ratio:.6f}")
    return InequalityReport(
        corpus_size=checked, violations=violations,
        min_ratio=(min_ratio if ratios else math.inf), witness=witness,
        details={"ratios": ratios})


# ---------------------------------------------------------------------------
# the bounded-angular-momentum bound
# ---------------------------------------------------------------------------

def momentum_bound_constants(I: float, r: float) -> dict[str, float]:
    """Explicit constants from the proof chain of the momentum bound.

    Branch "large": when eps >= pi r^2 one has eps >= delta^2/(4 pi r^2)
    outright.  Branch "small": |a| <= K sqrt(eps) with
    K = (sqrt(pi) r^2 + sqrt(2 I)) / (pi r^2), and then
    delta <= (sqrt(pi r^2) + 4 r K) sqrt(eps).  The effective constant is
    the minimum over the two branches; both are reported since the combined
    constant is left implicit in the underlying argument.
    """
    if not (I > 0 and r > 0):
        raise InvalidInputError("need I > 0 and r > 0")
    c_large = 1.0 / (4.0 * math.pi * r * r)
    K = (math.sqrt(math.pi) * r * r + math.sqrt(2.0 * I)) / (math.pi * r * r)
    c_small = 1.0 / (math.sqrt(math.pi) * r + 4.0 * r * K) ** 2
    return {"c_large": c_large, "c_small": c_small,
            "effective": min(c_large, c_small), "K": K}


def check_momentum_bound(corpus, I: float, *, center_tol: float = 1e-6,
                         xatol: float = 1e-6) -> InequalityReport:
    """Verify eps >= C(I, r) delta^2 over centered, momentum-bounded patches."""
    min_ratio = math.inf
    witness = "none"
    violations = 0
    checked = 0
    ratios = []
    consts = None
    for idx, p in enumerate(corpus):
        mass, first, second = geometry.moments(p)
        if float(np.linalg.norm(first)) > center_tol:
            raise InvalidInputError(
                f"corpus patch {idx} violates the centering precondition "
                f"(|int x w| = {np.linalg.norm(first):.2e})")
        if second > I * (1 + 1e-12):
            raise InvalidInputError(
                f"corpus patch {idx} violates the momentum bound "
                f"({second:.4f} > I = {I})")
        rstar = math.sqrt(mass / math.pi)
        consts = momentum_bound_constants(I, rstar)
        delta = geometry.disk_symmetric_difference(p, Disk((0.0, 0.0), rstar))
        eps = functionals.nearest_disk_deviation(p, xatol=xatol).epsilon
        checked += 1
        tol = 3.0 * (4.0 * rstar * xatol + 1e-12)
        if delta <= 10.0 * tol:
            continue
        ratio = eps / delta**2
        ratios.append(ratio)
        if eps < consts["effective"] * delta**2 - tol:
            violations += 1
        if ratio < min_ratio:
            min_ratio = ratio
            witness = (f"patch {idx}: eps={eps:.6g} delta={delta:.6g} "
                       f"eps/delta^2={ratio:.4f}")
    details = {"ratios": ratios}
    if consts is not None:
        details["constants"] = consts
    return InequalityReport(corpus_size=checked, violations=violations,
                            min_ratio=(min_ratio if ratios else math.inf),
                            witness=witness, details=details)


# ---------------------------------------------------------------------------
# sharpness family for the quadratic exponent
# ---------------------------------------------------------------------------

def sharpness_family(delta: float, *, disk_vertices: int = 2048,
                     blob_vertices: int = 96) -> Patch:
    """Centered unit-mass patch at distance ~delta from the centered disk but
    only ~delta^2 from the best translated disk.

    A near-unit disk shifted by delta along e1, with a mass of order delta^2
    relocated a distance of order 1/delta along -e1 to zero the first
    moment.  The relocated blob stays connected to the disk through a thin
    corridor (width delta^3) so the boundary remains a single simple curve;
    the corridor area is itself O(delta^2) and only shifts the constant in
    front of delta^2.  Mass pi and zero center are enforced exactly by
    solving for the disk radius and the relocation distance.
    """
    if not (0.0 < delta < 0.2):
        raise InvalidInputError("delta must lie in (0, 0.2)")
    m_blob = delta * delta
    s = math.sqrt(m_blob / math.pi)              # blob radius
    w = delta**3                                  # corridor width
    rho = math.sqrt(1.0 - (m_blob / math.pi))     # initial guess, refined below
    d = math.pi / delta

    def build(rho: float, d: float) -> Patch:
        alpha = math.asin(0.5 * w / rho)
        beta = math.asin(0.5 * w / s)
        # disk arc the long way around, from the bottom junction to the top
        n = disk_vertices
        a0, a1 = -(math.pi - alpha), (math.pi - alpha)
        th = a0 + (a1 - a0) * np.arange(n + 1) / n
        disk = np.column_stack([delta + rho * np.cos(th), rho * np.sin(th)])
        # blob arc the long way, from its top junction to its bottom junction
        nb = blob_vertices
        b0, b1 = beta, TWO_PI - beta
        tb = b0 + (b1 - b0) * np.arange(nb + 1) / nb
        blob = np.column_stack([-d + s * np.cos(tb), s * np.sin(tb)])
        x_disk = delta - rho * math.cos(alpha)
        x_blob = -d + s * math.cos(beta)
        n_cor = 8
        xs = x_disk + (x_blob - x_disk) * np.arange(1, n_cor)[::-1] / n_cor
        top = np.column_stack([xs[::-1], np.full(n_cor - 1, 0.5 * w)])[::-1]
        bot = np.column_stack([xs, np.full(n_cor - 1, -0.5 * w)])[::-1]
        v = np.vstack([disk, top[::-1], blob, bot[::-1]])
        return Patch(Contour(v, check_simple=False))

    # alternate two secants: rho fixes the mass, d zeroes the first moment
    for _ in range(12):
        p = build(rho, d)
        mass, first, _ = geometry.moments(p)
        if abs(mass - math.pi) < 1e-12 and abs(first[0]) < 1e-12:
            break
        rho = rho * math.sqrt(1.0 + (math.pi - mass) / (math.pi * rho * rho))
        p = build(rho, d)
        mass, first, _ = geometry.moments(p)
        slope = -(m_blob + w * d)   # d(moment)/dd, to leading order
        d = d - first[0] / slope
    p = build(rho, d)
    mass, first, _ = geometry.moments(p)
    if abs(mass - math.pi) > 1e-6 or abs(first[0]) > 1e-8:
        raise InvalidInputError(
            f"sharpness construction did not converge (mass err "
            f"{abs(mass-math.pi):.2e}, center {first[0]:.2e})")
    if not p.boundary.is_simple():
        raise InvalidInputError("sharpness construction self-intersects; "
                                "delta too large to stay embedded")
    return p


def sharpness_exponent(deltas, *, xatol: float = 1e-6) -> dict:
    """Log-log fit of the optimal deviation against the centered deviation
    over the sharpness family.  The fitted slope is the observed exponent."""
    log_d, log_e, rows = [], [], []
    for delta in deltas:
        p = sharpness_family(delta)
        mass = geometry.signed_area(p.boundary)
        rstar = math.sqrt(mass / math.pi)
        dlt = geometry.disk_symmetric_difference(p, Disk((0.0, 0.0), rstar))
        eps = functionals.nearest_disk_deviation(p, xatol=xatol).epsilon
        rows.append({"delta_param": delta, "delta": dlt, "epsilon": eps})
        log_d.append(math.log(dlt))
        log_e.append(math.log(eps))
    slope, intercept = np.polyfit(log_d, log_e, 1)
    return {"slope": float(slope), "intercept": float(intercept), "rows": rows}


# ---------------------------------------------------------------------------
# trajectory monitors
# ---------------------------------------------------------------------------

def monitor_trajectory(states, *, mode: str = "mfold",
                       tol_energy: float = 1e-5,
                       regression_factor: float | None = None) -> InequalityReport:
    """Check boundedness of delta_t^p / deficit_0 along one trajectory.

    p = 2 under m-fold symmetry, p = 4 under the momentum hypothesis.  The
    reported ``min_ratio`` is min_t deficit_0 / delta_t^p (positive iff the
    monitored quantity stays bounded); its reciprocal max_t delta_t^p /
    deficit_0 appears in the witness string.  When the initial deficit is
    below the quadrature error floor the check is inconclusive rather than
    a violation.  ``regression_factor`` optionally counts frames where
    delta_t exceeds that multiple of delta_0 as violations.
    """
    if mode not in ("mfold", "momentum"):
        raise InvalidInputError("mode must be 'mfold' or 'momentum'")
    p_exp = 2 if mode == "mfold" else 4
    if not states:
        raise InvalidInputError("empty trajectory")
    first = states[0]
    deficit0 = functionals.energy_deficit(Patch(first.contour), tol_energy)
    deltas = np.array([s.report.delta for s in states if s.report is not None])
    # the absolute floor covers the polygon-vs-disk discretization bias,
    # which the adaptive quadrature's own error estimate cannot see
    if deficit0.value <= 3.0 * deficit0.error + 1e-8:
        return InequalityReport(
            corpus_size=len(deltas), violations=0, min_ratio=math.inf,
            witness="inconclusive: initial deficit below the quadrature "
                    f"error floor ({deficit0.value:.2e} <= "
                    f"{3*deficit0.error:.2e})",
            details={"status": "inconclusive", "deficit0": deficit0.value})
    ratios = deltas**p_exp / deficit0.value
    max_ratio = float(ratios.max())
    violations = 0
    if regression_factor is not None:
        violations = int(np.sum(deltas > regression_factor * deltas[0]))
    return InequalityReport(
        corpus_size=len(deltas), violations=violations,
        min_ratio=float(1.0 / max_ratio),
        witness=f"max_t delta^{p_exp}/deficit0 = {max_ratio:.4f} "
                f"(deficit0 = {deficit0.value:.6g})",
        details={"status": "ok", "deficit0": deficit0.value,
                 "max_ratio": max_ratio,
                 "delta0": float(deltas[0]), "delta_max": float(deltas.max())})
