"""Command-line entry point.

Subcommands: ``build``, ``evolve``, ``verify``, ``diagnose``, ``sweep``.
Configuration comes from a single JSON file (``--config``) with flag
overrides; every run directory receives a manifest sufficient to re-run the
exact experiment (config echo, seed, package version, kernel backend).

Exit codes: 0 success, 1 runtime error, 2 invalid input, 3 inequality
violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__, dynamics, functionals, geometry, kernels, stability, winding
from .errors import InvalidInputError, PatchdynError
from .geometry import Patch
from .patch_builder import ArmedPatchSpec, armed_patch, kirchhoff_ellipse, rankine


class ViolationError(PatchdynError):
    """An inequality check reported violations (exit code 3)."""


SCENARIOS = ("rankine", "kirchhoff", "armed", "contour")


@dataclass(slots=True)
class RunConfig:
    """Scenario plus numerics, marker seeding, and diagnostics toggles."""

    scenario: str = "rankine"
    # patch parameters
    r: float = 1.0
    a: float = 2.0
    b: float = 1.0
    m: int = 3
    N: float = 5.0
    gamma: float = 0.05
    resolution: float = 0.02
    vertices: int = 512
    contour_file: str | None = None
    profile: str = "constant"
    # numerics
    dt: float = 1e-2
    T: float = 10.0
    frame_stride: int = 25
    hmin: float | None = None
    hmax: float | None = None
    # marker seeding: list of [r_in, r_out, count]
    marker_annuli: list = field(default_factory=list)
    # diagnostics
    energy_stride: int = 1
    epsilon_frames: bool = False
    spread_r0: float = 1.0
    tol_energy: float = 1e-4
    # bookkeeping
    seed: int = 0
    out: str = "run/out"
    # verify corpus parameters
    corpus_size: int = 100
    corpus_ms: list = field(default_factory=lambda: [2, 3, 4, 5, 6])
    momentum_bound: float = 5.0
    sharpness_deltas: list = field(default_factory=lambda: [0.01, 0.02, 0.05, 0.08, 0.1])
    # sweep parameters
    gammas: list = field(default_factory=lambda: [0.01, 0.02, 0.05, 0.08])

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "RunConfig":
        data: dict = {}
        if path is not None:
            with open(path) as fh:
                data.update(json.load(fh))
        data.update({k: v for k, v in overrides.items() if v is not None})
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise InvalidInputError(f"bad config key: {exc}") from exc
        if cfg.scenario not in SCENARIOS:
            raise InvalidInputError(f"unknown scenario {cfg.scenario!r}; "
                                    f"expected one of {SCENARIOS}")
        for name in ("dt", "T", "r", "N", "gamma", "resolution"):
            if not getattr(cfg, name) > 0:
                raise InvalidInputError(f"config field {name} must be positive")
        return cfg

    def build_patch(self) -> Patch:
        if self.scenario == "rankine":
            return rankine(self.r, self.vertices)
        if self.scenario == "kirchhoff":
            return kirchhoff_ellipse(self.a, self.b, self.vertices)
        if self.scenario == "armed":
            return armed_patch(ArmedPatchSpec(m=self.m, N=self.N,
                                              gamma=self.gamma,
                                              resolution=self.resolution,
                                              arm_profile=self.profile))
        if self.contour_file is None:
            raise InvalidInputError("scenario 'contour' needs contour_file")
        return Patch(geometry.read_contour_csv(self.contour_file))


def _manifest(cfg: RunConfig, extra: dict) -> dict:
    return {"config": asdict(cfg), "version": __version__,
            "kernel_backend": kernels.BACKEND, **extra}


def _write_json(path: str, payload: dict) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


class _RunLock:
    """One run directory is owned by one process."""

    def __init__(self, outdir: str):
        self.path = os.path.join(outdir, ".lock")
        os.makedirs(outdir, exist_ok=True)

    def __enter__(self):
        try:
            self.fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise PatchdynError(
                f"run directory is locked by another process ({self.path})")
        return self

    def __exit__(self, *exc):
        os.close(self.fd)
        os.unlink(self.path)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_build(cfg: RunConfig) -> int:
    patch = cfg.build_patch()
    os.makedirs(cfg.out, exist_ok=True)
    contour_path = os.path.join(cfg.out, "contour.csv")
    geometry.write_contour_csv(contour_path, patch.boundary)
    report = functionals.functional_report(patch, tol=1e-5, with_epsilon=False)
    deficit = functionals.energy_deficit(patch, 1e-5)
    payload = _manifest(cfg, {
        "report": json.loads(report.to_json()),
        "energy_deficit": deficit.value,
        "energy_deficit_error": deficit.error,
        "contour": contour_path,
    })
    _write_json(os.path.join(cfg.out, "build_report.json"), payload)
    print(f"wrote {contour_path} (mass={report.mass:.9f}, "
          f"deficit={deficit.value:.6g})")
    return 0


def _save_frames(cfg: RunConfig, result: dynamics.RunResult) -> dict:
    frames = []
    for k, s in enumerate(result.states):
        path = os.path.join(cfg.out, f"frame_{k:04d}.csv")
        geometry.write_contour_csv(path, s.contour)
        rep = None if s.report is None else json.loads(s.report.to_json())
        frames.append({"k": k, "t": s.t, "file": os.path.basename(path),
                       "report": rep})
    return {"frames": frames, "status": result.status,
            "message": result.message}


def _save_winding(cfg: RunConfig, result: dynamics.RunResult) -> None:
    states = result.states
    if not len(states[0].markers):
        return
    drift = winding.bucket_drift(states)
    with open(os.path.join(cfg.out, "winding.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "marker_id", "theta", "r", "bucket"])
        for k, s in enumerate(states):
            m = s.markers
            for i in range(len(m)):
                mid = int(m.ids[i])
                b = drift.series[mid][k]
                wr.writerow([repr(s.t), mid, repr(float(m.theta[i])),
                             repr(float(m.r[i])),
                             "" if math.isnan(b) else int(b)])
    with open(os.path.join(cfg.out, "spread.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t", "spread", "bound", "perimeter"])
        for s in states:
            spread = winding.winding_spread(s, cfg.spread_r0)
            bound = winding.winding_spread_bound(s, cfg.spread_r0)
            wr.writerow([repr(s.t), repr(spread), repr(bound),
                         repr(s.report.perimeter if s.report else
                              geometry.perimeter(s.contour))])


def _load_resume_states(cfg: RunConfig) -> list[dynamics.FlowState] | None:
    """Rebuild the recorded trajectory of an interrupted run, if any."""
    manifest_path = os.path.join(cfg.out, "manifest.json")
    if not os.path.exists(manifest_path):
        return None
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    old = dict(manifest.get("config") or {})
    new = asdict(cfg)
    old.pop("T", None)
    new.pop("T", None)  # extending T is exactly what resume is for
    if old != new:
        raise InvalidInputError("existing run directory was produced by a "
                                "different config; refusing to resume")
    seeds = manifest.get("marker_seed_data") or {}
    per_frame: dict[float, dict[int, tuple[float, float]]] = {}
    winding_path = os.path.join(cfg.out, "winding.csv")
    if os.path.exists(winding_path):
        with open(winding_path) as fh:
            for row in csv.DictReader(fh):
                per_frame.setdefault(float(row["t"]), {})[int(row["marker_id"])] = (
                    float(row["theta"]), float(row["r"]))
    states = []
    for fr in manifest["frames"]:
        contour = geometry.read_contour_csv(
            os.path.join(cfg.out, fr["file"]), check_simple=False)
        if seeds:
            ids = np.array(seeds["ids"], dtype=np.int64)
            rows = per_frame.get(fr["t"], {})
            theta = np.array([rows[int(i)][0] for i in ids])
            r = np.array([rows[int(i)][1] for i in ids])
            markers = dynamics.MarkerSet(
                ids, theta, r, np.array(seeds["theta0"]),
                np.array(seeds["r0"]), np.array(seeds["weight"]),
                np.array(seeds["exterior0"], dtype=bool))
        else:
            markers = dynamics.MarkerSet.empty()
        report = (None if fr["report"] is None
                  else functionals.FunctionalReport.from_dict(fr["report"]))
        states.append(dynamics.FlowState(fr["t"], contour, markers, report))
    return states


def cmd_evolve(cfg: RunConfig, resume: bool = False) -> int:
    patch = cfg.build_patch()
    rng = np.random.default_rng(cfg.seed)
    annuli = [tuple(a) for a in cfg.marker_annuli]
    markers = dynamics.seed_markers(annuli, rng, patch) if annuli else None
    with _RunLock(cfg.out):
        prior: list[dynamics.FlowState] = []
        t_done = 0.0
        if resume:
            loaded = _load_resume_states(cfg)
            if loaded and loaded[-1].t < cfg.T - 1e-9:
                prior = loaded[:-1]
                t_done = loaded[-1].t
                patch = Patch(loaded[-1].contour)
                markers = loaded[-1].markers
            elif loaded:
                print("run already complete; nothing to resume")
                return 0
        result = dynamics.run(
            patch, markers, cfg.T - t_done, cfg.dt, cfg.frame_stride,
            hmin=cfg.hmin, hmax=cfg.hmax, energy_stride=cfg.energy_stride,
            tol_energy=cfg.tol_energy, epsilon_frames=cfg.epsilon_frames)
        if prior:
            for s in result.states:
                s.t += t_done
            result.states = prior + result.states
        seed_data = {}
        if markers is not None and len(result.states[0].markers):
            m0 = result.states[0].markers
            seed_data = {"marker_seed_data": {
                "ids": m0.ids.tolist(), "theta0": m0.theta0.tolist(),
                "r0": m0.r0.tolist(), "weight": m0.weight.tolist(),
                "exterior0": m0.exterior0.tolist()}}
        payload = _manifest(cfg, {**_save_frames(cfg, result), **seed_data})
        _write_json(os.path.join(cfg.out, "manifest.json"), payload)
        if len(result.states[0].markers):
            _save_winding(cfg, result)
    print(f"run {result.status}: {len(result.states)} frames -> {cfg.out}")
    if result.status != "ok":
        print(result.message, file=sys.stderr)
        return 1
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    rng = np.random.default_rng(cfg.seed)
    reports: dict[str, dict] = {}

    corpus, ms = [], []
    per_m = max(1, cfg.corpus_size // len(cfg.corpus_ms))
    for m in cfg.corpus_ms:
        for _ in range(per_m):
            corpus.append(stability.fourier_mfold_patch(int(m), rng))
            ms.append(int(m))
    rep4 = stability.check_mfold_bound(corpus, ms)
    reports["mfold_bound"] = json.loads(rep4.to_json())

    corpus5 = [stability.centered_perturbed_patch(rng)
               for _ in range(max(4, cfg.corpus_size // 5))]
    rep5 = stability.check_momentum_bound(corpus5, cfg.momentum_bound)
    reports["momentum_bound"] = json.loads(rep5.to_json())

    fit = stability.sharpness_exponent(cfg.sharpness_deltas)
    reports["sharpness"] = fit

    layer_targets = {
        "disk": rankine(1.0, 256),
        "ellipse": kirchhoff_ellipse(2.0, 1.0, 256),
        "armed_small": armed_patch(ArmedPatchSpec(m=3, N=3.0, gamma=0.05,
                                                  resolution=0.03)),
    }
    layers = {}
    for name, p in layer_targets.items():
        chk = functionals.layer_reconstruction_check(
            p, rng=np.random.default_rng(cfg.seed + 7))
        layers[name] = {"layered": chk.layered, "reference": chk.reference,
                        "discrepancy": chk.discrepancy}
    reports["layer_reconstruction"] = layers

    payload = _manifest(cfg, {"reports": reports})
    _write_json(os.path.join(cfg.out, "verify_report.json"), payload)
    violations = rep4.violations + rep5.violations
    print(f"mfold: {rep4.violations} violations over {rep4.corpus_size} "
          f"(min ratio {rep4.min_ratio:.4f})")
    print(f"momentum: {rep5.violations} violations over {rep5.corpus_size} "
          f"(min eps/delta^2 {rep5.min_ratio:.4f})")
    print(f"sharpness slope: {fit['slope']:.3f}")
    for name, row in layers.items():
        print(f"layers[{name}]: discrepancy {row['discrepancy']:.4f}")
    if violations:
        raise ViolationError(f"{violations} inequality violations")
    return 0


def cmd_diagnose(cfg: RunConfig) -> int:
    patch = cfg.build_patch()
    diag = dynamics.velocity_diagnostics(patch)
    mass = geometry.signed_area(patch.boundary)
    circ = dynamics.circulation(patch.boundary,
                                radius=4.0 * diag["support_radius"])
    diag["circulation"] = circ
    diag["circulation_error"] = abs(circ - mass)
    _write_json(os.path.join(cfg.out, "diagnostics.json"),
                _manifest(cfg, {"diagnostics": diag}))
    print(json.dumps(diag, indent=2))
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    """Gamma sweep of the armed family: deviation vs sup velocity deviation."""
    rows = []
    for g in cfg.gammas:
        p = armed_patch(ArmedPatchSpec(m=cfg.m, N=cfg.N, gamma=float(g),
                                       resolution=cfg.resolution))
        diag = dynamics.velocity_diagnostics(p)
        rows.append({"gamma": float(g), "delta": diag["epsilon_tilde"],
                     "sup_dev": diag["sup_dev"],
                     "l2_utheta": diag["l2_utheta_minus_rate"],
                     "l2_ur": diag["l2_ur_over_r"]})
    log_d = np.log([r["delta"] for r in rows])
    log_s = np.log([r["sup_dev"] for r in rows])
    slope = float(np.polyfit(log_d, log_s, 1)[0])
    os.makedirs(cfg.out, exist_ok=True)
    with open(os.path.join(cfg.out, "sweep.csv"), "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["gamma", "delta", "sup_dev", "l2_utheta", "l2_ur"])
        for r in rows:
            wr.writerow([r["gamma"], r["delta"], r["sup_dev"],
                         r["l2_utheta"], r["l2_ur"]])
    _write_json(os.path.join(cfg.out, "sweep_report.json"),
                _manifest(cfg, {"rows": rows, "supdev_slope": slope}))
    print(f"gamma sweep: sup-dev slope vs delta = {slope:.3f}")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="RNG seed (recorded in manifests)")
    p.add_argument("--threads", type=int, default=1,
                   help="reserved; kernels are single-threaded per call")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--r", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--m", type=int)
    p.add_argument("--N", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--resolution", type=float)
    p.add_argument("--vertices", type=int)
    p.add_argument("--contour-file", dest="contour_file")
    p.add_argument("--dt", type=float)
    p.add_argument("--T", type=float)
    p.add_argument("--frame-stride", dest="frame_stride", type=int)
    p.add_argument("--hmin", type=float)
    p.add_argument("--hmax", type=float)


def _overrides(args: argparse.Namespace) -> dict:
    skip = {"command", "config", "threads", "func", "resume"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="patchdyn",
        description="Contour dynamics and stability diagnostics for 2D "
                    "Euler vortex patches")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("build", cmd_build), ("evolve", cmd_evolve),
                     ("verify", cmd_verify), ("diagnose", cmd_diagnose),
                     ("sweep", cmd_sweep)):
        sp = sub.add_parser(name)
        _add_common(sp)
        if name == "evolve":
            sp.add_argument("--resume", action="store_true",
                            help="continue an interrupted run from its "
                                 "last recorded frame")
        sp.set_defaults(func=fn)
    args = parser.parse_args(argv)
    try:
        from . import kernels as _k
        _k.set_num_threads(args.threads)
        cfg = RunConfig.load(args.config, _overrides(args))
        if args.command == "evolve":
            return cmd_evolve(cfg, resume=getattr(args, "resume", False))
        return args.func(cfg)
    except InvalidInputError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except ViolationError as exc:
        print(f"violation: {exc}", file=sys.stderr)
        return 3
    except PatchdynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
