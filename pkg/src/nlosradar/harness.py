"""Monte Carlo harness: trial pipeline, metrics and experiment sweeps.

A trial runs the full chain synthesize -> range-angle map -> surface
estimate -> hypothesis decision -> localization and records every stage
product together with per-parameter errors.  Sweeps evaluate a grid of one
scene variable with a fixed number of seeded trials per grid point and
aggregate localization RMSE and identification probabilities.

Seeding: a master seed is split counter-style over (grid point, trial)
via numpy SeedSequence spawn keys, so any single trial can be reproduced
in isolation and results are independent of execution order and worker
count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .classify import Hypothesis, HypothesisDecision, decide
from .echo import suppress_point_returns, synthesize
from .localize import LocalizationResult, localize
from .ramap import compute_ra_map
from .scenario import (
    SceneClass,
    ScenarioSpec,
    SnrSpec,
    randomize_scenario,
    scenario_from_doc,
)
from .surface import RansacConfig, SurfaceEstimate, estimate_surface


@dataclass(frozen=True)
class PipelineOptions:
    """Knobs of the three-stage pipeline shared by all trials."""

    estimator: str = "ransac"
    k_peaks: int | None = None          # None: derived from the true length
    guard_m: float = 1.0
    min_length: float = 1.0
    ransac: RansacConfig = field(default_factory=RansacConfig)
    refine_peak: bool = False
    use_truth_surface: bool = False     # oracle Stage I
    noise_floor_db: float = 12.0
    ghost_suppression_db: float = 15.0
    stage1_window: str | None = "hann"  # taper for the peak-extraction map
    stage1_clean: int = 8               # point returns cancelled on Stage I retry


def default_k(spec: ScenarioSpec) -> int:
    """Peak count matched to the number of occupied wall range cells."""
    if spec.surface is None:
        return 35
    k = math.ceil(spec.surface.length / spec.radar.range_bin_m)
    return int(min(max(k, 6), 64))


def _stage1_ladder(echo, ra_map, spec: ScenarioSpec,
                   options: PipelineOptions) -> SurfaceEstimate:
    """Progressive surface-estimation attempts.

    The first rung fits on a frame with the dominant point returns
    cancelled (a strong two-bounce blob otherwise floods the candidate set
    with its sidelobe fan), then once more accepting one fewer inlier,
    since the cancellation may itself consume ridge cells.  The next rungs
    search only below the dominant return, where multipath structure
    cannot reach: on a fully tapered map (which merges adjacent ridge
    cells, so the consensus threshold and count relax accordingly) and on
    a deeply cancelled untapered map with a raised floor (full angle
    resolution for gently tilted walls).  The last rung fits the raw
    tapered map, rescuing wall-dominant scenes where cancellation hurt
    more than it helped.  Each rung runs only when the previous ones found
    nothing.
    """
    k = options.k_peaks or default_k(spec)
    cfg = replace(options.ransac, seed=spec.seed)
    window = options.stage1_window

    if options.stage1_clean <= 0:
        stage1_map = (compute_ra_map(echo, spec.radar, window=window)
                      if window else ra_map)
        return estimate_surface(stage1_map, k=k, method=options.estimator,
                                config=cfg, min_length=options.min_length,
                                noise_floor_db=options.noise_floor_db)

    cleaned = suppress_point_returns(echo.samples, spec.radar,
                                     max_components=options.stage1_clean)
    cleaned_map = compute_ra_map(cleaned, spec.radar, window=window)
    est = estimate_surface(cleaned_map, k=k, method=options.estimator,
                           config=cfg, min_length=options.min_length,
                           noise_floor_db=options.noise_floor_db)
    if est.detected:
        return est

    # cancellation may itself consume ridge cells; accept one fewer on the
    # same map before reaching for coarser rungs
    relaxed = replace(cfg, min_inliers=max(4, cfg.min_inliers - 1))
    est = estimate_surface(cleaned_map, k=k, method=options.estimator,
                           config=relaxed, min_length=options.min_length,
                           noise_floor_db=options.noise_floor_db)
    if est.detected:
        return est

    flat = int(np.argmax(np.where(ra_map.fov_mask(), ra_map.magnitude, -1.0)))
    gate = float(ra_map.range_axis_m[flat // ra_map.magnitude.shape[1]]) - 4.5
    if gate > 4.0:
        wide = replace(relaxed,
                       inlier_threshold=2.0 * cfg.inlier_threshold)
        est = estimate_surface(
            compute_ra_map(cleaned, spec.radar, window="hann2d"), k=k,
            method=options.estimator, config=wide,
            min_length=options.min_length,
            noise_floor_db=options.noise_floor_db, max_range_m=gate)
        if est.detected:
            return est
        deep = suppress_point_returns(echo.samples, spec.radar,
                                      max_components=3 * options.stage1_clean)
        est = estimate_surface(
            compute_ra_map(deep, spec.radar), k=k, method=options.estimator,
            config=relaxed, min_length=options.min_length,
            noise_floor_db=max(options.noise_floor_db, 18.0),
            max_range_m=gate)
        if est.detected:
            return est

    return estimate_surface(compute_ra_map(echo, spec.radar, window=window),
                            k=k, method=options.estimator, config=cfg,
                            min_length=options.min_length,
                            noise_floor_db=options.noise_floor_db)


@dataclass
class TrialRecord:
    scene_class: SceneClass
    seed: int
    snr_surface_db: float
    snr_target_db: float
    truth_target: tuple[float, float] | None
    truth_surface: tuple[float, float, float, float] | None  # x, y, D, theta
    estimate: SurfaceEstimate | None = None
    decision: HypothesisDecision | None = None
    localization: LocalizationResult | None = None
    error_x: float | None = None
    error_y: float | None = None
    error_d: float | None = None
    surface_errors: dict | None = None
    timings_ms: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None

    @property
    def decided_nlos(self) -> bool | None:
        if self.decision is None:
            return None
        return self.decision.hypothesis is Hypothesis.NLOS


def run_trial(spec: ScenarioSpec, options: PipelineOptions = PipelineOptions()) -> TrialRecord:
    """Run the full pipeline on one scenario; stage errors are recorded in
    the trial record and never abort the caller's batch."""
    record = TrialRecord(
        scene_class=spec.scene_class, seed=spec.seed,
        snr_surface_db=spec.snr.surface_snr_db,
        snr_target_db=spec.snr.target_snr_db,
        truth_target=(spec.target.x, spec.target.y) if spec.target else None,
        truth_surface=(spec.surface.center_x, spec.surface.center_y,
                       spec.surface.length, spec.surface.orientation_deg)
        if spec.surface else None,
    )
    try:
        t0 = time.perf_counter()
        echo = synthesize(spec,
                          ghost_suppression_db=options.ghost_suppression_db)
        t1 = time.perf_counter()
        ra_map = compute_ra_map(echo, spec.radar)
        t2 = time.perf_counter()

        if options.use_truth_surface and spec.surface is not None:
            estimate = SurfaceEstimate.from_truth(spec.surface)
        else:
            estimate = _stage1_ladder(echo, ra_map, spec, options)
        t3 = time.perf_counter()
        decision = decide(estimate, ra_map, guard_m=options.guard_m,
                          refine=options.refine_peak)
        t4 = time.perf_counter()
        loc = localize(decision, estimate)
        t5 = time.perf_counter()

        record.estimate = estimate
        record.decision = decision
        record.localization = loc
        record.timings_ms = {
            "synthesize": 1e3 * (t1 - t0), "ra_map": 1e3 * (t2 - t1),
            "stage1": 1e3 * (t3 - t2), "stage2": 1e3 * (t4 - t3),
            "stage3": 1e3 * (t5 - t4),
        }
        if spec.target is not None:
            record.error_x = loc.x - spec.target.x
            record.error_y = loc.y - spec.target.y
            record.error_d = math.hypot(record.error_x, record.error_y)
        if spec.surface is not None and estimate.detected and \
                estimate.estimator_id != "truth":
            record.surface_errors = {
                "center_x": estimate.center_x - spec.surface.center_x,
                "center_y": estimate.center_y - spec.surface.center_y,
                "length": estimate.length - spec.surface.length,
                "theta_deg": estimate.orientation_deg
                - spec.surface.orientation_deg,
            }
    except Exception as exc:  # noqa: BLE001 - batch must survive any trial
        record.error = f"{type(exc).__name__}: {exc}"
    return record


def rmse(values) -> float:
    arr = np.asarray(list(values), dtype=float)
    if arr.size == 0:
        return float("nan")
    return float(np.sqrt(np.mean(arr**2)))


def rmse_d(records: list[TrialRecord]) -> float:
    """Euclidean localization RMSE over the trials that produced an estimate."""
    return rmse(r.error_d for r in records if r.ok and r.error_d is not None)


def rmse_d_standard_error(records: list[TrialRecord]) -> float:
    """Delta-method standard error of the Euclidean RMSE."""
    sq = np.asarray([r.error_d**2 for r in records
                     if r.ok and r.error_d is not None])
    if sq.size < 2:
        return float("nan")
    mean_sq = float(np.mean(sq))
    if mean_sq == 0.0:
        return 0.0
    se_mean = float(np.std(sq, ddof=1)) / math.sqrt(sq.size)
    return se_mean / (2.0 * math.sqrt(mean_sq))


def identification_rate(records: list[TrialRecord]) -> float:
    """Fraction of decided-NLOS outcomes among completed trials."""
    flags = [r.decided_nlos for r in records if r.ok and r.decided_nlos is not None]
    if not flags:
        return float("nan")
    return float(np.mean(flags))


# ---------------------------------------------------------------------------
# sweeps

SWEPT_VARIABLES = ("delta_snr", "snr_w", "theta_w", "d_w", "sigma_x")


@dataclass(frozen=True)
class SweepSpec:
    """One experiment family: a grid over one scene variable.

    mode "fixed" reruns a fixed base scene (seeded draws and noise vary per
    trial); mode "identification" randomizes scene geometry per trial from
    the identification preset and runs matched truth-NLOS and truth-LOS
    ensembles to estimate Pr(I1|I1) and Pr(I1|I0).
    """

    name: str
    swept: str
    grid: tuple
    trials_per_point: int
    base_scene: dict
    mode: str = "fixed"
    seed: int = 0

    def __post_init__(self):
        if self.swept not in SWEPT_VARIABLES:
            raise ValueError(f"swept must be one of {SWEPT_VARIABLES}")
        if not self.grid:
            raise ValueError("grid must be nonempty")
        if self.trials_per_point < 1:
            raise ValueError("trials_per_point must be at least 1")
        if self.mode not in ("fixed", "identification"):
            raise ValueError("mode must be 'fixed' or 'identification'")


def trial_seed(master_seed: int, point_index: int, trial_index: int) -> int:
    """Counter-style split: any (point, trial) is reproducible in isolation."""
    ss = np.random.SeedSequence(master_seed,
                                spawn_key=(point_index, trial_index))
    return int(ss.generate_state(1)[0])


def _apply_swept(doc: dict, swept: str, value: float) -> dict:
    doc = {k: (dict(v) if isinstance(v, dict) else v) for k, v in doc.items()}
    snr = doc.setdefault("snr", {"surface_db": 30.0, "target_db": 50.0})
    if swept == "delta_snr":
        snr["target_db"] = float(snr["surface_db"]) + value
    elif swept == "snr_w":
        snr["surface_db"] = value
    elif swept == "theta_w":
        doc["surface"]["theta_deg"] = value
    elif swept == "d_w":
        doc["surface"]["length"] = value
    elif swept == "sigma_x":
        doc["surface"]["sigma_x"] = value
    return doc


def _fixed_point_specs(sweep: SweepSpec, point_index: int,
                       value: float) -> list[ScenarioSpec]:
    doc = _apply_swept(sweep.base_scene, sweep.swept, value)
    base = scenario_from_doc(doc)
    return [base.with_seed(trial_seed(sweep.seed, point_index, j))
            for j in range(sweep.trials_per_point)]


def _identification_point_specs(sweep: SweepSpec, point_index: int,
                                value: float) -> list[ScenarioSpec]:
    doc = sweep.base_scene
    snr_w = float(doc.get("snr", {}).get("surface_db", 30.0))
    snr = SnrSpec(surface_snr_db=snr_w, target_snr_db=snr_w + value)
    sigma_x = float(doc.get("surface", {}).get("sigma_x", 0.0))
    specs = []
    for j in range(sweep.trials_per_point):
        seed = trial_seed(sweep.seed, point_index, j)
        specs.append(randomize_scenario(SceneClass.NLOS, seed,
                                        preset="identification", snr=snr,
                                        sigma_x=sigma_x))
    for j in range(sweep.trials_per_point):
        seed = trial_seed(sweep.seed, point_index, sweep.trials_per_point + j)
        cls = SceneClass.LOS_NO_SURFACE if j % 2 == 0 else SceneClass.LOS_SURFACE_MP
        specs.append(randomize_scenario(cls, seed, preset="identification",
                                        snr=snr, sigma_x=sigma_x))
    return specs


CSV_COLUMNS = ("value", "trials", "failures", "rmse_d", "se_rmse_d",
               "rmse_x", "rmse_y", "pr_i1_i1", "pr_i1_i0", "detect_rate",
               "rmse_surface_theta_deg", "rmse_surface_center_m",
               "rmse_surface_length_m")


def _aggregate(value: float, records: list[TrialRecord]) -> dict:
    ok = [r for r in records if r.ok]
    truth_nlos = [r for r in ok if r.scene_class is SceneClass.NLOS]
    truth_los = [r for r in ok if r.scene_class is not SceneClass.NLOS]
    row: dict = {
        "value": value,
        "trials": len(records),
        "failures": len(records) - len(ok),
        "rmse_d": rmse_d(truth_nlos if truth_nlos else ok),
        "se_rmse_d": rmse_d_standard_error(truth_nlos if truth_nlos else ok),
        "rmse_x": rmse(r.error_x for r in ok if r.error_x is not None),
        "rmse_y": rmse(r.error_y for r in ok if r.error_y is not None),
        "pr_i1_i1": identification_rate(truth_nlos),
        "pr_i1_i0": identification_rate(truth_los),
        "detect_rate": (float(np.mean([r.estimate.detected for r in ok
                                       if r.estimate is not None]))
                        if ok else float("nan")),
    }
    surf = [r.surface_errors for r in ok if r.surface_errors is not None]
    row["rmse_surface_theta_deg"] = rmse(s["theta_deg"] for s in surf)
    row["rmse_surface_center_m"] = rmse(
        math.hypot(s["center_x"], s["center_y"]) for s in surf)
    row["rmse_surface_length_m"] = rmse(s["length"] for s in surf)
    return row


def run_sweep(sweep: SweepSpec, options: PipelineOptions = PipelineOptions(),
              workers: int = 1, keep_records: bool = False):
    """Run every grid point and aggregate per-point metrics.

    Returns (rows, records_by_point); the latter is populated only when
    ``keep_records`` is true.  Output is identical for any worker count:
    trials are aggregated in (point, trial) index order after execution.
    """
    tasks: list[tuple[int, int, ScenarioSpec]] = []
    for i, value in enumerate(sweep.grid):
        if sweep.mode == "fixed":
            specs = _fixed_point_specs(sweep, i, float(value))
        else:
            specs = _identification_point_specs(sweep, i, float(value))
        tasks.extend((i, j, s) for j, s in enumerate(specs))

    results: dict[tuple[int, int], TrialRecord] = {}
    if workers <= 1:
        for i, j, spec in tasks:
            results[(i, j)] = run_trial(spec, options)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = pool.map(lambda t: run_trial(t[2], options), tasks)
            for (i, j, _), rec in zip(tasks, records):
                results[(i, j)] = rec

    rows = []
    by_point: list[list[TrialRecord]] = []
    for i, value in enumerate(sweep.grid):
        point = [results[key] for key in sorted(results) if key[0] == i]
        rows.append(_aggregate(float(value), point))
        if keep_records:
            by_point.append(point)
    return rows, by_point


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return f"{v:.10g}"
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(_fmt(row.get(c)) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def write_sweep_csv(rows: list[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(rows_to_csv(rows))


# ---------------------------------------------------------------------------
# canonical experiment families


def reference_scene_doc(snr_surface_db: float = 30.0,
                        snr_target_db: float = 50.0) -> dict:
    """The common evaluation scene: an 8 m wall at (2, 18) tilted 25 degrees,
    target anchored 11.9 m beyond the specular point at bearing 6.3 degrees."""
    return {
        "surface": {"x": 2.0, "y": 18.0, "length": 8.0, "theta_deg": 25.0,
                    "lambda": 0.846, "psi": 14.0, "sigma_x": 0.0},
        "target": {"phi_ko_deg": 6.3, "r2": 11.9},
        "snr": {"surface_db": snr_surface_db, "target_db": snr_target_db},
        "scene_class": "nlos",
    }


def sweep_delta_snr(grid=(10.0, 20.0, 30.0, 40.0), trials_per_point: int = 200,
                    snr_surface_db: float = 30.0, seed: int = 0) -> SweepSpec:
    """Localization RMSE versus target-minus-surface SNR on the fixed scene."""
    return SweepSpec(name="delta_snr", swept="delta_snr", grid=tuple(grid),
                     trials_per_point=trials_per_point,
                     base_scene=reference_scene_doc(snr_surface_db),
                     mode="fixed", seed=seed)


def sweep_identification(grid=(0.0, 10.0, 20.0, 30.0, 40.0),
                         trials_per_point: int = 200,
                         snr_surface_db: float = 30.0, seed: int = 0) -> SweepSpec:
    """Pr(I1|I1) and Pr(I1|I0) versus differential SNR on randomized scenes."""
    return SweepSpec(name="identification", swept="delta_snr", grid=tuple(grid),
                     trials_per_point=trials_per_point,
                     base_scene={"snr": {"surface_db": snr_surface_db,
                                         "target_db": snr_surface_db}},
                     mode="identification", seed=seed)


def sweep_irregularity(grid=(0.0, 0.1, 0.2, 0.3), trials_per_point: int = 200,
                       snr_target_db: float = 55.0, seed: int = 0) -> SweepSpec:
    """Localization RMSE versus wall roughness on the fixed scene."""
    return SweepSpec(name="irregularity", swept="sigma_x", grid=tuple(grid),
                     trials_per_point=trials_per_point,
                     base_scene=reference_scene_doc(30.0, snr_target_db),
                     mode="fixed", seed=seed)


def sweep_surface_angle(grid=(5.0, 15.0, 25.0, 35.0, 45.0),
                        trials_per_point: int = 200,
                        snr_target_db: float = 50.0, seed: int = 0) -> SweepSpec:
    """Localization RMSE versus wall orientation on the fixed scene."""
    doc = reference_scene_doc(30.0, snr_target_db)
    doc["target"] = {"phi_ko_deg": 9.46, "r2": 11.89}
    return SweepSpec(name="surface_angle", swept="theta_w", grid=tuple(grid),
                     trials_per_point=trials_per_point, base_scene=doc,
                     mode="fixed", seed=seed)


def sweep_surface_length(grid=(1.0, 3.0, 5.0, 7.0, 9.0, 11.0),
                         trials_per_point: int = 200,
                         snr_target_db: float = 50.0, seed: int = 0) -> SweepSpec:
    """Localization RMSE versus wall length on the fixed scene."""
    doc = reference_scene_doc(30.0, snr_target_db)
    doc["target"] = {"phi_ko_deg": 9.46, "r2": 11.89}
    return SweepSpec(name="surface_length", swept="d_w", grid=tuple(grid),
                     trials_per_point=trials_per_point, base_scene=doc,
                     mode="fixed", seed=seed)


SWEEP_FAMILIES = {
    "delta_snr": sweep_delta_snr,
    "identification": sweep_identification,
    "irregularity": sweep_irregularity,
    "surface_angle": sweep_surface_angle,
    "surface_length": sweep_surface_length,
}
