"""End-to-end dataset construction for the five evaluation cases.

Case table:

    1  ground-truth TV track, no impairment
    2  full echo-sensing pipeline, adverse weather (20 dB echo power loss)
    3  onboard radar, clear
    4  onboard radar, partial NLoS (75% of columns dropped)
    5  onboard radar, adverse weather (10x measurement noise)

Every sample is generated from a seed derived as hash(global_seed,
sample_id), so builds are byte-identical regardless of worker count.
"""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import GridSpec, KalmanTuning, PipelineConfig, RadarModel, config_fingerprint
from .echo import apply_weather_loss, echo_params_from_truth, synth_echo, wrap_angle
from .errors import ConfigError, GeometryError
from .estimation import estimate_atd
from .fusion import run_ca_kalman, solve_position_wls, solve_velocity
from .kinematics import BehaviorClass, PhysInfoMatrix, StateSample, gen_trajectory, sample_window
from .sampleio import DatasetManifest, ManifestEntry, Sample, write_manifest, write_sample
from .seeds import derive_seed

TV_SOURCES = ("truth", "isac", "radar")
IMPAIRMENTS = ("none", "weather", "nlos")

_CASE_TABLE = {
    1: ("truth", "none"),
    2: ("isac", "weather"),
    3: ("radar", "none"),
    4: ("radar", "nlos"),
    5: ("radar", "weather"),
}


@dataclass(frozen=True)
class CaseSpec:
    """TV-track source and impairment for one evaluation case."""

    case_id: int
    tv_source: str
    impairment: str
    weather_loss_db: float = 20.0
    nlos_rate: float = 0.75

    def __post_init__(self):
        if self.tv_source not in TV_SOURCES:
            raise ConfigError(f"unknown tv_source {self.tv_source!r}")
        if self.impairment not in IMPAIRMENTS:
            raise ConfigError(f"unknown impairment {self.impairment!r}")
        if self.case_id in _CASE_TABLE and _CASE_TABLE[self.case_id] != (self.tv_source, self.impairment):
            raise ConfigError(
                f"case {self.case_id} is defined as {_CASE_TABLE[self.case_id]}, "
                f"got ({self.tv_source}, {self.impairment})"
            )
        if not 0.0 <= self.nlos_rate < 1.0:
            raise ConfigError("nlos_rate must lie in [0, 1)")

    @classmethod
    def for_case(cls, case_id: int) -> "CaseSpec":
        if case_id not in _CASE_TABLE:
            raise ConfigError(f"case id must be 1..5, got {case_id}")
        src, imp = _CASE_TABLE[case_id]
        return cls(case_id, src, imp)


# ---------------------------------------------------------------------------
# sensing paths
# ---------------------------------------------------------------------------


def isac_track(tv_win: PhysInfoMatrix, cfg: PipelineConfig, snr_db: float, seed: int) -> PhysInfoMatrix:
    """Echo-domain sensing of a ground-truth window: synth -> estimate -> fuse."""
    wf = cfg.waveform
    n = tv_win.n
    fixes = []
    noise_vars = np.zeros(n)
    for s in range(n):
        col = tv_win.data[:, s]
        state = StateSample(s / tv_win.rate_hz, *col)
        ests = []
        for bs in cfg.base_stations:
            params = echo_params_from_truth(state, bs, wf)
            cube = synth_echo(params, bs, wf, snr_db, rng_seed=seed, snapshot=s)
            ests.append(estimate_atd(cube, bs, wf, cfg.grid))
        sigma2 = np.array([e.noise_var for e in ests])
        weights = 1.0 / np.maximum(sigma2, 1e-12)
        try:
            pos = solve_position_wls(ests, cfg.base_stations)
            bearings = [wrap_angle(e.aoa_rad + b.boresight_rad) for e, b in zip(ests, cfg.base_stations)]
            vel = solve_velocity([e.doppler_hz for e in ests], bearings, wf, weights)
            fixes.append((pos, vel))
        except GeometryError:
            fixes.append(None)
        noise_vars[s] = float(sigma2.mean())
    return run_ca_kalman(fixes, tv_win.rate_hz, cfg.kalman, noise_vars=noise_vars)


def radar_measurements(
    tv_win: PhysInfoMatrix, uv_high: np.ndarray, radar: RadarModel, weather: bool, seed: int
) -> np.ndarray:
    """Noisy global-frame [x, y, vx, vy] measurements of an onboard radar.

    Relative position/velocity (TV minus UV) get zero-mean Gaussian noise,
    10x amplitude under adverse weather (a 20 dB echo power loss), and are
    mapped back to the global frame with the UV state.
    """
    if uv_high.shape != (6, tv_win.n):
        raise ConfigError("uv state grid must match the TV window")
    scale = radar.weather_noise_scale if weather else 1.0
    rng = np.random.default_rng(derive_seed(seed, "radar"))
    meas = tv_win.data[:4] - uv_high[:4]
    meas[:2] += radar.sigma_pos_m * scale * rng.standard_normal((2, tv_win.n))
    meas[2:4] += radar.sigma_vel_mps * scale * rng.standard_normal((2, tv_win.n))
    return meas + uv_high[:4]


def measure_onboard_radar(
    tv_win: PhysInfoMatrix,
    uv_high: np.ndarray,
    radar: RadarModel,
    weather: bool,
    seed: int,
    jerk_psd: float = 5.0,
) -> PhysInfoMatrix:
    """Onboard-radar baseline: noisy relative measurements, same CA filter."""
    scale = radar.weather_noise_scale if weather else 1.0
    sp = radar.sigma_pos_m * scale
    sv = radar.sigma_vel_mps * scale
    meas = radar_measurements(tv_win, uv_high, radar, weather, seed)

    from .fusion import PositionFix, VelocityFix  # local import avoids cycle at module load

    fixes = []
    for s in range(tv_win.n):
        x, y, vx, vy = meas[:, s]
        fixes.append(
            (PositionFix(x, y, 0.0, 0.0), VelocityFix(math.hypot(vx, vy), math.atan2(vy, vx)))
        )
    tuning = KalmanTuning(
        jerk_psd=jerk_psd,
        meas_pos_var_floor=max(sp * sp, 1e-12),
        meas_vel_var_floor=max(sv * sv, 1e-12),
        pos_var_scale=0.0,
        vel_var_scale=0.0,
    )
    return run_ca_kalman(fixes, tv_win.rate_hz, tuning)


def apply_nlos_drop(p: PhysInfoMatrix, rate: float = 0.75, seed: int = 0, fill: str = "ffill") -> PhysInfoMatrix:
    """Drop columns i.i.d. with probability ``rate`` and fill the gaps.

    The first column is never dropped; "ffill" repeats the nearest retained
    predecessor, "zero" blanks dropped columns. Output shape is unchanged.
    """
    if not 0.0 <= rate < 1.0:
        raise ConfigError("drop rate must lie in [0, 1)")
    if fill not in ("ffill", "zero"):
        raise ConfigError("fill must be 'ffill' or 'zero'")
    n = p.n
    rng = np.random.default_rng(derive_seed(seed, "nlos"))
    keep = rng.uniform(size=n) >= rate
    keep[0] = True
    if fill == "zero":
        data = np.where(keep[None, :], p.data, 0.0)
    else:
        idx = np.where(keep, np.arange(n), 0)
        idx = np.maximum.accumulate(idx)
        data = p.data[:, idx]
    return PhysInfoMatrix(data, p.rate_hz)


# ---------------------------------------------------------------------------
# sample construction
# ---------------------------------------------------------------------------


def make_sample(
    cfg: PipelineConfig,
    case: CaseSpec,
    behavior: BehaviorClass,
    sample_id: str,
    seed: int,
    snr_override: float | None = None,
) -> tuple[Sample, float | None]:
    """Deterministically build one sample; returns (sample, drawn snr)."""
    sample_seed = derive_seed(seed, sample_id)
    traj = gen_trajectory(behavior, cfg.scenario, sample_seed, cfg.class_ranges)
    win = sample_window(traj, cfg.scenario, "overlap", rng_seed=derive_seed(sample_seed, "window"))

    snr_db: float | None = None
    if case.tv_source == "truth":
        p_tv = win.tv
    elif case.tv_source == "isac":
        if snr_override is not None:
            snr_db = float(snr_override)
        else:
            lo, hi = cfg.snr_range_db
            snr_db = float(np.random.default_rng(derive_seed(sample_seed, "snr")).uniform(lo, hi))
        snr_eff = apply_weather_loss(snr_db, case.weather_loss_db) if case.impairment == "weather" else snr_db
        p_tv = isac_track(win.tv, cfg, snr_eff, sample_seed)
    else:
        t_grid = win.start_s + np.arange(win.tv.n) / win.tv.rate_hz
        uv_high = traj.uv_at(t_grid)
        p_tv = measure_onboard_radar(
            win.tv,
            uv_high,
            cfg.radar,
            weather=case.impairment == "weather",
            seed=sample_seed,
            jerk_psd=cfg.kalman.jerk_psd,
        )
    if case.impairment == "nlos":
        p_tv = apply_nlos_drop(p_tv, case.nlos_rate, sample_seed, cfg.nlos_fill)

    sample = Sample(
        p_tv=p_tv.data,
        p_uv=win.uv.data,
        label=behavior.label,
        sample_id=sample_id,
        seed=sample_seed,
        case_id=case.case_id,
    )
    return sample, snr_db


def _sample_plan(cfg: PipelineConfig, n_samples: int, n_test: int, seed: int, eval_only: bool):
    """Assign (sample_id, behavior, split) triples.

    Known classes are balanced round-robin; the following pool (open-set
    only) never lands in the training split. Test ids are disjoint from
    train/val by construction.
    """
    known = BehaviorClass.known()
    plan = []
    if eval_only:
        for i in range(n_samples):
            plan.append((f"e{i:05d}", known[i % len(known)], "test"))
        n_follow = round(cfg.following_fraction * n_samples)
        for i in range(n_follow):
            plan.append((f"ef{i:05d}", BehaviorClass.FOLLOWING, "test"))
        return plan

    ids = [f"s{i:05d}" for i in range(n_samples)]
    rng = np.random.default_rng(derive_seed(seed, "split"))
    order = rng.permutation(n_samples)
    n_val = round(cfg.val_fraction * n_samples)
    val_ids = {ids[i] for i in order[:n_val]}
    for i, sid in enumerate(ids):
        plan.append((sid, known[i % len(known)], "val" if sid in val_ids else "train"))
    n_follow = round(cfg.following_fraction * n_samples)
    for i in range(n_follow):
        plan.append((f"f{i:05d}", BehaviorClass.FOLLOWING, "val"))
    for i in range(n_test):
        plan.append((f"t{i:05d}", known[i % len(known)], "test"))
    for i in range(round(cfg.following_fraction * n_test)):
        plan.append((f"tf{i:05d}", BehaviorClass.FOLLOWING, "test"))
    return plan


def _build_one(args):
    cfg, case, out_dir, seed, snr_override, sid, behavior, split = args
    sample, snr_db = make_sample(cfg, case, behavior, sid, seed, snr_override)
    rel = f"{sid}.isbp"
    write_sample(sample, Path(out_dir) / rel)
    return ManifestEntry(
        sample_id=sid,
        label=behavior.label,
        split=split,
        path=rel,
        seed=sample.seed,
        snr_db=snr_db,
        case_id=case.case_id,
    )


def build_dataset(
    cfg: PipelineConfig,
    case: CaseSpec,
    n_samples: int,
    seed: int,
    out_dir,
    n_test: int | None = None,
    snr_override: float | None = None,
    eval_only: bool = False,
    n_workers: int | None = None,
) -> DatasetManifest:
    """Generate a labeled dataset and its manifest under ``out_dir``.

    Deterministic for fixed (cfg, case, n_samples, seed): per-sample seeds
    are derived from the sample id, so the same bytes appear for any
    ``n_workers``. The manifest is written once at the end.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if n_test is None:
        n_test = 0 if eval_only else round(n_samples / 5)
    plan = _sample_plan(cfg, n_samples, n_test, seed, eval_only)
    jobs = [(cfg, case, str(out), seed, snr_override, sid, beh, split) for sid, beh, split in plan]
    workers = n_workers if n_workers is not None else cfg.n_workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_build_one, jobs, chunksize=4))
    else:
        entries = [_build_one(j) for j in jobs]
    entries.sort(key=lambda e: e.sample_id)
    manifest = DatasetManifest(
        fingerprint=config_fingerprint(cfg, seed, case, n_samples, n_test, snr_override, eval_only),
        case_id=case.case_id,
        entries=entries,
    )
    write_manifest(manifest, out / "manifest.json")
    return manifest


def build_snr_sweep(
    cfg: PipelineConfig,
    snr_list,
    n_samples: int,
    seed: int,
    out_root,
    impairment: str = "none",
    n_workers: int | None = None,
) -> dict:
    """Fixed-SNR echo-pipeline evaluation sets sharing trajectories.

    The same seed is used for every SNR point, so the underlying scenarios
    are identical and only the sensing quality differs.
    """
    case = CaseSpec(0, "isac", impairment)
    out_root = Path(out_root)
    manifests = {}
    for snr in snr_list:
        sub = out_root / f"snr_{snr:+.0f}dB"
        build_dataset(
            cfg, case, n_samples, seed, sub,
            snr_override=float(snr), eval_only=True, n_workers=n_workers,
        )
        manifests[float(snr)] = str(sub / "manifest.json")
    return manifests
