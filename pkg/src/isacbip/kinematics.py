"""Ground-truth trajectory generation for the seven maneuver classes.

Motion is composed from analytic primitives (smoothstep acceleration
pulses, quintic S-curve lane shifts, sine-squared swerve bumps, sinusoidal
acceleration jitter) whose position/velocity/acceleration are evaluated in
closed form at arbitrary times. This keeps stored velocity/acceleration
exactly consistent with position under numerical differentiation and makes
resampling at any rate exact, with no integration drift.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CLASS_RANGES, ScenarioConfig
from .errors import ConfigError
from .seeds import derive_seed

# Longitudinal start position range (m); geometry is chosen so targets stay
# well inside the default base-station coverage.
X_START = (60.0, 200.0)


class BehaviorClass(enum.Enum):
    """Maneuver classes with their ordinal labels."""

    HARD_BRAKE = ("hard_brake", 1)
    LEFT_LANE_CHANGE = ("left_lane_change", 2)
    RIGHT_LANE_CHANGE = ("right_lane_change", 3)
    OVERTAKE = ("overtake", 4)
    HARD_ACCEL = ("hard_accel", 5)
    EVASIVE_SWERVE = ("evasive_swerve", 6)
    FOLLOWING = ("following", 7)

    @property
    def slug(self) -> str:
        return self.value[0]

    @property
    def label(self) -> int:
        return self.value[1]

    @property
    def open_set_only(self) -> bool:
        """Following is held out of every training split."""
        return self is BehaviorClass.FOLLOWING

    @classmethod
    def from_label(cls, label: int) -> "BehaviorClass":
        for b in cls:
            if b.label == label:
                return b
        raise ValueError(f"no behavior class with label {label}")

    @classmethod
    def known(cls) -> tuple:
        return tuple(b for b in cls if not b.open_set_only)


@dataclass(frozen=True)
class KinematicParams:
    """Sampled maneuver parameters (SI units)."""

    speed: float
    peak_accel: float
    lateral_disp: float
    onset: float
    duration: float
    extras: dict = field(default_factory=dict)


@dataclass(frozen=True)
class StateSample:
    t: float
    x: float
    y: float
    vx: float
    vy: float
    ax: float
    ay: float


@dataclass(frozen=True)
class PhysInfoMatrix:
    """6 x N time series of [x, y, vx, vy, ax, ay] columns at a fixed rate."""

    data: np.ndarray
    rate_hz: float

    def __post_init__(self):
        if self.data.shape[0] != 6:
            raise ValueError("physical information matrix must have 6 rows")

    @property
    def n(self) -> int:
        return self.data.shape[1]


# ---------------------------------------------------------------------------
# analytic motion primitives
# ---------------------------------------------------------------------------


def _smoothstep(u):
    return 3.0 * u**2 - 2.0 * u**3


def _smoothstep_i1(u):
    # integral of _smoothstep from 0
    return u**3 - 0.5 * u**4


def _smoothstep_i2(u):
    # double integral of _smoothstep from 0
    return 0.25 * u**4 - 0.1 * u**5


@dataclass(frozen=True)
class AccelPulse:
    """Acceleration pulse: smoothstep ramp up, hold, ramp down.

    The ramps make acceleration C1-continuous; velocity and position
    contributions are exact integrals of the profile.
    """

    peak: float
    t_start: float
    t_end: float
    ramp: float

    def eval(self, t):
        span = self.t_end - self.t_start
        r = self.ramp
        b = span - 2.0 * r
        if b < -1e-12 or r <= 0:
            raise ConfigError("pulse ramp exceeds half the pulse span")
        tt = np.asarray(t, dtype=float) - self.t_start
        acc = np.zeros_like(tt)
        vel = np.zeros_like(tt)
        pos = np.zeros_like(tt)

        v_b0 = 0.5 * r                      # velocity gain at end of ramp-up
        x_b0 = r * r * _smoothstep_i2(1.0)  # position gain at end of ramp-up
        v_c0 = v_b0 + b
        x_c0 = x_b0 + v_b0 * b + 0.5 * b * b
        v_tot = span - r
        x_tot = x_c0 + v_c0 * r + r * r * (0.5 - _smoothstep_i2(1.0))

        m = (tt >= 0) & (tt < r)
        u = tt[m] / r
        acc[m] = _smoothstep(u)
        vel[m] = r * _smoothstep_i1(u)
        pos[m] = r * r * _smoothstep_i2(u)

        m = (tt >= r) & (tt < r + b)
        tau = tt[m] - r
        acc[m] = 1.0
        vel[m] = v_b0 + tau
        pos[m] = x_b0 + v_b0 * tau + 0.5 * tau * tau

        m = (tt >= r + b) & (tt < span)
        u = (tt[m] - r - b) / r
        acc[m] = 1.0 - _smoothstep(u)
        vel[m] = v_c0 + r * (u - _smoothstep_i1(u))
        pos[m] = x_c0 + v_c0 * r * u + r * r * (0.5 * u * u - _smoothstep_i2(u))

        m = tt >= span
        vel[m] = v_tot
        pos[m] = x_tot + v_tot * (tt[m] - span)

        return self.peak * pos, self.peak * vel, self.peak * acc


@dataclass(frozen=True)
class SCurveShift:
    """Septic smoothstep lateral displacement (S-curve lane shift).

    Reaches exactly ``disp`` at the end of the segment. The 7th-order
    polynomial has zero velocity, acceleration AND jerk at both boundaries,
    which keeps finite-difference checks of the sampled track clean at the
    default rates (a quintic's jerk step is already visible at 400 Hz).
    """

    disp: float
    t_start: float
    duration: float

    def eval(self, t):
        tt = np.asarray(t, dtype=float) - self.t_start
        u = np.clip(tt / self.duration, 0.0, 1.0)
        pos = self.disp * (u**4 * (35.0 - 84.0 * u + 70.0 * u**2 - 20.0 * u**3))
        inside = (tt > 0) & (tt < self.duration)
        vel = np.where(
            inside,
            self.disp * (u**3 * (140.0 - 420.0 * u + 420.0 * u**2 - 140.0 * u**3)) / self.duration,
            0.0,
        )
        acc = np.where(
            inside,
            self.disp
            * (u**2 * (420.0 - 1680.0 * u + 2100.0 * u**2 - 840.0 * u**3))
            / self.duration**2,
            0.0,
        )
        return pos, vel, acc


@dataclass(frozen=True)
class SineBump:
    """Out-and-back lateral excursion: disp * sin^6(pi u) over the segment.

    The sixth power keeps the first five derivatives zero at the segment
    boundaries (a plain half-sine steps the velocity, sin^2 steps the
    acceleration; both would break derivative consistency of the sampled
    track).
    """

    disp: float
    t_start: float
    duration: float

    def eval(self, t):
        tt = np.asarray(t, dtype=float) - self.t_start
        inside = (tt > 0) & (tt < self.duration)
        u = np.where(inside, tt / self.duration, 0.0)
        s = np.sin(np.pi * u)
        c = np.cos(np.pi * u)
        pos = self.disp * s**6
        vel = 6.0 * self.disp * np.pi / self.duration * s**5 * c
        acc = 6.0 * self.disp * np.pi**2 / self.duration**2 * (5.0 * s**4 * c**2 - s**6)
        return np.where(inside, pos, 0.0), np.where(inside, vel, 0.0), np.where(inside, acc, 0.0)


@dataclass(frozen=True)
class SineJitterAccel:
    """Smooth random acceleration jitter: a(t) = sum_k A_k sin(w_k t + phi_k).

    Being a fixed analytic function of time, the same draw evaluates
    consistently at any sampling rate.
    """

    amps: tuple
    omegas: tuple
    phases: tuple

    def eval(self, t):
        tt = np.asarray(t, dtype=float)
        pos = np.zeros_like(tt)
        vel = np.zeros_like(tt)
        acc = np.zeros_like(tt)
        for a, w, p in zip(self.amps, self.omegas, self.phases):
            acc += a * np.sin(w * tt + p)
            vel += (a / w) * (math.cos(p) - np.cos(w * tt + p))
            pos += (a / w) * (math.cos(p) * tt - (np.sin(w * tt + p) - math.sin(p)) / w)
        return pos, vel, acc


@dataclass(frozen=True)
class AxisLaw:
    """One axis of motion: p(t) = p0 + v0 t + sum of term contributions."""

    p0: float
    v0: float
    terms: tuple = ()

    def eval(self, t):
        tt = np.asarray(t, dtype=float)
        pos = self.p0 + self.v0 * tt
        vel = np.full_like(tt, self.v0)
        acc = np.zeros_like(tt)
        for term in self.terms:
            dp, dv, da = term.eval(tt)
            pos += dp
            vel += dv
            acc += da
        return pos, vel, acc


@dataclass(frozen=True)
class MotionLaws:
    """Planar motion as two independent axis laws."""

    x: AxisLaw
    y: AxisLaw

    def phys(self, t) -> np.ndarray:
        """Evaluate the 6 x N physical information rows at times ``t``."""
        px, vx, ax = self.x.eval(t)
        py, vy, ay = self.y.eval(t)
        return np.stack([px, py, vx, vy, ax, ay])


# ---------------------------------------------------------------------------
# trajectory containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryTrack:
    t: np.ndarray
    phys: np.ndarray  # (6, N)

    def sample(self, i: int) -> StateSample:
        return StateSample(self.t[i], *self.phys[:, i])

    @property
    def n(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class TrajectoryPair:
    """Ground-truth TV and UV motion over a full scenario."""

    tv: TrajectoryTrack  # sampled at the high rate
    uv: TrajectoryTrack  # sampled at the low rate
    behavior: BehaviorClass
    params: KinematicParams
    maneuver_span: tuple | None  # (start, end) of the labeled maneuver, None for following
    laws: tuple = field(repr=False, default=())  # (tv MotionLaws, uv MotionLaws)

    def tv_at(self, t) -> np.ndarray:
        return self.laws[0].phys(t)

    def uv_at(self, t) -> np.ndarray:
        return self.laws[1].phys(t)


@dataclass(frozen=True)
class WindowPair:
    """Wall-clock-aligned observation windows at the two rates."""

    tv: PhysInfoMatrix
    uv: PhysInfoMatrix
    start_s: float


# ---------------------------------------------------------------------------
# per-class builders
# ---------------------------------------------------------------------------


def _u(rng, lohi) -> float:
    lo, hi = lohi
    return float(rng.uniform(lo, hi))


def _jitter(rng, max_amp: float, n_components: int = 3) -> SineJitterAccel | None:
    if max_amp <= 0:
        return None
    raw = rng.uniform(0.4, 1.0, n_components)
    amps = raw / raw.sum() * max_amp * rng.uniform(0.5, 1.0)
    freqs = rng.uniform(0.1, 0.4, n_components)  # Hz, kept low to bound snap
    phases = rng.uniform(0.0, 2.0 * np.pi, n_components)
    return SineJitterAccel(tuple(amps), tuple(2.0 * np.pi * freqs), tuple(phases))


def _sample_onset(rng, cfg: ScenarioConfig, duration: float, margin: float = 0.2) -> float:
    hi = cfg.duration_s - duration - margin
    if hi < margin:
        raise ConfigError(f"maneuver of {duration:.2f}s does not fit the scenario")
    return float(rng.uniform(margin, hi))


def _uv_cruise(rng, cfg, tv_x0, tv_speed, ranges) -> MotionLaws:
    r = ranges.get("uv", DEFAULT_CLASS_RANGES["uv"])
    gap = _u(rng, r["gap"])
    speed = tv_speed + _u(rng, r["speed_delta"])
    lane = cfg.road_y_m - cfg.lane_width_m  # adjacent lane, benign ego role
    terms = ()
    jit = _jitter(rng, float(r.get("accel_jitter", 0.0)))
    if jit is not None:
        terms = (jit,)
    return MotionLaws(AxisLaw(tv_x0 - gap, speed, terms), AxisLaw(lane, 0.0))


def _build(behavior: BehaviorClass, cfg: ScenarioConfig, ranges: dict, rng):
    r = ranges[behavior.slug]
    x0 = float(rng.uniform(*X_START))
    y0 = cfg.road_y_m
    v0 = _u(rng, r["speed"])

    if behavior is BehaviorClass.FOLLOWING:
        terms = ()
        jit = _jitter(rng, float(r.get("accel_jitter", 0.0)))
        if jit is not None:
            terms = (jit,)
        tv = MotionLaws(AxisLaw(x0, v0, terms), AxisLaw(y0, 0.0))
        params = KinematicParams(v0, 0.0, 0.0, 0.0, 0.0)
        return tv, _uv_cruise(rng, cfg, x0, v0, ranges), params, None

    if behavior in (BehaviorClass.HARD_BRAKE, BehaviorClass.HARD_ACCEL):
        a_pk = _u(rng, r["peak_accel"])
        dur = _u(rng, r["duration"])
        onset = _sample_onset(rng, cfg, dur)
        # ramp floor bounds the snap so sampled tracks stay consistent
        # under finite differencing at 400 Hz even for brief pulses
        ramp = min(max(0.24, 0.3 * dur), 0.5 * dur)
        pulse = AccelPulse(a_pk, onset, onset + dur, ramp)
        tv = MotionLaws(AxisLaw(x0, v0, (pulse,)), AxisLaw(y0, 0.0))
        params = KinematicParams(v0, a_pk, 0.0, onset, dur)
        return tv, _uv_cruise(rng, cfg, x0, v0, ranges), params, (onset, onset + dur)

    if behavior in (BehaviorClass.LEFT_LANE_CHANGE, BehaviorClass.RIGHT_LANE_CHANGE):
        dur = _u(rng, r["duration"])
        onset = _sample_onset(rng, cfg, dur)
        disp = cfg.lane_width_m if behavior is BehaviorClass.LEFT_LANE_CHANGE else -cfg.lane_width_m
        tv = MotionLaws(AxisLaw(x0, v0), AxisLaw(y0, 0.0, (SCurveShift(disp, onset, dur),)))
        params = KinematicParams(v0, 0.0, disp, onset, dur)
        return tv, _uv_cruise(rng, cfg, x0, v0, ranges), params, (onset, onset + dur)

    if behavior is BehaviorClass.EVASIVE_SWERVE:
        dur = _u(rng, r["duration"])
        onset = _sample_onset(rng, cfg, dur)
        disp = _u(rng, r["displacement"]) * (1.0 if rng.uniform() < 0.5 else -1.0)
        tv = MotionLaws(AxisLaw(x0, v0), AxisLaw(y0, 0.0, (SineBump(disp, onset, dur),)))
        params = KinematicParams(v0, 0.0, disp, onset, dur)
        return tv, _uv_cruise(rng, cfg, x0, v0, ranges), params, (onset, onset + dur)

    if behavior is BehaviorClass.OVERTAKE:
        leg_out = _u(rng, r["leg_duration"])
        leg_back = _u(rng, r["leg_duration"])
        # keep the full maneuver under twice the observation window so the
        # >=50% window-overlap policy stays feasible
        hold_hi = min(r["hold_duration"][1], 1.9 * cfg.window_s - leg_out - leg_back)
        hold = float(rng.uniform(r["hold_duration"][0], max(r["hold_duration"][0], hold_hi)))
        span = leg_out + hold + leg_back
        onset = _sample_onset(rng, cfg, span)
        dv = _u(rng, r["delta_v"])
        accel_span = leg_out + hold
        ramp = 0.3 * accel_span
        a_pk = dv / (accel_span - ramp)
        lat = (
            SCurveShift(cfg.lane_width_m, onset, leg_out),
            SCurveShift(-cfg.lane_width_m, onset + leg_out + hold, leg_back),
        )
        tv = MotionLaws(
            AxisLaw(x0, v0, (AccelPulse(a_pk, onset, onset + accel_span, ramp),)),
            AxisLaw(y0, 0.0, lat),
        )
        # UV is the vehicle being overtaken: ahead, same lane, slightly slower
        gap = _u(rng, r["gap"])
        uv = MotionLaws(AxisLaw(x0 + gap, v0 - float(rng.uniform(0.0, 1.0))), AxisLaw(y0, 0.0))
        params = KinematicParams(
            v0, a_pk, cfg.lane_width_m, onset, span,
            extras={"delta_v": dv, "leg_out": leg_out, "hold": hold, "leg_back": leg_back},
        )
        return tv, uv, params, (onset, onset + span)

    raise ConfigError(f"no builder for behavior {behavior}")


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def gen_trajectory(
    behavior: BehaviorClass,
    cfg: ScenarioConfig,
    rng_seed: int,
    class_ranges: dict | None = None,
) -> TrajectoryPair:
    """Generate one seed-deterministic TV/UV trajectory pair.

    The TV track is sampled at the high rate over the full scenario, the UV
    track at the low rate; both are exact closed-form evaluations of the
    same underlying motion laws.
    """
    ranges = class_ranges if class_ranges is not None else DEFAULT_CLASS_RANGES
    rng = np.random.default_rng(derive_seed(rng_seed, behavior.slug))
    tv_laws, uv_laws, params, span = _build(behavior, cfg, ranges, rng)
    t_hi = np.arange(cfg.n_high_total) / cfg.rate_high_hz
    t_lo = np.arange(cfg.n_low_total) / cfg.rate_low_hz
    return TrajectoryPair(
        tv=TrajectoryTrack(t_hi, tv_laws.phys(t_hi)),
        uv=TrajectoryTrack(t_lo, uv_laws.phys(t_lo)),
        behavior=behavior,
        params=params,
        maneuver_span=span,
        laws=(tv_laws, uv_laws),
    )


def _window_start(traj: TrajectoryPair, cfg: ScenarioConfig, onset_policy, rng_seed) -> float:
    win = cfg.window_s
    avail = cfg.duration_s - win
    if avail < -1e-12:
        raise ConfigError("observation window exceeds scenario length")
    if isinstance(onset_policy, (int, float)):
        return float(onset_policy)
    if isinstance(onset_policy, tuple) and onset_policy[0] == "fixed":
        return float(onset_policy[1])
    if onset_policy != "overlap":
        raise ConfigError(f"unknown onset policy {onset_policy!r}")
    rng = np.random.default_rng(derive_seed(rng_seed, "window"))
    if traj.maneuver_span is None:
        return float(rng.uniform(0.0, avail))
    t0, t1 = traj.maneuver_span
    dur = t1 - t0
    mid = t0 + 0.5 * dur
    # any start in [mid - win, mid] keeps >=50% of the maneuver in-window
    lo = max(0.0, mid - win)
    hi = min(avail, mid)
    if hi < lo:
        raise ConfigError("maneuver too long for the 50% window-overlap policy")
    return float(rng.uniform(lo, hi))


def sample_window(
    traj: TrajectoryPair,
    cfg: ScenarioConfig,
    onset_policy="overlap",
    rng_seed: int = 0,
) -> WindowPair:
    """Cut aligned TV/UV observation windows out of a scenario.

    The window start is snapped to the low-rate sample grid so both rates
    sample on their native timestamps; placement follows ``onset_policy``
    ("overlap", a fixed float, or ("fixed", t)).
    """
    w0 = _window_start(traj, cfg, onset_policy, rng_seed)
    if w0 < -1e-9 or w0 + cfg.window_s > cfg.duration_s + 1e-9:
        raise ConfigError(
            f"window [{w0:.3f}, {w0 + cfg.window_s:.3f}] exceeds the {cfg.duration_s} s scenario"
        )
    w0 = round(w0 * cfg.rate_low_hz) / cfg.rate_low_hz
    w0 = min(max(w0, 0.0), cfg.duration_s - cfg.window_s)
    i0 = int(round(w0 * cfg.rate_high_hz))
    j0 = int(round(w0 * cfg.rate_low_hz))
    s, c = cfg.n_high, cfg.n_low
    if i0 + s > traj.tv.n or j0 + c > traj.uv.n:
        raise ConfigError("window placement exceeds scenario bounds")
    return WindowPair(
        tv=PhysInfoMatrix(traj.tv.phys[:, i0 : i0 + s].copy(), cfg.rate_high_hz),
        uv=PhysInfoMatrix(traj.uv.phys[:, j0 : j0 + c].copy(), cfg.rate_low_hz),
        start_s=w0,
    )
