"""Configuration objects and the config-file loader.

All physical quantities are SI. The aggregate :class:`PipelineConfig` is what
the dataset builder and CLI consume; it can be overridden from a YAML/JSON
file (nested maps) or a flat ``section.key=value`` text file, see
``load_config``.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from .errors import ConfigError

C0 = 299_792_458.0  # speed of light, m/s


def _near_int(x: float, tol: float = 1e-6) -> int:
    n = int(round(x))
    if abs(x - n) > tol:
        raise ConfigError(f"{x} is not an integer within tolerance {tol}")
    return n


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario timing and road geometry.

    ``rate_high_hz`` is the cooperative-sensing refresh rate (TV track),
    ``rate_low_hz`` the onboard rate (UV track). The observation window of
    ``window_s`` seconds therefore holds S = rate_high*window TV snapshots
    and C = rate_low*window UV snapshots.
    """

    duration_s: float = 5.0
    window_s: float = 2.2
    rate_high_hz: float = 400.0
    rate_low_hz: float = 100.0
    lane_width_m: float = 3.5
    road_y_m: float = 20.0

    def __post_init__(self):
        if self.rate_high_hz <= 0 or self.rate_low_hz <= 0:
            raise ConfigError("refresh rates must be positive")
        if self.rate_high_hz <= self.rate_low_hz:
            raise ConfigError("rate_high_hz must exceed rate_low_hz")
        if self.window_s > self.duration_s:
            raise ConfigError("observation window exceeds scenario length")
        if self.duration_s <= 0 or self.window_s <= 0:
            raise ConfigError("durations must be positive")
        _near_int(self.rate_high_hz / self.rate_low_hz)
        _near_int(self.rate_high_hz * self.window_s)
        _near_int(self.rate_low_hz * self.window_s)

    @property
    def n_high(self) -> int:
        """Snapshots in the observation window at the high rate (S)."""
        return _near_int(self.rate_high_hz * self.window_s)

    @property
    def n_low(self) -> int:
        """Snapshots in the observation window at the low rate (C)."""
        return _near_int(self.rate_low_hz * self.window_s)

    @property
    def n_high_total(self) -> int:
        return _near_int(self.rate_high_hz * self.duration_s)

    @property
    def n_low_total(self) -> int:
        return _near_int(self.rate_low_hz * self.duration_s)


@dataclass(frozen=True)
class WaveformConfig:
    """OFDM sensing waveform parameters."""

    carrier_hz: float = 3.5e9
    subcarrier_spacing_hz: float = 30e3
    n_subcarriers: int = 128
    n_symbols: int = 42
    cp_fraction: float = 288.0 / 4096.0  # cyclic prefix as a fraction of 1/spacing

    def __post_init__(self):
        if min(self.carrier_hz, self.subcarrier_spacing_hz) <= 0:
            raise ConfigError("carrier and subcarrier spacing must be positive")
        if self.n_subcarriers < 2 or self.n_symbols < 2:
            raise ConfigError("need at least 2 subcarriers and 2 symbols")
        if self.cp_fraction < 0:
            raise ConfigError("symbol duration cannot be below 1/spacing")

    @property
    def symbol_duration_s(self) -> float:
        """CP-inclusive OFDM symbol duration T."""
        return (1.0 + self.cp_fraction) / self.subcarrier_spacing_hz

    @property
    def wavelength_m(self) -> float:
        return C0 / self.carrier_hz

    @property
    def delay_span_s(self) -> float:
        """Unambiguous delay window 1/spacing."""
        return 1.0 / self.subcarrier_spacing_hz

    @property
    def doppler_limit_hz(self) -> float:
        """Unambiguous one-sided Doppler 1/(2T)."""
        return 0.5 / self.symbol_duration_s


@dataclass(frozen=True)
class BsConfig:
    """A sensing base station with a uniform linear receive array.

    ``boresight_rad`` is the azimuth the array faces; arrival angles are
    measured relative to it and must stay within (-pi/2, pi/2) for the
    array response to be unambiguous.
    """

    bs_id: int
    x_m: float
    y_m: float
    n_antennas: int = 8
    spacing_wavelengths: float = 0.5  # d_r / lambda
    boresight_rad: float = 0.0

    def __post_init__(self):
        if self.n_antennas < 2:
            raise ConfigError("array needs at least 2 antennas")
        if self.spacing_wavelengths <= 0:
            raise ConfigError("antenna spacing must be positive")


@dataclass(frozen=True)
class GridSpec:
    """Search-grid shape for the 3D spectral estimator.

    ``doppler_band_hz`` limits the Doppler search to +-band; ``None`` scans
    the full unambiguous span. ``refine_iters`` quadratic-interpolation
    passes are run per axis, each on re-evaluated correlation values with
    an 8x smaller spacing.
    """

    pad_delay: int = 8
    pad_doppler: int = 8
    n_angle: int = 256
    refine_iters: int = 3
    doppler_band_hz: float | None = None
    single_precision: bool = False
    noise_guard_bins: float = 3.0  # native bins each side of the peak

    def __post_init__(self):
        if self.pad_delay < 1 or self.pad_doppler < 1 or self.n_angle < 8:
            raise ConfigError("invalid grid sizes")
        if self.refine_iters < 0:
            raise ConfigError("refine_iters must be >= 0")


@dataclass(frozen=True)
class KalmanTuning:
    """Constant-acceleration filter tuning.

    ``jerk_psd`` is the continuous white-jerk intensity q (m^2/s^5).
    Measurement variances are ``scale * sigma2_hat`` clamped below by the
    floors; the floors alone apply when no noise estimate is available.
    """

    jerk_psd: float = 5.0
    meas_pos_var_floor: float = 0.25
    meas_vel_var_floor: float = 0.25
    # sigma2-hat -> fix variance factors, calibrated on the default two-BS
    # geometry (Monte Carlo over the SNR range; close to linear throughout)
    pos_var_scale: float = 7.0e-3
    vel_var_scale: float = 0.12
    init_pos_var: float = 100.0
    init_vel_var: float = 25.0
    init_acc_var: float = 9.0

    def __post_init__(self):
        if self.jerk_psd <= 0:
            raise ConfigError("jerk_psd must be positive")
        if min(self.meas_pos_var_floor, self.meas_vel_var_floor) < 0:
            raise ConfigError("variance floors cannot be negative")


@dataclass(frozen=True)
class RadarModel:
    """Onboard millimeter-wave radar baseline noise model."""

    sigma_pos_m: float = 0.2
    sigma_vel_mps: float = 0.1
    weather_noise_scale: float = 10.0  # 20 dB echo power loss -> 10x amplitude noise


# Per-class kinematic sampling ranges. Keys are documented in the README;
# every range is a [low, high] pair in SI units. The longitudinal classes
# deliberately extend down to brief, weak maneuvers: sensing fidelity only
# matters for classification when part of the event distribution sits near
# the sensing noise floor.
DEFAULT_CLASS_RANGES: dict = {
    "hard_brake": {"speed": [15.0, 25.0], "peak_accel": [-8.0, -2.0], "duration": [0.5, 2.0]},
    "left_lane_change": {"speed": [10.0, 20.0], "duration": [2.0, 4.0]},
    "right_lane_change": {"speed": [10.0, 20.0], "duration": [2.0, 4.0]},
    "overtake": {
        "speed": [10.0, 16.0],
        "delta_v": [3.0, 8.0],
        "leg_duration": [1.1, 1.4],
        "hold_duration": [1.0, 1.3],
        "gap": [8.0, 15.0],
    },
    "hard_accel": {"speed": [8.0, 15.0], "peak_accel": [1.5, 6.0], "duration": [0.6, 3.0]},
    "evasive_swerve": {"speed": [10.0, 20.0], "displacement": [0.3, 2.0], "duration": [0.8, 1.5]},
    "following": {"speed": [8.0, 20.0], "accel_jitter": 0.0},
    # UV ego-vehicle cruise behavior (not a labeled class)
    "uv": {"gap": [10.0, 30.0], "speed_delta": [-1.0, 1.0], "accel_jitter": 0.05},
}


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the dataset builder needs."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    waveform: WaveformConfig = field(default_factory=WaveformConfig)
    base_stations: tuple = (
        BsConfig(bs_id=1, x_m=0.0, y_m=0.0, boresight_rad=math.radians(12.0)),
        BsConfig(bs_id=2, x_m=500.0, y_m=0.0, boresight_rad=math.radians(174.0)),
    )
    grid: GridSpec = field(default_factory=GridSpec)
    kalman: KalmanTuning = field(default_factory=KalmanTuning)
    radar: RadarModel = field(default_factory=RadarModel)
    class_ranges: dict = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_CLASS_RANGES)))
    snr_range_db: tuple = (0.0, 10.0)
    following_fraction: float = 1.0 / 6.0
    val_fraction: float = 0.2
    nlos_fill: str = "ffill"  # or "zero"
    n_workers: int = 1

    def __post_init__(self):
        if len(self.base_stations) < 2:
            raise ConfigError("need at least two base stations")
        pos = {(b.x_m, b.y_m) for b in self.base_stations}
        if len(pos) != len(self.base_stations):
            raise ConfigError("base station positions must be distinct")
        if not 0.0 < self.val_fraction < 1.0:
            raise ConfigError("val_fraction must lie in (0, 1)")
        if self.nlos_fill not in ("ffill", "zero"):
            raise ConfigError("nlos_fill must be 'ffill' or 'zero'")


def desk_scale(cfg: PipelineConfig) -> PipelineConfig:
    """CI-sized profile: 100 Hz sensing rate and band-limited Doppler search."""
    return dataclasses.replace(
        cfg,
        scenario=dataclasses.replace(cfg.scenario, rate_high_hz=100.0, rate_low_hz=50.0),
        grid=dataclasses.replace(cfg.grid, doppler_band_hz=2500.0, single_precision=True),
    )


def _to_plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: _to_plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (list, tuple)):
        return [_to_plain(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _to_plain(v) for k, v in obj.items()}
    return obj


def config_to_dict(cfg: PipelineConfig) -> dict:
    """Fully resolved plain-dict form (used for fingerprinting and dumps)."""
    return _to_plain(cfg)


def config_fingerprint(cfg: PipelineConfig, *extra) -> str:
    """Hex digest over the resolved config plus any extra identity parts.

    Changes iff any output-affecting config field or any extra part (e.g.
    the seed) changes; n_workers is a scheduling knob and is excluded.
    """
    resolved = config_to_dict(cfg)
    resolved.pop("n_workers", None)
    payload = json.dumps([resolved, [str(p) for p in extra]], sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


_SECTION_TYPES = {
    "scenario": ScenarioConfig,
    "waveform": WaveformConfig,
    "grid": GridSpec,
    "kalman": KalmanTuning,
    "radar": RadarModel,
}


def _coerce(raw: str):
    text = raw.strip()
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("none", "null"):
        return None
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def _flat_to_nested(lines) -> dict:
    out: dict = {}
    for ln in lines:
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise ConfigError(f"flat config line is not key=value: {ln!r}")
        key, val = ln.split("=", 1)
        node = out
        parts = key.strip().split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = _coerce(val)
    return out


def load_config(path: str | None = None, overrides: dict | None = None) -> PipelineConfig:
    """Build a PipelineConfig from defaults plus a config file and/or dict.

    The file may be YAML/JSON (nested maps mirroring the dataclass layout)
    or flat ``section.key=value`` lines. Unknown keys raise ConfigError.
    """
    data: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            parsed = yaml.safe_load(text)
        except yaml.YAMLError:
            parsed = None
        if isinstance(parsed, dict):
            data = parsed
        else:
            data = _flat_to_nested(text.splitlines())
    if overrides:
        for k, v in overrides.items():
            if isinstance(v, dict) and isinstance(data.get(k), dict):
                data[k].update(v)
            else:
                data[k] = v
    return _config_from_dict(data)


def _config_from_dict(data: dict) -> PipelineConfig:
    kwargs: dict = {}
    data = dict(data)
    for name, cls in _SECTION_TYPES.items():
        if name in data:
            section = data.pop(name)
            if not isinstance(section, dict):
                raise ConfigError(f"section {name!r} must be a mapping")
            valid = {f.name for f in dataclasses.fields(cls)}
            unknown = set(section) - valid
            if unknown:
                raise ConfigError(f"unknown keys in {name}: {sorted(unknown)}")
            try:
                kwargs[name] = cls(**section)
            except TypeError as exc:
                raise ConfigError(str(exc)) from exc
    if "base_stations" in data:
        stations = data.pop("base_stations")
        kwargs["base_stations"] = tuple(
            bs if isinstance(bs, BsConfig) else BsConfig(**bs) for bs in stations
        )
    if "class_ranges" in data:
        ranges = dict(DEFAULT_CLASS_RANGES)
        user = data.pop("class_ranges")
        for cls_name, params in user.items():
            if cls_name not in ranges:
                raise ConfigError(f"unknown behavior class {cls_name!r}")
            merged = dict(ranges[cls_name])
            merged.update(params)
            ranges[cls_name] = merged
        kwargs["class_ranges"] = ranges
    simple = {
        "snr_range_db": lambda v: tuple(v),
        "following_fraction": float,
        "val_fraction": float,
        "nlos_fill": str,
        "n_workers": int,
    }
    for key, conv in simple.items():
        if key in data:
            kwargs[key] = conv(data.pop(key))
    if data:
        raise ConfigError(f"unknown top-level config keys: {sorted(data)}")
    return PipelineConfig(**kwargs)
