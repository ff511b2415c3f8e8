"""Cooperative OFDM echo sensing simulator and maneuver dataset toolkit."""

from .config import (
    BsConfig,
    GridSpec,
    KalmanTuning,
    PipelineConfig,
    RadarModel,
    ScenarioConfig,
    WaveformConfig,
    desk_scale,
    load_config,
)
from .echo import EchoParams, EchoTensor, apply_weather_loss, echo_params_from_truth, steering_vector, synth_echo
from .estimation import ParamEstimate, estimate_atd, estimate_noise_var
from .fusion import PositionFix, VelocityFix, run_ca_kalman, solve_position_wls, solve_velocity
from .kinematics import (
    BehaviorClass,
    KinematicParams,
    PhysInfoMatrix,
    StateSample,
    TrajectoryPair,
    gen_trajectory,
    sample_window,
)
from .metrics import confusion, prf1, roc_auc
from .pipeline import CaseSpec, apply_nlos_drop, build_dataset, isac_track, make_sample, measure_onboard_radar
from .sampleio import DatasetManifest, Sample, read_manifest, read_sample, write_manifest, write_sample

__version__ = "0.1.0"
