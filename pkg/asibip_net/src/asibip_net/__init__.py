"""Asynchronous dual-branch intention classifier for two-rate state tracks."""

from .config import FocalLossParams, NetworkConfig, TrainConfig, load_configs
from .data import Standardizer, load_split
from .evaluate import evaluate_cases, evaluate_manifest, evaluate_snr_sweep, predict_split
from .loss import focal_loss, inverse_frequency_alpha
from .model import AsiBipNet, predict_open_set
from .sampleio import Manifest, read_manifest, read_sample, write_predictions
from .train import load_checkpoint, train

__version__ = "0.1.0"
