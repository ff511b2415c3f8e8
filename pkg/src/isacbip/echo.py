"""Per-snapshot OFDM echo synthesis.

The noiseless echo of a single target on subcarrier n, symbol m, antenna p
is rank-1 separable:

    y[p, n, m] = b * exp(j 2 pi f_d m T) * exp(-j 2 pi n df tau) * a(theta)[p]

with a(theta) the receive steering vector, tau = 2R/c0 the round-trip delay
and f_d = -2 v_r f_c / c0 the Doppler shift of the radial velocity v_r.
Additive noise is i.i.d. circular complex Gaussian, calibrated so that
|b|^2 / sigma^2 realizes the requested per-sample SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import C0, BsConfig, WaveformConfig
from .errors import GeometryError
from .kinematics import StateSample
from .seeds import derive_seed


def wrap_angle(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    w = math.fmod(theta + math.pi, 2.0 * math.pi)
    if w <= 0:
        w += 2.0 * math.pi
    return w - math.pi


@dataclass(frozen=True)
class EchoParams:
    """Ground-truth echo parameters of one (snapshot, base station) pair.

    ``aoa_rad`` is measured relative to the array boresight (the quantity
    the steering vector actually encodes); ``bearing_rad`` is the global
    azimuth from the BS to the target, used for Doppler geometry.
    """

    gain: complex
    aoa_rad: float
    bearing_rad: float
    delay_s: float
    doppler_hz: float
    noise_var: float = 0.0


@dataclass(frozen=True)
class EchoTensor:
    """Complex (N_R, N_c, M) echo cube with its provenance."""

    data: np.ndarray
    bs_id: int
    snapshot: int
    snr_db: float | None


def steering_vector(theta: float, bs: BsConfig) -> np.ndarray:
    """Receive steering vector: element p = exp(j 2 pi (d_r/lambda) p sin theta)."""
    p = np.arange(bs.n_antennas)
    return np.exp(2j * np.pi * bs.spacing_wavelengths * p * np.sin(theta))


def echo_params_from_truth(state: StateSample, bs: BsConfig, wf: WaveformConfig) -> EchoParams:
    """Map a target state to the echo parameters seen by one base station.

    Sign conventions: an approaching target has negative radial velocity
    and therefore positive Doppler.
    """
    dx = state.x - bs.x_m
    dy = state.y - bs.y_m
    rng = math.hypot(dx, dy)
    if rng < 1e-6:
        raise GeometryError(f"target coincides with base station {bs.bs_id}")
    bearing = math.atan2(dy, dx)
    v_r = state.vx * math.cos(bearing) + state.vy * math.sin(bearing)
    return EchoParams(
        gain=1.0 + 0.0j,
        aoa_rad=wrap_angle(bearing - bs.boresight_rad),
        bearing_rad=bearing,
        delay_s=2.0 * rng / C0,
        doppler_hz=-2.0 * v_r * wf.carrier_hz / C0,
    )


def noise_var_for_snr(gain: complex, snr_db: float) -> float:
    """Per-complex-sample noise variance realizing the target SNR."""
    return abs(gain) ** 2 / 10.0 ** (snr_db / 10.0)


def synth_echo(
    params: EchoParams,
    bs: BsConfig,
    wf: WaveformConfig,
    snr_db: float | None,
    rng_seed: int = 0,
    snapshot: int = 0,
) -> EchoTensor:
    """Synthesize one echo cube; ``snr_db=None`` gives the noiseless cube."""
    n = np.arange(wf.n_subcarriers)
    m = np.arange(wf.n_symbols)
    delay_phase = np.exp(-2j * np.pi * n * wf.subcarrier_spacing_hz * params.delay_s)
    doppler_phase = np.exp(2j * np.pi * params.doppler_hz * m * wf.symbol_duration_s)
    a = steering_vector(params.aoa_rad, bs)
    cube = params.gain * a[:, None, None] * delay_phase[None, :, None] * doppler_phase[None, None, :]
    if snr_db is not None:
        sigma2 = noise_var_for_snr(params.gain, snr_db)
        rng = np.random.default_rng(derive_seed(rng_seed, "echo-noise", bs.bs_id, snapshot))
        scale = math.sqrt(sigma2 / 2.0)
        cube = cube + scale * (rng.standard_normal(cube.shape) + 1j * rng.standard_normal(cube.shape))
    return EchoTensor(data=cube, bs_id=bs.bs_id, snapshot=snapshot, snr_db=snr_db)


def apply_weather_loss(snr_db: float, loss_db: float = 20.0) -> float:
    """Echo power loss under adverse weather."""
    return snr_db - loss_db
