"""Angle/delay/Doppler estimation from one echo cube.

The estimator evaluates the zero-padded 3D correlation magnitude of the
cube against the separable single-target model and returns its arg-max,
then sharpens each axis with three-point quadratic interpolation on the
log-magnitude. Interpolation is iterated: after each vertex step the exact
correlation is re-evaluated at an 8x smaller spacing, which drives the
refinement error orders of magnitude below a padded grid cell.

The joint arg-max is found without materializing the full angle x delay x
Doppler cube: per-antenna delay/Doppler spectra are reduced to a
non-coherent power map, and candidate cells are beamformed in descending
power order until the Cauchy-Schwarz bound ``N_R * power < best`` proves
no better joint cell exists. For noiseless single targets the two are
identical by construction; with noise the bound keeps the search exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import noncoherent_power
from .config import BsConfig, GridSpec, WaveformConfig
from .echo import EchoTensor
from .errors import ConfigError, NoPeakError

_LOG_FLOOR = 1e-300


@dataclass(frozen=True)
class ParamEstimate:
    """Per-(snapshot, BS) estimate; ``aoa_rad`` is boresight-relative."""

    aoa_rad: float
    delay_s: float
    doppler_hz: float
    noise_var: float
    peak_power: float


def _cube_data(cube) -> np.ndarray:
    return cube.data if isinstance(cube, EchoTensor) else np.asarray(cube)


def _correlate(cube: np.ndarray, bs: BsConfig, wf: WaveformConfig, sin_aoa, tau_s, doppler_hz):
    """Exact correlation of the cube with the model at continuous parameters.

    Each argument may be scalar or a 1D array (broadcast over points);
    returns complex correlation values.
    """
    sin_aoa = np.atleast_1d(np.asarray(sin_aoa, dtype=float))
    tau_s = np.atleast_1d(np.asarray(tau_s, dtype=float))
    doppler_hz = np.atleast_1d(np.asarray(doppler_hz, dtype=float))
    n_ant, n_sub, n_sym = cube.shape
    va = np.exp(-2j * np.pi * bs.spacing_wavelengths * np.outer(sin_aoa, np.arange(n_ant)))
    vn = np.exp(2j * np.pi * wf.subcarrier_spacing_hz * np.outer(tau_s, np.arange(n_sub)))
    vm = np.exp(-2j * np.pi * wf.symbol_duration_s * np.outer(doppler_hz, np.arange(n_sym)))
    w = (va @ cube.reshape(n_ant, -1)).reshape(-1, n_sub, n_sym)
    return np.einsum("kn,knm,km->k", vn, w, vm)


def _quadratic_step(fn, x0: float, h: float) -> float:
    """One three-point log-magnitude parabolic vertex step around x0."""
    vals = np.abs(fn(np.array([x0 - h, x0, x0 + h])))
    v = np.log(np.maximum(vals, _LOG_FLOOR))
    denom = v[0] - 2.0 * v[1] + v[2]
    if denom == 0.0:
        return x0
    off = 0.5 * (v[0] - v[2]) / denom
    return x0 + float(np.clip(off, -1.0, 1.0)) * h


def _doppler_bins(grid: GridSpec, wf: WaveformConfig):
    """Signed padded Doppler bins to evaluate (band-limited or full)."""
    nf = wf.n_symbols * grid.pad_doppler
    if grid.doppler_band_hz is None:
        k = np.fft.fftfreq(nf, d=1.0 / nf).astype(int)  # 0..nf/2-1, -nf/2..-1
        return nf, k
    cell = 1.0 / (nf * wf.symbol_duration_s)
    kmax = min(int(np.floor(grid.doppler_band_hz / cell)), nf // 2 - 1)
    if kmax < 1:
        raise ConfigError("doppler_band_hz below one padded grid cell")
    return nf, np.arange(-kmax, kmax + 1)


def estimate_atd(
    cube,
    bs: BsConfig,
    wf: WaveformConfig,
    grid: GridSpec = GridSpec(),
) -> ParamEstimate:
    """Estimate (angle, delay, Doppler) plus noise variance from one cube.

    Deterministic: contains no randomness. Raises NoPeakError on an
    all-zero cube.
    """
    data = _cube_data(cube)
    expected = (bs.n_antennas, wf.n_subcarriers, wf.n_symbols)
    if data.shape != expected:
        raise ConfigError(f"cube shape {data.shape} does not match configs {expected}")
    if not np.any(data):
        raise NoPeakError("echo cube is identically zero")

    nd = wf.n_subcarriers * grid.pad_delay
    nf, kdopp = _doppler_bins(grid, wf)
    work = data.astype(np.complex64) if grid.single_precision else data

    # Correlation against the conjugate model: Doppler bins via
    # exp(-j 2 pi m k/nf) (a forward DFT), delay bins via
    # exp(+j 2 pi n k/nd) (an inverse DFT). Bin k maps to tau = k/(nd*df)
    # and f = k/(nf*T). Band-limited Doppler search replaces the padded
    # symbol-axis FFT with a small dense correlation on the raw symbols.
    if grid.doppler_band_hz is None:
        z = np.fft.ifft(np.fft.fft(work, n=nf, axis=2), n=nd, axis=1)
    else:
        m = np.arange(wf.n_symbols)
        wd = np.exp(-2j * np.pi * np.outer(m, kdopp) / nf)
        if grid.single_precision:
            wd = wd.astype(np.complex64)
        z = np.fft.ifft(work @ wd, n=nd, axis=1)  # (P, nd, n_dopp)
    power = noncoherent_power(np.ascontiguousarray(z))

    # sine-spaced angle grid matched to the antenna DFT
    sin_grid = np.linspace(-1.0, 1.0, grid.n_angle, endpoint=False)
    p_idx = np.arange(bs.n_antennas)
    a_conj = np.exp(-2j * np.pi * bs.spacing_wavelengths * np.outer(sin_grid, p_idx))
    if grid.single_precision:
        a_conj = a_conj.astype(np.complex64)

    flat = power.ravel()
    n_ant = bs.n_antennas
    best_val = -1.0
    best = (0, 0, 0)
    top = min(64, flat.size)
    cand = np.argpartition(flat, flat.size - top)[-top:]
    cand = cand[np.argsort(flat[cand])[::-1]]
    pos = 0
    while pos < cand.size:
        ci = int(cand[pos])
        if n_ant * flat[ci] <= best_val:
            break
        kd, kf = divmod(ci, power.shape[1])
        spec = np.abs(a_conj @ z[:, kd, kf]) ** 2
        ka = int(np.argmax(spec))
        if spec[ka] > best_val:
            best_val = float(spec[ka])
            best = (ka, kd, kf)
        pos += 1
        if pos == cand.size and top < flat.size:
            # bound not yet conclusive; widen the candidate set
            top = min(top * 16, flat.size)
            cand = np.argsort(flat)[::-1][:top]

    ka, kd, kf = best
    sin_est = float(sin_grid[ka])
    tau_cell = 1.0 / (nd * wf.subcarrier_spacing_hz)
    dopp_cell = 1.0 / (nf * wf.symbol_duration_s)
    tau_est = kd * tau_cell
    dopp_est = float(kdopp[kf]) * dopp_cell

    h_sin = sin_grid[1] - sin_grid[0]
    h_tau = tau_cell
    h_dopp = dopp_cell
    for _ in range(grid.refine_iters):
        sin_est = _quadratic_step(
            lambda s: _correlate(data, bs, wf, s, tau_est, dopp_est), sin_est, h_sin
        )
        tau_est = _quadratic_step(
            lambda t: _correlate(data, bs, wf, sin_est, t, dopp_est), tau_est, h_tau
        )
        dopp_est = _quadratic_step(
            lambda f: _correlate(data, bs, wf, sin_est, tau_est, f), dopp_est, h_dopp
        )
        h_sin /= 8.0
        h_tau /= 8.0
        h_dopp /= 8.0

    sin_est = float(np.clip(sin_est, -1.0, 1.0))
    tau_est = float(tau_est % wf.delay_span_s)
    half_span = 0.5 / wf.symbol_duration_s
    dopp_est = float((dopp_est + half_span) % (2.0 * half_span) - half_span)
    peak_power = float(np.abs(_correlate(data, bs, wf, sin_est, tau_est, dopp_est)[0]) ** 2)

    draft = ParamEstimate(
        aoa_rad=float(np.arcsin(sin_est)),
        delay_s=tau_est,
        doppler_hz=dopp_est,
        noise_var=0.0,
        peak_power=peak_power,
    )
    sigma2 = estimate_noise_var(cube, draft, wf, guard_bins=grid.noise_guard_bins)
    return ParamEstimate(draft.aoa_rad, draft.delay_s, draft.doppler_hz, sigma2, peak_power)


def estimate_noise_var(cube, peak: ParamEstimate, wf: WaveformConfig, guard_bins: float = 3.0) -> float:
    """Per-sample noise variance from DFT cells away from the target.

    Computes the native (unpadded) per-antenna delay/Doppler spectrum and
    averages cell power outside a +-guard_bins box around the peak, then
    normalizes by the coherent integration length N_c * M.
    """
    data = _cube_data(cube)
    n_ant, n_sub, n_sym = data.shape
    y = np.fft.fft(np.fft.fft(data, axis=1), axis=2)
    power = (y.real**2 + y.imag**2).sum(axis=0)

    # forward-FFT peak bins: e^{-j2pi n df tau} lands at -tau*df*Nc (mod Nc),
    # e^{+j2pi f T m} lands at +f*T*M (mod M)
    kd_peak = -peak.delay_s * wf.subcarrier_spacing_hz * n_sub
    kf_peak = peak.doppler_hz * wf.symbol_duration_s * n_sym
    kd = np.arange(n_sub)
    kf = np.arange(n_sym)
    d_dist = np.abs((kd - kd_peak + n_sub / 2) % n_sub - n_sub / 2)
    f_dist = np.abs((kf - kf_peak + n_sym / 2) % n_sym - n_sym / 2)
    # drop the full mainlobe cross: cells near the peak on either axis still
    # hold mainlobe-times-sidelobe target energy and would bias the estimate
    keep = (d_dist[:, None] > guard_bins) & (f_dist[None, :] > guard_bins)
    count = int(keep.sum())
    if count == 0:
        raise ConfigError("noise guard region covers the entire grid")
    return float(power[keep].sum() / (count * n_ant * n_sub * n_sym))
