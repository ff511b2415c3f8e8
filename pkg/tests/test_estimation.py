import numpy as np
import pytest

from isacbip.config import C0, BsConfig, GridSpec, WaveformConfig
from isacbip.echo import EchoParams, synth_echo
from isacbip.errors import ConfigError, NoPeakError
from isacbip.estimation import ParamEstimate, estimate_atd, estimate_noise_var
from oracles import dense_search_3d

WF = WaveformConfig()
BS = BsConfig(bs_id=1, x_m=0.0, y_m=0.0)
GRID = GridSpec()
FAST = GridSpec(doppler_band_hz=2500.0)


def _cube(aoa, tau, doppler, snr_db=None, seed=0):
    return synth_echo(EchoParams(1.0 + 0j, aoa, aoa, tau, doppler), BS, WF, snr_db, rng_seed=seed)


def test_on_grid_target_exact_recovery():
    """A target exactly on native DFT bins is recovered to 1e-12 bin units."""
    sin_true = 0.25  # 32nd point of the 256-long sine grid
    tau_true = 4.0 / (WF.n_subcarriers * WF.subcarrier_spacing_hz)
    dopp_true = -1.0 / (WF.n_symbols * WF.symbol_duration_s)
    est = estimate_atd(_cube(np.arcsin(sin_true), tau_true, dopp_true), BS, WF, GRID)
    sin_cell = 2.0 / GRID.n_angle
    tau_cell = 1.0 / (WF.n_subcarriers * GRID.pad_delay * WF.subcarrier_spacing_hz)
    dopp_cell = 1.0 / (WF.n_symbols * GRID.pad_doppler * WF.symbol_duration_s)
    assert abs(np.sin(est.aoa_rad) - sin_true) / sin_cell <= 1e-12
    assert abs(est.delay_s - tau_true) / tau_cell <= 1e-12
    assert abs(est.doppler_hz - dopp_true) / dopp_cell <= 1e-12


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_off_grid_matches_dense_search(seed):
    """Noiseless off-grid targets: agreement with the brute-force dense
    search within one fine cell (1000x the estimator's grid) per axis."""
    rng = np.random.default_rng(seed)
    aoa = float(rng.uniform(-0.9, 0.9))
    tau = float(rng.uniform(0.2e-6, 4e-6))
    dopp = float(rng.uniform(-900.0, 900.0))
    cube = _cube(aoa, tau, dopp)
    est = estimate_atd(cube, BS, WF, GRID)
    (sin_o, tau_o, dopp_o), _ = dense_search_3d(cube.data, BS, WF)
    assert abs(np.sin(est.aoa_rad) - sin_o) <= (2.0 / GRID.n_angle) / 1000.0
    assert abs(est.delay_s - tau_o) <= 1.0 / (WF.n_subcarriers * GRID.pad_delay * WF.subcarrier_spacing_hz) / 1000.0
    assert abs(est.doppler_hz - dopp_o) <= 1.0 / (WF.n_symbols * GRID.pad_doppler * WF.symbol_duration_s) / 1000.0


def test_monte_carlo_accuracy_snr10():
    """Median errors at 10 dB: angle <= 1 deg, range <= 5 m, v_r <= 2 m/s."""
    rng = np.random.default_rng(0)
    ang_err, rng_err, vel_err = [], [], []
    for trial in range(40):
        aoa = float(rng.uniform(-0.6, 0.6))
        tau = float(rng.uniform(0.2e-6, 3e-6))
        dopp = float(rng.uniform(-700.0, 700.0))
        est = estimate_atd(_cube(aoa, tau, dopp, snr_db=10.0, seed=trial), BS, WF, FAST)
        ang_err.append(abs(est.aoa_rad - aoa))
        rng_err.append(abs(est.delay_s - tau) * C0 / 2.0)
        vel_err.append(abs(est.doppler_hz - dopp) * C0 / (2.0 * WF.carrier_hz))
    assert np.median(ang_err) <= np.deg2rad(1.0)
    assert np.median(rng_err) <= 5.0
    assert np.median(vel_err) <= 2.0


def test_error_monotone_in_snr():
    """Median range error is non-increasing over {-10, 0, 10, 20} dB."""
    rng = np.random.default_rng(5)
    cases = [(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.3e-6, 3e-6)), float(rng.uniform(-600, 600))) for _ in range(25)]
    medians = []
    for snr in (-10.0, 0.0, 10.0, 20.0):
        errs = [
            abs(estimate_atd(_cube(a, t, d, snr_db=snr, seed=i), BS, WF, FAST).delay_s - t)
            for i, (a, t, d) in enumerate(cases)
        ]
        medians.append(np.median(errs))
    assert all(m1 <= m0 * 1.001 for m0, m1 in zip(medians, medians[1:])), medians


def test_band_and_full_paths_agree():
    cube = _cube(0.3, 1.1e-6, 420.0, snr_db=10.0, seed=9)
    a = estimate_atd(cube, BS, WF, GRID)
    b = estimate_atd(cube, BS, WF, FAST)
    assert a.aoa_rad == pytest.approx(b.aoa_rad, abs=1e-12)
    assert a.delay_s == pytest.approx(b.delay_s, rel=1e-12)
    assert a.doppler_hz == pytest.approx(b.doppler_hz, abs=1e-9)


def test_global_phase_invariance():
    cube = _cube(0.2, 0.9e-6, -300.0, snr_db=5.0, seed=4)
    rotated = type(cube)(cube.data * np.exp(1j * 1.234), cube.bs_id, cube.snapshot, cube.snr_db)
    a = estimate_atd(cube, BS, WF, FAST)
    b = estimate_atd(rotated, BS, WF, FAST)
    assert a.aoa_rad == pytest.approx(b.aoa_rad, abs=1e-12)
    assert a.delay_s == pytest.approx(b.delay_s, rel=1e-9)
    assert a.doppler_hz == pytest.approx(b.doppler_hz, abs=1e-9)


def test_estimator_is_deterministic():
    cube = _cube(0.1, 1.4e-6, 150.0, snr_db=0.0, seed=11)
    a = estimate_atd(cube, BS, WF, FAST)
    b = estimate_atd(cube, BS, WF, FAST)
    assert (a.aoa_rad, a.delay_s, a.doppler_hz, a.noise_var) == (b.aoa_rad, b.delay_s, b.doppler_hz, b.noise_var)


def test_all_zero_cube_rejected():
    zero = np.zeros((BS.n_antennas, WF.n_subcarriers, WF.n_symbols), dtype=complex)
    with pytest.raises(NoPeakError):
        estimate_atd(zero, BS, WF, GRID)


def test_shape_mismatch_rejected():
    with pytest.raises(ConfigError):
        estimate_atd(np.zeros((4, 8, 8), dtype=complex), BS, WF, GRID)


def test_estimates_within_physical_ranges():
    est = estimate_atd(_cube(0.5, 2e-6, 600.0, snr_db=0.0, seed=2), BS, WF, FAST)
    assert 0.0 <= est.delay_s < WF.delay_span_s
    assert abs(est.doppler_hz) <= WF.doppler_limit_hz
    assert abs(est.aoa_rad) <= np.pi / 2
    assert est.noise_var > 0


# ---------------------------------------------------------------------------
# noise variance estimation
# ---------------------------------------------------------------------------


def test_noise_var_pure_noise_within_5pct():
    rng = np.random.default_rng(8)
    shape = (BS.n_antennas, WF.n_subcarriers, WF.n_symbols)
    cube = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    fake_peak = ParamEstimate(0.0, 0.0, 0.0, 0.0, 0.0)
    assert estimate_noise_var(cube, fake_peak, WF) == pytest.approx(1.0, abs=0.05)


def test_noise_var_noiseless_leakage_floor():
    cube = _cube(0.37, 1.23e-6, 347.0)  # off-grid on every axis
    est = estimate_atd(cube, BS, WF, GRID)
    assert est.noise_var <= 1e-6 * est.peak_power


def test_noise_var_quadratic_scaling():
    cube = _cube(0.2, 1.0e-6, 100.0, snr_db=3.0, seed=6)
    est = estimate_atd(cube, BS, WF, FAST)
    scaled = cube.data * 3.0
    v = estimate_noise_var(scaled, est, WF)
    assert v == pytest.approx(9.0 * est.noise_var, rel=1e-9)


def test_noise_var_guard_covering_grid_rejected():
    cube = _cube(0.1, 1e-6, 0.0, snr_db=0.0, seed=1)
    est = estimate_atd(cube, BS, WF, FAST)
    with pytest.raises(ConfigError):
        estimate_noise_var(cube, est, WF, guard_bins=200.0)


def test_peak_power_is_coherent_sum():
    cube = _cube(0.25, 1.5e-6, 200.0)
    est = estimate_atd(cube, BS, WF, GRID)
    n_total = BS.n_antennas * WF.n_subcarriers * WF.n_symbols
    assert est.peak_power == pytest.approx(float(n_total) ** 2, rel=1e-9)
