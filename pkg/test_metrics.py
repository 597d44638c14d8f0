"""
Tests for the waveform metrics.
"""

from unittest.mock import patch

import numpy as np
import pytest

from beamformer import (
    BeamformerBank,
    SingularInterferenceError,
    build_quotient_matrices,
    rayleigh_quotient,
    steered_gain,
    update_bank,
)
from conftest import random_unit
from metrics import (
    DegenerateBeamformerError,
    autocorrelation,
    beampattern,
    box_stats,
    empirical_similarity,
    evaluate_waveform,
    feasibility_gaps,
    mui_energy,
    papr,
    papr_ccdf,
    papr_db,
    radar_sinr,
    sum_rate,
)
from oracles import brute_force_mui, brute_force_sum_rate, per_sample_sinr
from scenario import linear_to_db
from signals import draw_comm_block, lfm_chirp, unvec


def _random_bank(rng, cfg):
    size = cfg.n_rx * cfg.n_samples
    return BeamformerBank(vectors=rng.standard_normal((cfg.n_targets, size))
                          + 1j * rng.standard_normal((cfg.n_targets, size)))


class TestPapr:
    """Tests for papr()."""

    def test_constant_modulus(self, rng):
        """Test any constant-modulus vector has PAPR 1."""
        x = np.exp(1j * rng.uniform(0, 2 * np.pi, 13))
        assert papr(x) == pytest.approx(1.0)
        assert papr_db(x) == pytest.approx(0.0, abs=1e-12)

    def test_single_peak(self):
        """Test [1, 0, 0, 0]."""
        assert papr(np.array([1, 0, 0, 0])) == pytest.approx(4.0)

    def test_matches_per_sample_constraint_form(self, rng):
        """Test PAPR against the per-sample power caps on a unit-norm vector."""
        x = random_unit(rng, 84)
        value = papr(x)
        assert value == pytest.approx(np.max(84 * np.abs(x) ** 2))
        assert np.all(np.abs(x) ** 2 <= value / 84 + 1e-15)

    def test_zero_vector(self):
        """Test PAPR of the zero vector."""
        with pytest.raises(ValueError):
            papr(np.zeros(4))


class TestMuiEnergy:
    """Tests for mui_energy()."""

    def test_unscaled_zf_has_no_interference(self, small_cfg):
        """Test X = pseudo-inverse solution."""
        comm = draw_comm_block(small_cfg, np.random.default_rng(5))
        X = np.linalg.pinv(comm.channel) @ comm.symbols
        assert mui_energy(comm.channel, X, comm.symbols) == pytest.approx(0.0, abs=1e-20)

    def test_zero_waveform(self, small_cfg):
        """Test X = 0 leaves all symbol energy as interference."""
        comm = draw_comm_block(small_cfg, np.random.default_rng(5))
        X = np.zeros((small_cfg.n_tx, small_cfg.n_samples))
        assert mui_energy(comm.channel, X, comm.symbols) == pytest.approx(np.linalg.norm(comm.symbols) ** 2)

    def test_matches_brute_force(self, reference_cfg):
        """Test the chirp against explicit summation."""
        comm = draw_comm_block(reference_cfg, np.random.default_rng(8))
        X0 = lfm_chirp(reference_cfg).matrix_form
        assert mui_energy(comm.channel, X0, comm.symbols) == pytest.approx(
            brute_force_mui(comm.channel, X0, comm.symbols), rel=1e-10)

    def test_dimension_mismatch(self):
        """Test incompatible shapes."""
        with pytest.raises(ValueError, match='dimension mismatch'):
            mui_energy(np.ones((2, 3)), np.ones((4, 2)), np.ones((2, 2)))


class TestRadarSinr:
    """Tests for radar_sinr()."""

    def test_scale_invariance(self, small_cfg, rng):
        """Test the SINR ignores a common combiner scale."""
        x = random_unit(rng, small_cfg.n_vars)
        bank = _random_bank(rng, small_cfg)
        scaled = BeamformerBank(vectors=(2.0 - 3.0j) * bank.vectors)
        for q in range(small_cfg.n_targets):
            assert radar_sinr(x, scaled, q, small_cfg) == pytest.approx(radar_sinr(x, bank, q, small_cfg))

    def test_matches_rayleigh_quotient(self, small_cfg, rng):
        """Test against the stacked-lift quotient and the explicit oracle."""
        x = random_unit(rng, small_cfg.n_vars)
        bank = _random_bank(rng, small_cfg)
        for q in range(small_cfg.n_targets):
            value = radar_sinr(x, bank, q, small_cfg)
            qm = build_quotient_matrices(x, q, small_cfg)
            assert value == pytest.approx(rayleigh_quotient(bank.for_target(q), qm), rel=1e-10)
            assert value == pytest.approx(per_sample_sinr(x, bank.for_target(q), q, small_cfg), rel=1e-10)

    def test_single_sample_forms_agree(self, small_cfg, rng):
        """Test that coherent and per-sample forms coincide when L = 1."""
        cfg = small_cfg.with_overrides(n_samples=1)
        x = random_unit(rng, cfg.n_vars)
        bank = _random_bank(rng, cfg)
        assert radar_sinr(x, bank, 0, cfg, coherent=False) == pytest.approx(radar_sinr(x, bank, 0, cfg))

    def test_zero_combiner(self, small_cfg, rng):
        """Test a vanishing denominator."""
        x = random_unit(rng, small_cfg.n_vars)
        bank = BeamformerBank(vectors=np.zeros((2, small_cfg.n_rx * small_cfg.n_samples), dtype=complex))
        with pytest.raises(DegenerateBeamformerError):
            radar_sinr(x, bank, 0, small_cfg)


class TestSumRate:
    """Tests for sum_rate()."""

    def test_zero_interference(self, rng):
        """Test HX = S with unit symbol energy."""
        S = (rng.choice([-1, 1], (4, 5)) + 1j * rng.choice([-1, 1], (4, 5))) / np.sqrt(2)
        rate = sum_rate(np.eye(4), S, S, 1.0, 0.01)
        assert rate == pytest.approx(4 * np.log2(101))
        assert rate == pytest.approx(26.63, abs=0.01)

    def test_zero_waveform(self, rng):
        """Test X = 0 keeps each user below one bit."""
        S = np.exp(1j * rng.uniform(0, 2 * np.pi, (4, 5)))
        rate = sum_rate(np.eye(4), np.zeros((4, 5)), S, 1.0, 0.01)
        assert rate == pytest.approx(4 * np.log2(1 + 1 / 1.01))
        assert rate < 4

    def test_matches_brute_force(self, reference_cfg):
        """Test against per-user explicit averaging."""
        comm = draw_comm_block(reference_cfg, np.random.default_rng(9))
        X0 = lfm_chirp(reference_cfg).matrix_form
        rate = sum_rate(comm.channel, X0, comm.symbols, comm.symbol_scale, 0.01)
        assert rate == pytest.approx(brute_force_sum_rate(comm.channel, X0, comm.scaled_symbols, 0.01), rel=1e-10)


class TestSimilarity:
    """Tests for empirical_similarity()."""

    def test_identity_and_antipode(self, rng):
        """Test x = x0 and x = -x0."""
        x0 = random_unit(rng, 6)
        assert empirical_similarity(x0, x0) == 0.0
        assert empirical_similarity(-x0, x0) == pytest.approx(2.0)

    def test_length_mismatch(self):
        """Test vectors of different lengths."""
        with pytest.raises(ValueError):
            empirical_similarity(np.ones(3), np.ones(4))


class TestFeasibilityGaps:
    """Tests for feasibility_gaps()."""

    def test_chirp_gaps(self, small_cfg):
        """Test each gap of the reference chirp under its own combiners."""
        x0 = lfm_chirp(small_cfg).vector_form
        bank = update_bank(x0, small_cfg)
        gaps = feasibility_gaps(x0, x0, bank, small_cfg)
        assert len(gaps) == 3 + small_cfg.n_targets
        assert gaps[0] == pytest.approx(0.0, abs=1e-12)
        assert gaps[1] == -small_cfg.epsilon
        assert gaps[2] == pytest.approx(1.0 / small_cfg.eta_linear - 1.0)
        for q in range(small_cfg.n_targets):
            expected = 1.0 - radar_sinr(x0, bank, q, small_cfg) / small_cfg.sinr_floors_linear[q]
            assert gaps[3 + q] == pytest.approx(expected)

    def test_papr_gap_is_relative(self, small_cfg):
        """Test a 1e-5 relative PAPR overshoot shows as 1e-5."""
        cfg = small_cfg.with_overrides(eta_db=0.0)
        x0 = lfm_chirp(cfg).vector_form
        x = x0.copy()
        x[0] *= np.sqrt(1.0 + 1e-5)
        x /= np.linalg.norm(x)
        gap = feasibility_gaps(x, x0, update_bank(x, cfg), cfg)[2]
        assert gap == pytest.approx(papr(x) - 1.0, rel=1e-9)
        assert gap > 1e-6


class TestBeampattern:
    """Tests for beampattern()."""

    def test_full_grid(self, small_cfg, rng):
        """Test 361 finite values over [-90, 90]."""
        grid = np.linspace(-90, 90, 361)
        pattern = beampattern(random_unit(rng, small_cfg.n_vars), small_cfg, grid)
        assert len(pattern) == 361
        assert all(np.isfinite(g) for _, g in pattern)
        assert pattern[0][0] == -90.0

    def test_target_angle_equals_mvdr_sinr(self, small_cfg, rng):
        """Test the gain at a lone unit-power target equals its MVDR SINR."""
        cfg = small_cfg.with_overrides(target_angles='10')
        x = random_unit(rng, cfg.n_vars)
        bank = update_bank(x, cfg)
        pattern = beampattern(x, cfg, [cfg.target_angles[0]])
        assert pattern[0][1] == pytest.approx(linear_to_db(radar_sinr(x, bank, 0, cfg)), abs=1e-8)

    def test_empty_grid(self, small_cfg, rng):
        """Test an empty scan grid."""
        with pytest.raises(ValueError):
            beampattern(random_unit(rng, small_cfg.n_vars), small_cfg, [])

    def test_targets_are_not_interference(self, small_cfg, rng):
        """Test the second target leaves the pattern unchanged."""
        x = random_unit(rng, small_cfg.n_vars)
        grid = [-20.0, 10.0, 25.0, 40.0]
        lone = beampattern(x, small_cfg.with_overrides(target_angles='10'), grid)
        np.testing.assert_allclose([g for _, g in beampattern(x, small_cfg, grid)], [g for _, g in lone])

    def test_gain_comes_from_mvdr_combiner(self, small_cfg, rng):
        """Test one beamformer-module MVDR evaluation per scan angle."""
        x = random_unit(rng, small_cfg.n_vars)
        with patch('metrics.steered_gain', wraps=steered_gain) as gain:
            beampattern(x, small_cfg, [0.0, 5.0, 10.0])
        assert gain.call_count == 3

    def test_singular_interference(self, small_cfg, rng):
        """Test a numerically singular interference matrix is reported."""
        cfg = small_cfg.with_overrides(radar_noise_power=1e-20)
        with pytest.raises(SingularInterferenceError):
            beampattern(random_unit(rng, cfg.n_vars), cfg, [0.0])


class TestDistributions:
    """Tests for papr_ccdf() and box_stats()."""

    def test_ccdf_thresholds(self):
        """Test thresholds below and above constant samples."""
        samples = [2.0] * 10
        assert papr_ccdf(samples, [1.0, 3.0]) == [(1.0, 1.0), (3.0, 0.0)]

    def test_ccdf_uniform(self):
        """Test the median of uniform samples."""
        samples = np.random.default_rng(0).uniform(0, 1, 1000)
        assert papr_ccdf(samples, [0.5])[0][1] == pytest.approx(0.5, abs=0.05)

    def test_ccdf_needs_samples(self):
        """Test an empty sample set."""
        with pytest.raises(ValueError):
            papr_ccdf([], [1.0])

    def test_box_stats(self):
        """Test quartiles and whiskers with an outlier."""
        stats = box_stats([1, 2, 3, 4, 5, 100])
        assert stats['median'] == pytest.approx(3.5)
        assert stats['q1'] == pytest.approx(2.25)
        assert stats['q3'] == pytest.approx(4.75)
        assert stats['whisker_low'] == 1.0
        assert stats['whisker_high'] == 5.0


class TestEvaluateWaveform:
    """Tests for evaluate_waveform()."""

    def test_chirp_report(self, small_cfg):
        """Test the report of the reference chirp against itself."""
        comm = draw_comm_block(small_cfg, np.random.default_rng(4))
        x0 = lfm_chirp(small_cfg).vector_form
        bank = update_bank(x0, small_cfg)
        report = evaluate_waveform(x0, bank, comm, x0, small_cfg, residuals=[-1.0, 0.5, -0.2])
        assert report.similarity == 0.0
        assert report.papr_db == pytest.approx(0.0, abs=1e-9)
        assert report.max_violation == 0.5
        assert len(report.sinr_per_target_db) == 2
        assert report.mui_energy == pytest.approx(
            mui_energy(comm.channel, unvec(x0, small_cfg.n_tx), comm.scaled_symbols))
        assert set(report.to_dict()) >= {'papr_db', 'sum_rate_bps_hz', 'similarity_sq'}

    def test_autocorrelation_zero_lag(self, rng):
        """Test lag 0 equals the energy."""
        x = rng.standard_normal(9) + 1j * rng.standard_normal(9)
        ac = autocorrelation(x)
        assert len(ac) == 9
        assert ac[0] == pytest.approx(np.linalg.norm(x) ** 2)
