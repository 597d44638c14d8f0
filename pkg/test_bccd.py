"""
Tests for the alternating beamformer / waveform solver.
"""

from unittest.mock import patch

import numpy as np
import pytest

from al_solver import InnerResult, InnerTrace
from bccd import STATUS_BUDGET, STATUS_CONVERGED, STATUS_INNER_FAILURE, drip_solve, phi_inverse
from beamformer import update_bank
from metrics import empirical_similarity, feasibility_gaps, mui_energy, papr, radar_sinr
from oracles import projected_gradient_restarts
from qcqp_assembly import assemble, phi_vec
from scenario import ScenarioConfig, linear_to_db
from signals import ComplexWaveform, draw_comm_block, lfm_chirp


def _solve(cfg, seed=0):
    comm = draw_comm_block(cfg, np.random.default_rng(seed))
    x0 = lfm_chirp(cfg)
    return drip_solve(cfg, comm, x0), comm, x0


class TestPhiInverse:
    """Tests for phi_inverse()."""

    def test_recombines_halves(self):
        """Test [1, 1] -> [1+1j]."""
        np.testing.assert_array_equal(phi_inverse(np.array([1.0, 1.0])), [1 + 1j])

    def test_inverts_phi_vec(self, rng):
        """Test phi_inverse(phi_vec(x)) = x."""
        x = rng.standard_normal(5) + 1j * rng.standard_normal(5)
        np.testing.assert_array_equal(phi_inverse(phi_vec(x)), x)

    def test_odd_length(self):
        """Test an odd-length real vector."""
        with pytest.raises(ValueError):
            phi_inverse(np.ones(3))


class TestDripSolve:
    """Tests for drip_solve()."""

    def test_zero_radius_pins_chirp(self, tiny_cfg):
        """Test eps = 0 keeps x = x0."""
        cfg = tiny_cfg.with_overrides(epsilon=0.0)
        result, comm, x0 = _solve(cfg)
        np.testing.assert_array_equal(result.waveform.vector_form, x0.vector_form)
        assert result.mui_trace[-1] == pytest.approx(
            mui_energy(comm.channel, x0.matrix_form, comm.scaled_symbols))
        assert result.status == STATUS_CONVERGED
        assert len(result.feasibility) == cfg.n_constraints

    def test_rejects_non_unit_chirp(self, tiny_cfg):
        """Test a reference chirp that is not unit norm."""
        comm = draw_comm_block(tiny_cfg, np.random.default_rng(0))
        x0 = ComplexWaveform.from_vector(2 * lfm_chirp(tiny_cfg).vector_form, tiny_cfg.n_tx)
        with pytest.raises(ValueError, match='unit norm'):
            drip_solve(tiny_cfg, comm, x0)

    def test_traces_are_aligned(self, tiny_cfg):
        """Test one trace entry per outer iteration."""
        result, _, _ = _solve(tiny_cfg)
        assert 1 <= result.iterations <= tiny_cfg.outer_iters
        assert len(result.sinr_trace) == result.iterations
        assert len(result.mui_trace) == result.iterations
        assert len(result.violation_trace) == result.iterations
        assert len(result.inner_traces) == result.iterations
        assert len(result.sinr_trace[0]) == tiny_cfg.n_targets
        assert set(result.summary()) == {'status', 'iterations', 'objective', 'max_violation', 'monitor_flags'}

    def test_returned_waveform_respects_radius(self, tiny_cfg):
        """Test ||x - x0|| <= eps for the returned waveform."""
        for seed in range(3):
            result, _, x0 = _solve(tiny_cfg, seed)
            assert empirical_similarity(result.waveform.vector_form, x0.vector_form) <= tiny_cfg.epsilon + 1e-3

    def test_final_combiners_match_waveform(self, tiny_cfg):
        """Test the returned bank is the MVDR update at the returned waveform."""
        result, _, _ = _solve(tiny_cfg)
        expected = update_bank(result.waveform.vector_form, tiny_cfg)
        np.testing.assert_allclose(result.beamformers.vectors, expected.vectors)

    def test_matches_projected_gradient_oracle(self, tiny_cfg):
        """Test the final objective against the restart oracle on the tiny scene."""
        cfg = tiny_cfg.with_overrides(inner_iters=50, outer_iters=6)
        result, comm, x0 = _solve(cfg, seed=2)
        x = result.waveform.vector_form
        prob = assemble(comm.zf_reference.vector_form, x0.vector_form, result.beamformers, cfg)
        _, oracle_value = projected_gradient_restarts(prob, restarts=100, steps=100,
                                                      rng=np.random.default_rng(0))
        assert np.linalg.norm(x - comm.zf_reference.vector_form) ** 2 == pytest.approx(oracle_value, abs=1e-2)

    def test_converged_results_meet_requirements(self, tiny_cfg):
        """Test every converged waveform against the norm, PAPR, radius and SINR requirements."""
        cfg = tiny_cfg.with_overrides(inner_iters=100)
        converged = 0
        for seed in range(5):
            result, _, x0 = _solve(cfg, seed)
            if not result.converged:
                continue
            converged += 1
            x = result.waveform.vector_form
            assert np.vdot(x, x).real == pytest.approx(1.0, abs=1e-6)
            assert papr(x) <= cfg.eta_linear * (1 + 1e-6)
            assert empirical_similarity(x, x0.vector_form) <= cfg.epsilon + 1e-6
            for q, floor in enumerate(cfg.sinr_floors_linear):
                assert radar_sinr(x, result.beamformers, q, cfg) >= floor * (1 - 1e-6)
        assert converged >= 1

    def test_converged_objective_never_rises(self, tiny_cfg):
        """Test the objective trace of converged solves is non-increasing."""
        cfg = tiny_cfg.with_overrides(inner_iters=100)
        for seed in range(3):
            result, _, _ = _solve(cfg, seed)
            if result.converged:
                trace = result.objective_trace
                for before, after in zip(trace, trace[1:]):
                    assert after <= before + 1e-4 * (1 + abs(before))

    @patch('bccd.inner_solve')
    def test_inner_failure_returns_least_violating_iterate(self, mock_inner, tiny_cfg):
        """Test an infeasible breakdown returns the optimised iterate rather than the chirp."""
        x0 = lfm_chirp(tiny_cfg)
        mock_inner.return_value = InnerResult(x_r=phi_vec(2.0 * x0.vector_form), lam=np.zeros(tiny_cfg.n_constraints),
                                              trace=InnerTrace(), status='bfgs_failure', rho=tiny_cfg.rho)
        comm = draw_comm_block(tiny_cfg, np.random.default_rng(0))

        result = drip_solve(tiny_cfg, comm, x0)

        assert result.status == STATUS_INNER_FAILURE
        np.testing.assert_allclose(result.waveform.vector_form, 2.0 * x0.vector_form)
        assert mock_inner.call_count == tiny_cfg.outer_iters
        assert result.monitor_flags == []

    @patch('bccd.inner_solve')
    def test_budget_returns_smallest_violation(self, mock_inner, tiny_cfg):
        """Test the smallest violation wins among infeasible iterates."""
        x0 = lfm_chirp(tiny_cfg)
        m = tiny_cfg.n_constraints

        def iterate(scale):
            return InnerResult(x_r=phi_vec(scale * x0.vector_form), lam=np.zeros(m), trace=InnerTrace(),
                               status='iteration_budget', rho=tiny_cfg.rho)

        mock_inner.side_effect = [iterate(1.01)] + [iterate(1.5)] * (tiny_cfg.outer_iters - 1)
        comm = draw_comm_block(tiny_cfg, np.random.default_rng(0))

        result = drip_solve(tiny_cfg, comm, x0)

        assert result.status == STATUS_BUDGET
        np.testing.assert_allclose(result.waveform.vector_form, 1.01 * x0.vector_form)

    @patch('bccd.inner_solve')
    def test_duals_carry_across_outer_iterations(self, mock_inner, tiny_cfg):
        """Test each inner solve starts from the previous multipliers."""
        x0 = lfm_chirp(tiny_cfg)
        m = tiny_cfg.n_constraints
        mock_inner.return_value = InnerResult(x_r=phi_vec(2.0 * x0.vector_form), lam=np.full(m, 0.5),
                                              trace=InnerTrace(), status='iteration_budget', rho=tiny_cfg.rho)
        comm = draw_comm_block(tiny_cfg, np.random.default_rng(0))

        drip_solve(tiny_cfg, comm, x0)

        calls = mock_inner.call_args_list
        assert calls[0].kwargs['lam_init'] is None
        for call in calls[1:]:
            np.testing.assert_array_equal(call.kwargs['lam_init'], np.full(m, 0.5))

    @patch('bccd.inner_solve')
    def test_duals_reset_when_warm_start_is_off(self, mock_inner, tiny_cfg):
        """Test every inner solve starts from zero multipliers when warm starts are disabled."""
        cfg = tiny_cfg.with_overrides(warm_start_duals=False)
        x0 = lfm_chirp(cfg)
        mock_inner.return_value = InnerResult(x_r=phi_vec(2.0 * x0.vector_form), lam=np.full(cfg.n_constraints, 0.5),
                                              trace=InnerTrace(), status='iteration_budget', rho=cfg.rho)
        comm = draw_comm_block(cfg, np.random.default_rng(0))

        drip_solve(cfg, comm, x0)

        assert mock_inner.call_count == cfg.outer_iters
        assert all(call.kwargs['lam_init'] is None for call in mock_inner.call_args_list)

    @patch('bccd.inner_solve')
    def test_papr_overshoot_is_not_converged(self, mock_inner):
        """Test a PAPR overshoot below the absolute row tolerance but above 1e-6 relative."""
        cfg = ScenarioConfig(n_tx=4, n_rx=2, n_samples=8, n_users=1, target_angles=(20.0,),
                             epsilon=0.5, eta_db=0.0, sinr_floors_db=(-30.0,), outer_iters=2)
        x0 = lfm_chirp(cfg)
        x = x0.vector_form.copy()
        x[0] *= np.sqrt(1.0 + 1e-5)
        mock_inner.return_value = InnerResult(x_r=phi_vec(x), lam=np.zeros(cfg.n_constraints),
                                              trace=InnerTrace(), status='converged', rho=cfg.rho)
        comm = draw_comm_block(cfg, np.random.default_rng(0))

        result = drip_solve(cfg, comm, x0)

        assert result.max_violation <= cfg.feasibility_tol
        assert papr(result.waveform.vector_form) / cfg.eta_linear - 1.0 > 1e-6
        assert result.status == STATUS_BUDGET

    def test_feasibility_uses_returned_combiners(self, tiny_cfg):
        """Test the reported residuals are those under the returned bank."""
        result, comm, x0 = _solve(tiny_cfg)
        x = result.waveform.vector_form
        prob = assemble(comm.zf_reference.vector_form, x0.vector_form, result.beamformers, tiny_cfg)
        np.testing.assert_allclose(result.feasibility, prob.residuals(phi_vec(x)))


def _oracle_scene(n_tx, seed):
    """Smallest scenes with a SINR floor pinned at the chirp's own SINR."""
    base = ScenarioConfig(n_tx=n_tx, n_rx=2, n_samples=2, n_users=1, target_angles=(20.0,),
                          epsilon=0.5, eta_db=6.0, sinr_floors_db=(-30.0,), outer_iters=6,
                          inner_iters=100, rng_seed=seed)
    x0 = lfm_chirp(base).vector_form
    floor_db = linear_to_db(radar_sinr(x0, update_bank(x0, base), 0, base))
    return base.with_overrides(sinr_floors_db=(floor_db,))


@pytest.mark.slow
@pytest.mark.parametrize('n_tx', [1, 2])
@pytest.mark.parametrize('seed', range(20))
def test_objective_matches_restart_oracle(n_tx, seed):
    """The converged objective matches the best restart point within 1e-3."""
    cfg = _oracle_scene(n_tx, seed)
    result, comm, x0 = _solve(cfg, seed)
    assert result.converged
    x = result.waveform.vector_form
    x_comm = comm.zf_reference.vector_form
    prob = assemble(x_comm, x0.vector_form, result.beamformers, cfg)
    best, oracle_value = projected_gradient_restarts(prob, restarts=200, steps=200,
                                                     rng=np.random.default_rng(seed))
    assert best is not None
    assert np.linalg.norm(x - x_comm) ** 2 == pytest.approx(oracle_value, abs=1e-3)


@pytest.mark.slow
def test_reference_scene_moves_off_the_chirp(reference_cfg):
    """At desk scale the solve converges to an optimised waveform, not the chirp."""
    for seed in range(3):
        result, comm, x0 = _solve(reference_cfg, seed)
        assert result.status == STATUS_CONVERGED
        x = result.waveform.vector_form
        assert empirical_similarity(x, x0.vector_form) > 1e-3
        assert np.max(feasibility_gaps(x, x0.vector_form, result.beamformers, reference_cfg)) <= 1e-6
        chirp_objective = np.linalg.norm(x0.vector_form - comm.zf_reference.vector_form) ** 2
        assert result.objective_trace[-1] < chirp_objective
