"""
Block Cyclic Coordinate Descent Module
Outer loop: alternate MVDR beamformer updates with augmented Lagrangian
waveform solves, monitoring feasibility and objective monotonicity.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from al_solver import InnerTrace, inner_solve
from beamformer import BeamformerBank, update_bank
from metrics import feasibility_gaps, mui_energy, radar_sinr
from qcqp_assembly import assemble, phi_vec
from scenario import ScenarioConfig, linear_to_db
from signals import CommBlock, ComplexWaveform

logger = logging.getLogger(__name__)

OUTER_STEP_TOL = 1e-8
MONOTONE_SLACK = 1e-4
SINR_STEP_SLACK = 1e-9

STATUS_CONVERGED = 'converged'
STATUS_BUDGET = 'iteration_budget'
STATUS_INNER_FAILURE = 'inner_failure'


def phi_inverse(x_r: np.ndarray) -> np.ndarray:
    """First half + j * second half."""
    x_r = np.asarray(x_r, dtype=float).ravel()
    if x_r.size % 2:
        raise ValueError(f"phi_inverse needs an even-length vector (got {x_r.size})")
    n = x_r.size // 2
    return x_r[:n] + 1j * x_r[n:]


@dataclass
class SolveResult:
    """Waveform, combiners and traces produced by drip_solve."""

    waveform: ComplexWaveform
    beamformers: BeamformerBank
    objective_trace: List[float] = field(default_factory=list)
    sinr_trace: List[List[float]] = field(default_factory=list)
    mui_trace: List[float] = field(default_factory=list)
    violation_trace: List[float] = field(default_factory=list)
    feasibility: List[float] = field(default_factory=list)
    status: str = STATUS_BUDGET
    monitor_flags: List[str] = field(default_factory=list)
    inner_traces: List[InnerTrace] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.objective_trace)

    @property
    def max_violation(self) -> float:
        return max([0.0] + list(self.feasibility))

    @property
    def converged(self) -> bool:
        return self.status == STATUS_CONVERGED

    def summary(self) -> Dict[str, object]:
        return {
            'status': self.status,
            'iterations': self.iterations,
            'objective': self.objective_trace[-1] if self.objective_trace else None,
            'max_violation': self.max_violation,
            'monitor_flags': list(self.monitor_flags),
        }


def _sinr_db(x: np.ndarray, bank: BeamformerBank, cfg: ScenarioConfig) -> List[float]:
    return [linear_to_db(radar_sinr(x, bank, q, cfg)) for q in range(cfg.n_targets)]


def _violation(residuals: np.ndarray, gaps: np.ndarray) -> float:
    """Largest positive constraint residual or metric gap."""
    return max(0.0, float(np.max(residuals)), float(np.max(gaps)))


def _pinned_result(cfg: ScenarioConfig, comm: CommBlock, x0: ComplexWaveform) -> SolveResult:
    # eps = 0 leaves x0 as the only candidate
    x = x0.vector_form
    bank = update_bank(x, cfg)
    prob = assemble(comm.zf_reference.vector_form, x, bank, cfg)
    residuals = prob.residuals(phi_vec(x))
    # the similarity row is exactly zero at x0; roundoff must not count as violation
    residuals[2] = min(residuals[2], 0.0)
    violation = _violation(residuals, feasibility_gaps(x, x, bank, cfg))
    result = SolveResult(
        waveform=x0,
        beamformers=bank,
        objective_trace=[float(np.linalg.norm(x - comm.zf_reference.vector_form) ** 2)],
        sinr_trace=[_sinr_db(x, bank, cfg)],
        mui_trace=[mui_energy(comm.channel, x0.matrix_form, comm.scaled_symbols)],
        violation_trace=[violation],
        feasibility=[float(r) for r in residuals],
        status=STATUS_CONVERGED if violation <= cfg.feasibility_tol else STATUS_BUDGET,
    )
    logger.info(f"epsilon = 0: waveform pinned to the reference chirp (status={result.status})")
    return result


def drip_solve(cfg: ScenarioConfig, comm: CommBlock, x0: ComplexWaveform) -> SolveResult:
    """
    Run the alternating beamformer / waveform optimisation.

    Feasibility is judged on both the QCQP residuals and the metric gaps of
    feasibility_gaps(), each against cfg.feasibility_tol. With
    cfg.warm_start_duals the multipliers of one outer iteration seed the next
    inner solve; otherwise every inner solve starts from lambda = 0.

    Args:
        cfg: Scenario
        comm: Communication draw with its unit-norm ZF reference
        x0: Unit-norm reference chirp, also the initial waveform

    Returns:
        SolveResult. status is 'converged' only when the returned waveform is
        feasible and the monotonicity monitors held. When no optimised iterate
        is feasible the least violating one is returned with status
        'iteration_budget' (or 'inner_failure' when the last inner solve broke
        down). feasibility holds the residuals under the returned combiners.
    """
    if not np.isclose(x0.norm, 1.0, atol=1e-9):
        raise ValueError(f"Reference chirp must have unit norm (got {x0.norm:.6f})")
    if cfg.epsilon == 0:
        return _pinned_result(cfg, comm, x0)

    x_comm = comm.zf_reference.vector_form
    x_ref = x0.vector_form
    x = x_ref.copy()
    bank: Optional[BeamformerBank] = None
    result = SolveResult(waveform=x0, beamformers=update_bank(x, cfg))
    best = None
    inner_status = None
    lam = None

    for k in range(1, cfg.outer_iters + 1):
        new_bank = result.beamformers if bank is None else update_bank(x, cfg)
        if bank is not None:
            for q in range(cfg.n_targets):
                before = radar_sinr(x, bank, q, cfg)
                after = radar_sinr(x, new_bank, q, cfg)
                if after < before - SINR_STEP_SLACK * max(1.0, abs(before)):
                    flag = f"iteration {k}: beamformer step lowered SINR of target {q} ({before:.6g} -> {after:.6g})"
                    logger.warning(flag)
                    result.monitor_flags.append(flag)

        prob = assemble(x_comm, x_ref, new_bank, cfg)
        inner = inner_solve(prob, phi_vec(x), cfg, lam_init=lam if cfg.warm_start_duals else None)
        inner_status = inner.status
        lam = inner.lam
        result.inner_traces.append(inner.trace)

        x_new = phi_inverse(inner.x_r)
        violation = _violation(prob.residuals(inner.x_r), feasibility_gaps(x_new, x_ref, new_bank, cfg))
        objective = float(np.linalg.norm(x_new - x_comm) ** 2)
        result.objective_trace.append(objective)
        result.sinr_trace.append(_sinr_db(x_new, new_bank, cfg))
        result.mui_trace.append(mui_energy(comm.channel, x_new.reshape((cfg.n_tx, -1), order='F'),
                                           comm.scaled_symbols))
        result.violation_trace.append(violation)
        logger.debug(f"Outer iteration {k}: objective={objective:.6f}, violation={violation:.3e}, "
                     f"SINR dB={['%.2f' % s for s in result.sinr_trace[-1]]}, inner={inner.status}")

        # feasible iterates compete on objective, the rest on violation
        rank = (0, objective) if violation <= cfg.feasibility_tol else (1, violation)
        if best is None or rank < best[0]:
            best = (rank, x_new)

        step = float(np.linalg.norm(x_new - x))
        x, bank = x_new, new_bank
        if violation <= cfg.feasibility_tol and step < OUTER_STEP_TOL:
            logger.debug(f"Outer loop stalled at iteration {k}; stopping early")
            break

    chosen_x = x if result.violation_trace[-1] <= cfg.feasibility_tol else best[1]

    trace = result.objective_trace
    for k in range(1, len(trace)):
        if trace[k] > trace[k - 1] + MONOTONE_SLACK * (1.0 + abs(trace[k - 1])):
            flag = f"iteration {k + 1}: objective rose from {trace[k - 1]:.6g} to {trace[k]:.6g}"
            logger.warning(flag)
            result.monitor_flags.append(flag)

    # MVDR at the final waveform can only raise each SINR
    final_bank = update_bank(chosen_x, cfg)
    residuals = assemble(x_comm, x_ref, final_bank, cfg).residuals(phi_vec(chosen_x))
    feasible = _violation(residuals, feasibility_gaps(chosen_x, x_ref, final_bank, cfg)) <= cfg.feasibility_tol

    if feasible and not result.monitor_flags:
        result.status = STATUS_CONVERGED
    elif inner_status == 'bfgs_failure':
        result.status = STATUS_INNER_FAILURE
    else:
        result.status = STATUS_BUDGET

    result.waveform = ComplexWaveform.from_vector(chosen_x, cfg.n_tx)
    result.beamformers = final_bank
    result.feasibility = [float(r) for r in residuals]
    logger.info(f"DRIP solve finished: status={result.status}, iterations={result.iterations}, "
                f"objective={trace[-1]:.6f}, max violation={result.max_violation:.3e}")
    return result
