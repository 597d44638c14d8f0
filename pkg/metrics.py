"""
Metrics Module
PAPR, MUI energy, radar SINR, sum rate, similarity, beampattern and PAPR CCDF.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from array_model import apply_lift, lifted_echoes, scene_responses, two_way_response
from beamformer import BeamformerBank, steered_gain
from scenario import ScenarioConfig, linear_to_db
from signals import CommBlock, unvec

logger = logging.getLogger(__name__)


class DegenerateBeamformerError(ValueError):
    """Raised when a combiner makes the SINR denominator vanish."""


@dataclass
class MetricReport:
    """Scalar metrics of one waveform."""

    papr_db: float
    mui_energy: float
    sinr_per_target_db: List[float]
    sum_rate_bps_hz: float
    similarity: float
    feasibility: List[float] = field(default_factory=list)

    @property
    def similarity_sq(self) -> float:
        return self.similarity ** 2

    @property
    def max_violation(self) -> float:
        return max([0.0] + [float(r) for r in self.feasibility])

    def to_dict(self) -> Dict[str, object]:
        return {
            'papr_db': self.papr_db,
            'mui_energy': self.mui_energy,
            'sinr_per_target_db': list(self.sinr_per_target_db),
            'sum_rate_bps_hz': self.sum_rate_bps_hz,
            'similarity': self.similarity,
            'similarity_sq': self.similarity_sq,
            'max_violation': self.max_violation,
        }


def papr(x: np.ndarray) -> float:
    """
    Peak-to-average power ratio over all N_T L space-time samples (linear).

    Raises:
        ValueError: for the zero vector
    """
    power = np.abs(np.ravel(x)) ** 2
    total = power.sum()
    if total == 0:
        raise ValueError("PAPR is undefined for the zero vector")
    return float(power.max() / (total / power.size))


def papr_db(x: np.ndarray) -> float:
    return linear_to_db(papr(x))


def mui_energy(H: np.ndarray, X: np.ndarray, S: np.ndarray) -> float:
    """||H X - S||_F^2."""
    H, X, S = np.asarray(H), np.asarray(X), np.asarray(S)
    if H.shape[1] != X.shape[0] or (H.shape[0], X.shape[1]) != S.shape:
        raise ValueError(f"dimension mismatch: H {H.shape}, X {X.shape}, S {S.shape}")
    return float(np.linalg.norm(H @ X - S) ** 2)


def _combined(U: np.ndarray, Y: np.ndarray, coherent: bool) -> float:
    # U, Y: N_R x L; column l pairs u_{q,l} with (Pi X)_{:,l}
    per_sample = np.sum(U.conj() * Y, axis=0)
    if coherent:
        return float(np.abs(per_sample.sum()) ** 2)
    return float(np.sum(np.abs(per_sample) ** 2))


def radar_sinr(x: np.ndarray, U: BeamformerBank, q: int, cfg: ScenarioConfig,
               coherent: bool = True) -> float:
    """
    Radar SINR of target q (linear).

    Args:
        x: Vectorised waveform
        U: Beamformer bank
        q: Target index
        cfg: Scenario
        coherent: True for the space-time quotient s_q |u^H v_q|^2 / u^H T_2 u
            (the quantity the beamformer maximises and the solver constrains);
            False sums per-sample powers |u_{q,l}^H Pi X_{:,l}|^2 over l

    Raises:
        DegenerateBeamformerError: if the denominator is zero
    """
    X = unvec(x, cfg.n_tx)
    Uq = U.per_sample(q, cfg.n_rx)
    targets, interferers = scene_responses(cfg)
    signal = cfg.target_powers[q] * _combined(Uq, targets[q].matrix @ X, coherent)
    interference = 0.0
    for other, resp in enumerate(targets):
        if other != q:
            interference += cfg.target_powers[other] * _combined(Uq, resp.matrix @ X, coherent)
    for i, resp in enumerate(interferers):
        interference += cfg.interferer_powers[i] * _combined(Uq, resp.matrix @ X, coherent)
    noise = cfg.radar_noise_power * float(np.real(np.vdot(Uq, Uq)))
    denominator = interference + noise
    if denominator <= 0:
        raise DegenerateBeamformerError(f"Beamformer of target {q} is degenerate (zero denominator)")
    return signal / denominator


def sum_rate(H: np.ndarray, X: np.ndarray, S: np.ndarray, symbol_scale: float, sigma_c2: float) -> float:
    """
    MUI-limited sum rate in bps/Hz.

    Per user: log2(1 + mean_l |s_{p,l}|^2 / (mean_l |[HX - S]_{p,l}|^2 + sigma_c^2)),
    with S taken at the applied symbol scale.
    """
    S_eff = np.asarray(S) * symbol_scale
    residual = np.asarray(H) @ np.asarray(X) - S_eff
    signal = np.mean(np.abs(S_eff) ** 2, axis=1)
    interference = np.mean(np.abs(residual) ** 2, axis=1)
    return float(np.sum(np.log2(1.0 + signal / (interference + sigma_c2))))


def empirical_similarity(x: np.ndarray, x0: np.ndarray) -> float:
    """||x - x0|| (not squared)."""
    x, x0 = np.ravel(x), np.ravel(x0)
    if x.shape != x0.shape:
        raise ValueError(f"Length mismatch: {x.size} vs {x0.size}")
    return float(np.linalg.norm(x - x0))


def feasibility_gaps(x: np.ndarray, x0: np.ndarray, beamformers: BeamformerBank,
                     cfg: ScenarioConfig) -> np.ndarray:
    """
    Shortfall of a waveform against each design requirement, measured on the metrics.

    Order: | ||x||^2 - 1 |, ||x - x0|| - eps, papr / eta - 1, then 1 - g_q / floor_q
    per target. A waveform meets the requirements to tolerance tol when every
    entry is <= tol.
    """
    x = np.ravel(x)
    gaps = [abs(float(np.vdot(x, x).real) - 1.0),
            empirical_similarity(x, x0) - cfg.epsilon,
            papr(x) / cfg.eta_linear - 1.0]
    floors = cfg.sinr_floors_linear
    gaps += [1.0 - radar_sinr(x, beamformers, q, cfg) / floors[q] for q in range(cfg.n_targets)]
    return np.asarray(gaps, dtype=float)


def autocorrelation(x: np.ndarray) -> np.ndarray:
    """Aperiodic autocorrelation magnitudes for lags 0..N-1."""
    x = np.ravel(x)
    full = np.correlate(x, x, mode='full')
    return np.abs(full[x.size - 1:])


def beampattern(x: np.ndarray, cfg: ScenarioConfig, grid: Sequence[float]) -> List[Tuple[float, float]]:
    """
    Steer the MVDR SINR over angles.

    For each scan angle (degrees) a unit-power hypothetical target is placed
    there and its MVDR output SINR is taken against the interferers and the
    receiver noise. The true targets are the directions the pattern is meant
    to reveal and do not count as interference.

    Returns:
        List of (angle_deg, gain_db)

    Raises:
        SingularInterferenceError: if the interference matrix is numerically singular
    """
    if len(grid) == 0:
        raise ValueError("Beampattern grid must be nonempty")
    L = cfg.n_samples
    _, interferer_echoes = lifted_echoes(x, cfg)
    active = [(power, echo) for power, echo in zip(cfg.interferer_powers, interferer_echoes) if power > 0]
    if active:
        V = np.column_stack([echo for _, echo in active])
    else:
        V = np.zeros((cfg.n_rx * L, 0), dtype=complex)
    powers = np.array([power for power, _ in active], dtype=float)
    pattern = []
    for angle_deg in grid:
        v = apply_lift(two_way_response(np.deg2rad(angle_deg), cfg), x, L)
        gain = steered_gain(v, V, powers, cfg.radar_noise_power)
        pattern.append((float(angle_deg), linear_to_db(gain)))
    return pattern


def papr_ccdf(samples: Sequence[float], thresholds: Sequence[float]) -> List[Tuple[float, float]]:
    """Empirical P(PAPR > threshold) for each threshold (same units as samples)."""
    values = np.asarray(samples, dtype=float)
    if values.size == 0:
        raise ValueError("CCDF needs at least one sample")
    return [(float(t), float(np.mean(values > t))) for t in thresholds]


def box_stats(values: Sequence[float]) -> Dict[str, float]:
    """Median, quartiles and 1.5 IQR whiskers clipped to the data."""
    data = np.sort(np.asarray(values, dtype=float))
    if data.size == 0:
        raise ValueError("Box statistics need at least one value")
    q1, median, q3 = np.percentile(data, [25, 50, 75])
    iqr = q3 - q1
    low = data[data >= q1 - 1.5 * iqr].min()
    high = data[data <= q3 + 1.5 * iqr].max()
    return {'median': float(median), 'q1': float(q1), 'q3': float(q3),
            'whisker_low': float(low), 'whisker_high': float(high)}


def evaluate_waveform(x: np.ndarray, beamformers: BeamformerBank, comm: CommBlock,
                      x0: np.ndarray, cfg: ScenarioConfig,
                      residuals: Optional[Sequence[float]] = None) -> MetricReport:
    """
    Full metric report of a waveform.

    Args:
        x: Vectorised waveform
        beamformers: Combiners used for the SINR
        comm: Communication draw (channel, symbols, scale)
        x0: Reference chirp
        cfg: Scenario
        residuals: Optional per-constraint residuals to attach

    Returns:
        MetricReport
    """
    X = unvec(x, cfg.n_tx)
    return MetricReport(
        papr_db=papr_db(x),
        mui_energy=mui_energy(comm.channel, X, comm.scaled_symbols),
        sinr_per_target_db=[linear_to_db(radar_sinr(x, beamformers, q, cfg)) for q in range(cfg.n_targets)],
        sum_rate_bps_hz=sum_rate(comm.channel, X, comm.symbols, comm.symbol_scale, cfg.comm_noise_power),
        similarity=empirical_similarity(x, x0),
        feasibility=[float(r) for r in residuals] if residuals is not None else [],
    )
