"""
Beamformer Module
Interference-plus-noise matrices and the closed-form MVDR receive combiner
update, the first block of the coordinate descent.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from array_model import lifted_echoes
from scenario import ScenarioConfig

logger = logging.getLogger(__name__)

MAX_INTERFERENCE_CONDITION = 1e14


class SingularInterferenceError(np.linalg.LinAlgError):
    """Raised when T_2 is numerically singular."""


@dataclass(frozen=True)
class BeamformerBank:
    """Stacked space-time combiners u_q = [u_{q,1}; ...; u_{q,L}], one row per target."""

    vectors: np.ndarray

    @property
    def n_targets(self) -> int:
        return self.vectors.shape[0]

    def for_target(self, q: int) -> np.ndarray:
        return self.vectors[q]

    def per_sample(self, q: int, n_rx: int) -> np.ndarray:
        """Combiner of target q as an N_R x L matrix (column l is u_{q,l})."""
        return self.vectors[q].reshape((n_rx, -1), order='F')


@dataclass(frozen=True)
class QuotientMatrices:
    """Numerator T_1 (rank one) and denominator T_2 of the SINR quotient."""

    t1: np.ndarray
    t2: np.ndarray
    echo: np.ndarray


def interference_terms(x: np.ndarray, q: int, cfg: ScenarioConfig):
    """
    Echo vectors and powers entering T_{2,q}, zero-power sources dropped.

    Returns:
        (v_q, V, powers) with V of shape (N_R L, K) holding the interfering echoes
    """
    target_echoes, interferer_echoes = lifted_echoes(x, cfg)
    columns = []
    powers = []
    for other, echo in enumerate(target_echoes):
        if other != q and cfg.target_powers[other] > 0:
            columns.append(echo)
            powers.append(cfg.target_powers[other])
    for i, echo in enumerate(interferer_echoes):
        if cfg.interferer_powers[i] > 0:
            columns.append(echo)
            powers.append(cfg.interferer_powers[i])
    size = target_echoes[q].size
    V = np.column_stack(columns) if columns else np.zeros((size, 0), dtype=complex)
    return target_echoes[q], V, np.asarray(powers, dtype=float)


def interference_matrix(V: np.ndarray, powers: np.ndarray, noise: float) -> np.ndarray:
    """T_2 = V diag(powers) V^H + noise I."""
    return (V * powers) @ V.conj().T + noise * np.eye(V.shape[0])


def build_quotient_matrices(x: np.ndarray, q: int, cfg: ScenarioConfig) -> QuotientMatrices:
    """
    Build T_{1,q} = s_q v_q v_q^H and T_{2,q} = sum of interfering rank-one terms + s_r I.

    Args:
        x: Vectorised waveform (nonzero)
        q: Target index
        cfg: Scenario

    Returns:
        QuotientMatrices for target q
    """
    v, V, powers = interference_terms(x, q, cfg)
    t1 = cfg.target_powers[q] * np.outer(v, v.conj())
    return QuotientMatrices(t1=t1, t2=interference_matrix(V, powers, cfg.radar_noise_power), echo=v)


def rayleigh_quotient(u: np.ndarray, qm: QuotientMatrices) -> float:
    """u^H T_1 u / u^H T_2 u."""
    num = np.real(np.vdot(u, qm.t1 @ u))
    den = np.real(np.vdot(u, qm.t2 @ u))
    return float(num / den)


def _solve_dense(t2: np.ndarray, v: np.ndarray) -> np.ndarray:
    condition = np.linalg.cond(t2)
    if not np.isfinite(condition) or condition > MAX_INTERFERENCE_CONDITION:
        raise SingularInterferenceError(f"T_2 is numerically singular (condition {condition:.3e})")
    factor = scipy.linalg.cho_factor(t2, lower=True)
    return scipy.linalg.cho_solve(factor, v)


def _solve_woodbury(V: np.ndarray, powers: np.ndarray, noise: float, v: np.ndarray) -> np.ndarray:
    # (V D V^H + s I)^{-1} v = (v - V (s D^{-1} + V^H V)^{-1} V^H v) / s
    if V.shape[1] == 0:
        return v / noise
    inner = noise * np.diag(1.0 / powers) + V.conj().T @ V
    correction = V @ scipy.linalg.solve(inner, V.conj().T @ v, assume_a='her')
    return (v - correction) / noise


def mvdr_combiner(v: np.ndarray, V: np.ndarray, powers: np.ndarray, noise: float,
                  method: str = 'dense') -> np.ndarray:
    """
    u = T_2^{-1} v / (v^H T_2^{-1} v) for T_2 = V diag(powers) V^H + noise I.

    Raises:
        SingularInterferenceError: if T_2 is numerically singular (dense path)
            or the echo v vanishes
        ValueError: for an unknown method
    """
    if method == 'dense':
        w = _solve_dense(interference_matrix(V, powers, noise), v)
    elif method == 'woodbury':
        w = _solve_woodbury(V, powers, noise, v)
    else:
        raise ValueError(f"Unknown beamformer method '{method}'")
    gain = np.vdot(v, w)
    if abs(gain) == 0:
        raise SingularInterferenceError("Echo vanishes; combiner undefined")
    return w / gain


def steered_gain(v: np.ndarray, V: np.ndarray, powers: np.ndarray, noise: float,
                 method: str = 'dense') -> float:
    """Output SINR of a unit-power echo v after its MVDR combiner, interference V diag(powers) V^H."""
    u = mvdr_combiner(v, V, powers, noise, method)
    qm = QuotientMatrices(t1=np.outer(v, v.conj()), t2=interference_matrix(V, powers, noise), echo=v)
    return rayleigh_quotient(u, qm)


def update_beamformer(x: np.ndarray, q: int, cfg: ScenarioConfig, method: str = 'dense') -> np.ndarray:
    """
    MVDR combiner u_q = T_2^{-1} v_q / (v_q^H T_2^{-1} v_q), so that u_q^H v_q = 1.

    Args:
        x: Vectorised waveform
        q: Target index
        cfg: Scenario
        method: 'dense' (Cholesky solve of T_2) or 'woodbury' (matrix inversion lemma)

    Returns:
        Combiner of length N_R L

    Raises:
        SingularInterferenceError: if T_2 is numerically singular (dense path)
    """
    v, V, powers = interference_terms(x, q, cfg)
    return mvdr_combiner(v, V, powers, cfg.radar_noise_power, method)


def update_bank(x: np.ndarray, cfg: ScenarioConfig, method: str = 'dense') -> BeamformerBank:
    """Update the combiners of every target for a fixed waveform."""
    vectors = np.vstack([update_beamformer(x, q, cfg, method) for q in range(cfg.n_targets)])
    return BeamformerBank(vectors=vectors)
