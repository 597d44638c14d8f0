"""
Array Model Module
ULA steering vectors, the two-way monostatic response and its space-time lift.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import List, Tuple

import numpy as np

from scenario import ScenarioConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SteeringVector:
    """Far-field ULA phase response at one angle."""

    entries: np.ndarray
    angle: float
    spacing: float

    def __len__(self):
        return len(self.entries)


@dataclass(frozen=True)
class ArrayResponse:
    """Two-way response Pi(theta) = a_R(theta) a_T(theta)^T, shape N_R x N_T."""

    matrix: np.ndarray
    angle: float

    @property
    def n_rx(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_tx(self) -> int:
        return self.matrix.shape[1]


def steering(n: int, theta: float, spacing: float = 0.5) -> SteeringVector:
    """
    ULA steering vector with entry k = exp(j 2 pi spacing k sin(theta)).

    Args:
        n: Number of antennas
        theta: Angle in radians
        spacing: Element spacing in wavelengths

    Returns:
        SteeringVector whose first entry is exactly 1
    """
    if n < 1:
        raise ValueError(f"Antenna count must be >= 1 (got {n})")
    k = np.arange(n)
    entries = np.exp(1j * 2.0 * np.pi * spacing * k * np.sin(theta))
    entries.setflags(write=False)
    return SteeringVector(entries=entries, angle=float(theta), spacing=float(spacing))


def two_way_response(theta: float, cfg: ScenarioConfig) -> ArrayResponse:
    """Outer product a_R(theta) a_T(theta)^T (plain transpose, no conjugate)."""
    a_t = steering(cfg.n_tx, theta, cfg.tx_spacing_wavelengths).entries
    a_r = steering(cfg.n_rx, theta, cfg.rx_spacing_wavelengths).entries
    matrix = np.outer(a_r, a_t)
    matrix.setflags(write=False)
    return ArrayResponse(matrix=matrix, angle=float(theta))


def spacetime_lift(resp: ArrayResponse, L: int) -> np.ndarray:
    """Materialise I_L kron Pi, shape (N_R L) x (N_T L)."""
    if L < 1:
        raise ValueError(f"Sample count must be >= 1 (got {L})")
    return np.kron(np.eye(L), resp.matrix)


def apply_lift(resp: ArrayResponse, x: np.ndarray, L: int) -> np.ndarray:
    """
    Compute (I_L kron Pi) x without building the Kronecker product.

    Uses vec(Pi X) with column-major vec, X = unvec(x) of shape N_T x L.
    """
    X = np.reshape(x, (resp.n_tx, L), order='F')
    return (resp.matrix @ X).reshape(-1, order='F')


@lru_cache(maxsize=64)
def scene_responses(cfg: ScenarioConfig) -> Tuple[Tuple[ArrayResponse, ...], Tuple[ArrayResponse, ...]]:
    """Two-way responses of every (target, interferer) in the scenario."""
    targets = tuple(two_way_response(theta, cfg) for theta in cfg.target_angles_rad)
    interferers = tuple(two_way_response(theta, cfg) for theta in cfg.interferer_angles_rad)
    return targets, interferers


def lifted_echoes(x: np.ndarray, cfg: ScenarioConfig) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """
    Echo vectors v_q = (I_L kron Pi(theta_q)) x and v_i for the interferers.

    Args:
        x: Vectorised waveform, length N_T L
        cfg: Scenario

    Returns:
        (target echoes, interferer echoes), each a list of length-N_R L vectors
    """
    targets, interferers = scene_responses(cfg)
    L = cfg.n_samples
    return ([apply_lift(r, x, L) for r in targets],
            [apply_lift(r, x, L) for r in interferers])
