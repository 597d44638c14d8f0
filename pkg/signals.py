"""
Signals Module
Reference LFM chirp, Rayleigh channels, constellation symbols and the
zero-forcing communication reference.
"""

import logging
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.linalg

from scenario import Constellation, ScenarioConfig

logger = logging.getLogger(__name__)

# Channels worse than this are treated as rank deficient.
MAX_CHANNEL_CONDITION = 1e12


class ChannelRankError(ValueError):
    """Raised when H lacks full row rank for zero-forcing."""


def vec(X: np.ndarray) -> np.ndarray:
    """Column-major vectorisation."""
    return np.asarray(X).reshape(-1, order='F')


def unvec(x: np.ndarray, n_rows: int) -> np.ndarray:
    """Inverse of vec for a matrix with n_rows rows."""
    x = np.asarray(x)
    if x.size % n_rows:
        raise ValueError(f"Vector of length {x.size} cannot be split into {n_rows} rows")
    return x.reshape((n_rows, x.size // n_rows), order='F')


@dataclass(frozen=True)
class ComplexWaveform:
    """Space-time transmit signal X (N_T x L) with its vectorisation x = vec(X)."""

    matrix_form: np.ndarray
    vector_form: np.ndarray

    @classmethod
    def from_matrix(cls, X: np.ndarray) -> 'ComplexWaveform':
        X = np.array(X, dtype=complex)
        return cls(matrix_form=X, vector_form=vec(X))

    @classmethod
    def from_vector(cls, x: np.ndarray, n_tx: int) -> 'ComplexWaveform':
        x = np.array(x, dtype=complex).ravel()
        return cls(matrix_form=unvec(x, n_tx), vector_form=x)

    @property
    def n_tx(self) -> int:
        return self.matrix_form.shape[0]

    @property
    def n_samples(self) -> int:
        return self.matrix_form.shape[1]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector_form))


@dataclass(frozen=True)
class CommBlock:
    """One communication draw: channel, raw symbols and the unit-norm ZF reference."""

    channel: np.ndarray
    symbols: np.ndarray
    symbol_scale: float
    zf_reference: ComplexWaveform

    @property
    def scaled_symbols(self) -> np.ndarray:
        """Symbols on the unit-power sphere, S * symbol_scale."""
        return self.symbols * self.symbol_scale

    @property
    def n_users(self) -> int:
        return self.channel.shape[0]


def lfm_chirp(cfg: ScenarioConfig) -> ComplexWaveform:
    """
    Unit-norm LFM chirp laid out in the vectorised space-time domain.

    Sample n of the length N_T L vector is exp(j pi n^2 / (N_T L)) / sqrt(N_T L),
    so every space-time sample has the same modulus (unit PAPR).
    """
    n = cfg.n_vars
    k = np.arange(n)
    x0 = np.exp(1j * np.pi * k ** 2 / n) / np.sqrt(n)
    return ComplexWaveform.from_vector(x0, cfg.n_tx)


def draw_channel(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. CN(0, 1) Rayleigh channel, shape P x N_T."""
    shape = (cfg.n_users, cfg.n_tx)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def constellation_alphabet(name: Union[Constellation, str]) -> np.ndarray:
    """
    Unit-average-energy alphabet for a constellation.

    Args:
        name: Constellation member or its name

    Returns:
        Complex array of constellation points
    """
    try:
        name = Constellation(name if isinstance(name, Constellation) else str(name).upper())
    except ValueError:
        raise ValueError(f"Unsupported constellation: {name}")
    if name == Constellation.QPSK:
        points = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)
    elif name in (Constellation.PSK16, Constellation.PSK64):
        order = 16 if name == Constellation.PSK16 else 64
        points = np.exp(1j * 2.0 * np.pi * np.arange(order) / order)
    else:
        order = 16 if name == Constellation.QAM16 else 64
        side = int(np.sqrt(order))
        levels = np.arange(-(side - 1), side, 2, dtype=float)
        grid = levels[:, None] + 1j * levels[None, :]
        points = grid.ravel() / np.sqrt(2.0 * (order - 1) / 3.0)
    return points


def draw_symbols(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniform i.i.d. symbols from the scenario constellation, shape P x L."""
    alphabet = constellation_alphabet(cfg.constellation)
    idx = rng.integers(0, len(alphabet), size=(cfg.n_users, cfg.n_samples))
    return alphabet[idx]


def zf_reference(H: np.ndarray, S: np.ndarray) -> CommBlock:
    """
    Zero-forcing reference H^H (H H^H)^{-1} S scaled to unit norm.

    Args:
        H: Channel, P x N_T with full row rank
        S: Symbols, P x L

    Returns:
        CommBlock carrying the scale applied to S

    Raises:
        ChannelRankError: if cond(H) exceeds MAX_CHANNEL_CONDITION
    """
    H = np.asarray(H, dtype=complex)
    S = np.asarray(S, dtype=complex)
    if H.shape[0] != S.shape[0]:
        raise ValueError(f"Channel has {H.shape[0]} users but symbols have {S.shape[0]} rows")
    condition = np.linalg.cond(H)
    if not np.isfinite(condition) or condition > MAX_CHANNEL_CONDITION:
        raise ChannelRankError(f"Channel is rank deficient (condition number {condition:.3e})")
    gram = H @ H.conj().T
    unscaled = H.conj().T @ scipy.linalg.solve(gram, S, assume_a='her')
    norm = np.linalg.norm(unscaled)
    if norm == 0:
        raise ValueError("Zero-forcing reference is zero; symbols must not be all zero")
    scale = 1.0 / norm
    return CommBlock(channel=H, symbols=S, symbol_scale=float(scale),
                     zf_reference=ComplexWaveform.from_matrix(unscaled * scale))


def draw_comm_block(cfg: ScenarioConfig, rng: np.random.Generator) -> CommBlock:
    """Draw (H, S) for one trial and build its ZF reference."""
    H = draw_channel(cfg, rng)
    S = draw_symbols(cfg, rng)
    return zf_reference(H, S)
