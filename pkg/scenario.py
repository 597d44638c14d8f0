"""
Scenario Configuration Module
Validated scenario data model shared by every solver stage, plus its
key=value file representation.
"""

import logging
import math
from dataclasses import dataclass, field, fields, replace, asdict
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed or violates an invariant."""


class Constellation(str, Enum):
    """Supported communication constellations."""

    QPSK = 'QPSK'
    PSK16 = 'PSK16'
    PSK64 = 'PSK64'
    QAM16 = 'QAM16'
    QAM64 = 'QAM64'


def db_to_linear(v_db: float) -> float:
    """Convert a power ratio in dB to its linear value."""
    return float(10.0 ** (v_db / 10.0))


def linear_to_db(v: float) -> float:
    """Convert a linear power ratio to dB (-inf for zero)."""
    if v <= 0:
        return float('-inf')
    return float(10.0 * math.log10(v))


@dataclass(frozen=True)
class ScenarioConfig:
    """
    All physical and solver parameters of one experiment.

    Angles are stored in degrees; use the *_rad properties inside the
    numerical modules. eta_db and sinr_floors_db are kept in dB and exposed
    in linear form through eta_linear / sinr_floors_linear.
    """

    n_tx: int
    n_samples: int
    n_users: int
    target_angles: Tuple[float, ...]
    n_rx: int = 7
    interferer_angles: Tuple[float, ...] = ()
    target_powers: Tuple[float, ...] = ()
    interferer_powers: Tuple[float, ...] = ()
    radar_noise_power: float = 0.01
    comm_noise_power: float = 0.01
    epsilon: float = 0.5
    eta_db: float = 2.5
    sinr_floors_db: Tuple[float, ...] = ()
    rho: float = 10.0
    outer_iters: int = 8
    inner_iters: int = 100
    bfgs_iters: int = 50
    constellation: Constellation = Constellation.QPSK
    tx_spacing_wavelengths: float = 0.5
    rx_spacing_wavelengths: float = 0.5
    rng_seed: int = 0
    bfgs_tol: float = 1e-8
    feasibility_tol: float = 1e-6
    adaptive_rho: bool = False
    warm_start_duals: bool = True
    beampattern_step_deg: float = 0.5

    def __post_init__(self):
        # Normalise list-like inputs and fill per-entry defaults before checking.
        object.__setattr__(self, 'target_angles', _as_tuple(self.target_angles))
        object.__setattr__(self, 'interferer_angles', _as_tuple(self.interferer_angles))
        q = len(self.target_angles)
        i = len(self.interferer_angles)
        if not self.target_powers:
            object.__setattr__(self, 'target_powers', (1.0,) * q)
        if not self.interferer_powers:
            object.__setattr__(self, 'interferer_powers', (1.0,) * i)
        if not self.sinr_floors_db:
            object.__setattr__(self, 'sinr_floors_db', (20.0,) * q)
        object.__setattr__(self, 'target_powers', _as_tuple(self.target_powers))
        object.__setattr__(self, 'interferer_powers', _as_tuple(self.interferer_powers))
        object.__setattr__(self, 'sinr_floors_db', _as_tuple(self.sinr_floors_db))
        if not isinstance(self.constellation, Constellation):
            try:
                object.__setattr__(self, 'constellation', Constellation(str(self.constellation).upper()))
            except ValueError:
                raise ScenarioError(f"constellation: unsupported value '{self.constellation}'")
        self._validate()

    def _validate(self):
        for name in ('n_tx', 'n_rx', 'n_samples', 'n_users', 'outer_iters', 'inner_iters', 'bfgs_iters'):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ScenarioError(f"{name}: must be a positive integer (got {value})")
        if self.n_users > self.n_tx:
            raise ScenarioError(
                f"n_users exceeds n_tx ({self.n_users} > {self.n_tx}); zero-forcing needs full row rank")
        if not self.target_angles:
            raise ScenarioError("target_angles: at least one radar target is required")
        for name in ('target_angles', 'interferer_angles'):
            for angle in getattr(self, name):
                if not -90.0 < angle < 90.0:
                    raise ScenarioError(f"{name}: angle {angle} outside (-90, 90) degrees")
        q = len(self.target_angles)
        if len(self.target_powers) != q:
            raise ScenarioError(f"target_powers: expected {q} entries, got {len(self.target_powers)}")
        if len(self.sinr_floors_db) != q:
            raise ScenarioError(f"sinr_floors_db: expected {q} entries, got {len(self.sinr_floors_db)}")
        if len(self.interferer_powers) != len(self.interferer_angles):
            raise ScenarioError(
                f"interferer_powers: expected {len(self.interferer_angles)} entries, "
                f"got {len(self.interferer_powers)}")
        for name in ('target_powers', 'interferer_powers'):
            if any(p < 0 for p in getattr(self, name)):
                raise ScenarioError(f"{name}: powers must be nonnegative")
        for name in ('radar_noise_power', 'comm_noise_power', 'rho',
                     'tx_spacing_wavelengths', 'rx_spacing_wavelengths',
                     'bfgs_tol', 'feasibility_tol', 'beampattern_step_deg'):
            if not getattr(self, name) > 0:
                raise ScenarioError(f"{name}: must be positive (got {getattr(self, name)})")
        if self.epsilon < 0:
            raise ScenarioError(f"epsilon: must be nonnegative (got {self.epsilon})")
        if self.eta_db < 0:
            raise ScenarioError(f"eta below unit PAPR (eta_db={self.eta_db}); PAPR of any signal is >= 0 dB")
        if self.rng_seed < 0:
            raise ScenarioError(f"rng_seed: must be unsigned (got {self.rng_seed})")

    @property
    def n_targets(self) -> int:
        return len(self.target_angles)

    @property
    def n_interferers(self) -> int:
        return len(self.interferer_angles)

    @property
    def n_vars(self) -> int:
        """Number of complex space-time samples N_T * L."""
        return self.n_tx * self.n_samples

    @property
    def n_constraints(self) -> int:
        """QCQP constraint count m = N_T L + Q + 3."""
        return self.n_vars + self.n_targets + 3

    @property
    def eta_linear(self) -> float:
        return db_to_linear(self.eta_db)

    @property
    def sinr_floors_linear(self) -> Tuple[float, ...]:
        return tuple(db_to_linear(g) for g in self.sinr_floors_db)

    @cached_property
    def target_angles_rad(self) -> np.ndarray:
        return np.deg2rad(np.asarray(self.target_angles, dtype=float))

    @cached_property
    def interferer_angles_rad(self) -> np.ndarray:
        return np.deg2rad(np.asarray(self.interferer_angles, dtype=float))

    def with_overrides(self, **changes) -> 'ScenarioConfig':
        """Return a validated copy with some fields replaced."""
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ScenarioError(f"Unknown scenario field(s): {', '.join(sorted(unknown))}")
        parsed = {
            name: _parse_value(name, value) if isinstance(value, str) else value
            for name, value in changes.items()
        }
        # per-entry fields follow their angle list unless given explicitly
        for angles, dependents in (('target_angles', ('target_powers', 'sinr_floors_db')),
                                   ('interferer_angles', ('interferer_powers',))):
            if angles in parsed and len(_as_tuple(parsed[angles])) != len(getattr(self, angles)):
                for name in dependents:
                    parsed.setdefault(name, ())
        return replace(self, **parsed)

    def to_dict(self) -> Dict[str, object]:
        """Plain dictionary view (JSON friendly)."""
        data = asdict(self)
        data['constellation'] = self.constellation.value
        for name, value in data.items():
            if isinstance(value, tuple):
                data[name] = list(value)
        return data


def _as_tuple(value) -> Tuple[float, ...]:
    if isinstance(value, (int, float)):
        return (float(value),)
    return tuple(float(v) for v in value)


_INT_FIELDS = {'n_tx', 'n_rx', 'n_samples', 'n_users', 'outer_iters', 'inner_iters', 'bfgs_iters', 'rng_seed'}
_LIST_FIELDS = {'target_angles', 'interferer_angles', 'target_powers', 'interferer_powers', 'sinr_floors_db'}
_BOOL_FIELDS = {'adaptive_rho', 'warm_start_duals'}
_REQUIRED_FIELDS = ('n_tx', 'n_samples', 'n_users', 'target_angles')
FIELD_NAMES = tuple(f.name for f in fields(ScenarioConfig))


def _parse_value(name: str, raw: str):
    """Parse one raw text value for the named field."""
    text = raw.strip()
    try:
        if name in _LIST_FIELDS:
            if not text:
                return ()
            return tuple(float(item) for item in text.split(','))
        if name in _INT_FIELDS:
            number = float(text)
            if not number.is_integer():
                raise ValueError(f"not an integer: {text}")
            return int(number)
        if name in _BOOL_FIELDS:
            lowered = text.lower()
            if lowered in ('true', 'yes', 'on', '1'):
                return True
            if lowered in ('false', 'no', 'off', '0'):
                return False
            raise ValueError(f"not a boolean: {text}")
        if name == 'constellation':
            try:
                return Constellation(text.upper())
            except ValueError:
                raise ValueError(f"unsupported constellation '{text}'")
        return float(text)
    except ValueError as e:
        raise ScenarioError(f"{name}: {e}")


def parse_key_values(text: str, source: str = '<string>') -> List[Tuple[str, str]]:
    """
    Split key=value text into (key, raw value) pairs.

    Args:
        text: File contents
        source: Name used in error messages

    Returns:
        Ordered list of (key, raw value) pairs
    """
    pairs = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split('#', 1)[0].strip()
        if not stripped:
            continue
        if '=' not in stripped:
            raise ScenarioError(f"{source}:{lineno}: expected 'key = value', got '{stripped}'")
        key, value = stripped.split('=', 1)
        key = key.strip()
        if not key:
            raise ScenarioError(f"{source}:{lineno}: empty key")
        if key in seen:
            raise ScenarioError(f"{source}:{lineno}: duplicate key '{key}'")
        seen.add(key)
        pairs.append((key, value.strip()))
    return pairs


def parse_scenario(text: str, source: str = '<string>') -> ScenarioConfig:
    """Parse scenario text into a validated ScenarioConfig."""
    values = {}
    for key, raw in parse_key_values(text, source):
        if key not in FIELD_NAMES:
            raise ScenarioError(f"{source}: unknown key '{key}'")
        values[key] = _parse_value(key, raw)
    missing = [name for name in _REQUIRED_FIELDS if name not in values]
    if missing:
        raise ScenarioError(f"{source}: missing required key(s): {', '.join(missing)}")
    return ScenarioConfig(**values)


def load_scenario(path: Union[str, Path]) -> ScenarioConfig:
    """
    Load and validate a scenario file.

    Args:
        path: Path to a key=value scenario file

    Returns:
        Validated ScenarioConfig

    Raises:
        ScenarioError: on parse failures or invariant violations
        OSError: when the file cannot be read
    """
    path = Path(path)
    text = path.read_text()
    cfg = parse_scenario(text, str(path))
    logger.info(f"Loaded scenario {path.name}: N_T={cfg.n_tx}, N_R={cfg.n_rx}, L={cfg.n_samples}, "
                f"P={cfg.n_users}, Q={cfg.n_targets}, I={cfg.n_interferers}")
    return cfg


def format_scenario(cfg: ScenarioConfig) -> str:
    """Render a config in the key=value file format."""
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, tuple):
            text = ', '.join(repr(float(v)) for v in value)
        elif isinstance(value, Constellation):
            text = value.value
        elif isinstance(value, bool):
            text = 'true' if value else 'false'
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{f.name} = {text}")
    return '\n'.join(lines) + '\n'


def save_scenario(cfg: ScenarioConfig, path: Union[str, Path]) -> None:
    """Write a config so that load_scenario reparses it field-equal."""
    Path(path).write_text(format_scenario(cfg))
