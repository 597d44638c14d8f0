"""
Campaign Definition
Named experiment campaigns: a base scenario, a swept parameter, an optional
series dimension and the Monte-Carlo trial count.
"""

import itertools
import logging
import os
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from scenario import (
    FIELD_NAMES, ScenarioConfig, ScenarioError, load_scenario, parse_key_values,
)

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 100
DEFAULT_CCDF_THRESHOLDS_DB = tuple(round(0.25 * k, 2) for k in range(25))

# Scenario fields holding one entry per target or interferer
_PER_ENTRY_FIELDS = {'target_powers', 'interferer_powers', 'sinr_floors_db'}
_CAMPAIGN_KEYS = {'name', 'scenario', 'sweep_parameter', 'sweep_values', 'series_parameter',
                  'series_values', 'trials', 'ccdf_thresholds_db'}


class CampaignError(ValueError):
    """Raised when a campaign file is malformed."""


class CampaignName(str, Enum):
    """One campaign per figure family."""

    SINR_VS_ITER = 'sinr_vs_iter'
    MUI_VS_ITER = 'mui_vs_iter'
    RATE_VS_EPSILON = 'rate_vs_epsilon'
    CONSTELLATION_SCATTER = 'constellation_scatter'
    SINR_VS_EPSILON = 'sinr_vs_epsilon'
    BEAMPATTERN = 'beampattern'
    PAPR_CCDF = 'papr_ccdf'
    MUI_VS_EPSILON_BOX = 'mui_vs_epsilon_box'
    MUI_VS_ETA = 'mui_vs_eta'
    SIMILARITY_REGIONS = 'similarity_regions'


@dataclass(frozen=True)
class SweepPoint:
    """One (series value, sweep value) cell of a campaign grid."""

    series_index: int
    sweep_index: int
    series_value: str
    sweep_value: str


@dataclass
class Campaign:
    """A named sweep over a base scenario with Monte-Carlo trials."""

    name: CampaignName
    base_scenario: ScenarioConfig
    sweep_parameter: str
    sweep_values: Tuple[str, ...]
    trials: int = DEFAULT_TRIALS
    out_dir: Optional[Path] = None
    series_parameter: Optional[str] = None
    series_values: Tuple[str, ...] = ()
    ccdf_thresholds_db: Tuple[float, ...] = DEFAULT_CCDF_THRESHOLDS_DB
    mixes: Dict[str, Tuple[str, ...]] = field(default_factory=dict)
    scenario_path: Optional[Path] = None

    def __post_init__(self):
        if not isinstance(self.name, CampaignName):
            try:
                self.name = CampaignName(self.name)
            except ValueError:
                raise CampaignError(f"Unknown campaign name '{self.name}'. "
                                    f"Valid names: {', '.join(n.value for n in CampaignName)}")
        if self.sweep_parameter not in FIELD_NAMES:
            raise CampaignError(f"sweep_parameter '{self.sweep_parameter}' is not a scenario field")
        if not self.sweep_values:
            raise CampaignError("sweep_values: at least one value is required")
        if self.series_parameter is not None:
            if self.series_parameter not in FIELD_NAMES:
                raise CampaignError(f"series_parameter '{self.series_parameter}' is not a scenario field")
            if not self.series_values:
                raise CampaignError("series_values: required when series_parameter is set")
        elif self.series_values:
            raise CampaignError("series_values given without series_parameter")
        if int(self.trials) != self.trials or self.trials < 1:
            raise CampaignError(f"trials: must be a positive integer (got {self.trials})")
        for name in self.mixes:
            if name not in FIELD_NAMES:
                raise CampaignError(f"mix.{name}: not a scenario field")
            if not self.mixes[name]:
                raise CampaignError(f"mix.{name}: at least one value is required")
        if not self.ccdf_thresholds_db:
            raise CampaignError("ccdf_thresholds_db: at least one threshold is required")
        # every grid point must produce a valid scenario
        for point in self.points():
            for trial in range(len(self.mix_combinations)):
                self.scenario_for(point, trial)

    def points(self) -> List[SweepPoint]:
        """Grid cells ordered by (series value, sweep value)."""
        series = self.series_values if self.series_parameter else ('',)
        return [
            SweepPoint(si, wi, s, w)
            for si, s in enumerate(series)
            for wi, w in enumerate(self.sweep_values)
        ]

    @property
    def mix_combinations(self) -> List[Dict[str, str]]:
        if not self.mixes:
            return [{}]
        names = sorted(self.mixes)
        return [dict(zip(names, combo)) for combo in itertools.product(*(self.mixes[n] for n in names))]

    @property
    def base_seed(self) -> int:
        return self.base_scenario.rng_seed

    def seed_for(self, trial: int) -> int:
        """Trial t uses base_seed + t at every grid point (paired draws)."""
        return self.base_seed + trial

    def _apply(self, cfg: ScenarioConfig, name: str, raw: str) -> ScenarioConfig:
        if name in _PER_ENTRY_FIELDS and ',' not in raw:
            # a scalar applies to every target / interferer
            count = len(getattr(cfg, name))
            raw = ', '.join([raw] * max(count, 1))
        return cfg.with_overrides(**{name: raw})

    def scenario_for(self, point: SweepPoint, trial: int) -> ScenarioConfig:
        """Scenario of one trial at one grid point."""
        try:
            cfg = self.base_scenario
            combos = self.mix_combinations
            for name, raw in combos[trial % len(combos)].items():
                cfg = self._apply(cfg, name, raw)
            if self.series_parameter:
                cfg = self._apply(cfg, self.series_parameter, point.series_value)
            cfg = self._apply(cfg, self.sweep_parameter, point.sweep_value)
            return cfg.with_overrides(rng_seed=self.seed_for(trial))
        except ScenarioError as e:
            raise CampaignError(f"Campaign '{self.name.value}' at {self.sweep_parameter}={point.sweep_value}: {e}")

    def describe(self) -> Dict[str, object]:
        return {
            'name': self.name.value,
            'sweep_parameter': self.sweep_parameter,
            'sweep_values': list(self.sweep_values),
            'series_parameter': self.series_parameter,
            'series_values': list(self.series_values),
            'trials': self.trials,
            'mixes': {k: list(v) for k, v in self.mixes.items()},
            'points': len(self.points()),
        }


def _split_list(raw: str) -> Tuple[str, ...]:
    return tuple(item.strip() for item in raw.split(',') if item.strip())


def parse_campaign(text: str, base_dir: Union[str, Path] = '.', source: str = '<string>',
                   default_trials: Optional[int] = None) -> Campaign:
    """
    Parse campaign text; the scenario path is resolved against base_dir.

    Args:
        text: Campaign file contents
        base_dir: Directory the scenario path is relative to
        source: Name used in error messages
        default_trials: Trials when the file omits them (DRIP_TRIALS, else 100)

    Returns:
        Validated Campaign
    """
    try:
        pairs = parse_key_values(text, source)
    except ScenarioError as e:
        raise CampaignError(str(e))
    values: Dict[str, str] = {}
    overrides: Dict[str, str] = {}
    mixes: Dict[str, Tuple[str, ...]] = {}
    for key, raw in pairs:
        if key.startswith('set.'):
            overrides[key[4:]] = raw
        elif key.startswith('mix.'):
            mixes[key[4:]] = _split_list(raw)
        elif key in _CAMPAIGN_KEYS:
            values[key] = raw
        else:
            raise CampaignError(f"{source}: unknown key '{key}'")
    for required in ('name', 'scenario', 'sweep_parameter', 'sweep_values'):
        if required not in values:
            raise CampaignError(f"{source}: missing required key '{required}'")

    scenario_path = Path(base_dir) / values['scenario']
    try:
        base = load_scenario(scenario_path)
        if overrides:
            base = base.with_overrides(**overrides)
    except ScenarioError as e:
        raise CampaignError(f"{source}: scenario '{values['scenario']}': {e}")

    if default_trials is None:
        default_trials = int(os.getenv('DRIP_TRIALS', DEFAULT_TRIALS))
    try:
        trials = int(values['trials']) if 'trials' in values else default_trials
        thresholds = (tuple(float(t) for t in _split_list(values['ccdf_thresholds_db']))
                      if 'ccdf_thresholds_db' in values else DEFAULT_CCDF_THRESHOLDS_DB)
    except ValueError as e:
        raise CampaignError(f"{source}: {e}")

    return Campaign(
        name=values['name'],
        base_scenario=base,
        sweep_parameter=values['sweep_parameter'],
        sweep_values=_split_list(values['sweep_values']),
        trials=trials,
        series_parameter=values.get('series_parameter'),
        series_values=_split_list(values.get('series_values', '')),
        ccdf_thresholds_db=thresholds,
        mixes=mixes,
        scenario_path=scenario_path,
    )


def load_campaign(path: Union[str, Path], default_trials: Optional[int] = None) -> Campaign:
    """
    Load a campaign file.

    Raises:
        CampaignError: malformed campaign or scenario
        OSError: unreadable campaign or scenario file
    """
    path = Path(path)
    campaign = parse_campaign(path.read_text(), base_dir=path.parent, source=str(path),
                              default_trials=default_trials)
    logger.info(f"Loaded campaign '{campaign.name.value}' from {path.name}: "
                f"{len(campaign.points())} grid point(s) x {campaign.trials} trial(s)")
    return campaign


def beampattern_grid(step_deg: float) -> np.ndarray:
    """Scan angles strictly inside (-90, 90) degrees."""
    count = int(np.floor(180.0 / step_deg))
    grid = -90.0 + step_deg * np.arange(1, count + 1)
    return np.round(grid[grid < 90.0], 10)
