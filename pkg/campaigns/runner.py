"""
Campaign Runner
Dispatches Monte-Carlo trials over a campaign grid to a worker pool and
writes the trial and summary tables.
"""

import logging
import os
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from bccd import STATUS_INNER_FAILURE, drip_solve
from metrics import beampattern, evaluate_waveform, papr_db, sum_rate
from scenario import ScenarioConfig
from signals import draw_comm_block, lfm_chirp

from .aggregation import summarize
from .campaign import Campaign, CampaignName, SweepPoint, beampattern_grid
from .exporters import write_trials_csv, write_summary_csv, write_extra_tables

logger = logging.getLogger(__name__)

STATUS_ERROR = 'error'
FAILED_STATUSES = {STATUS_ERROR, STATUS_INNER_FAILURE}

EXIT_OK = 0
EXIT_TRIAL_FAILED = 3


@dataclass
class TrialRecord:
    """Outcome of one trial at one grid point."""

    point: SweepPoint
    trial: int
    seed: int
    status: str
    epsilon: float = float('nan')
    iterations: int = 0
    objective: float = float('nan')
    mui_energy: float = float('nan')
    sum_rate: float = float('nan')
    chirp_sum_rate: float = float('nan')
    papr_db: float = float('nan')
    similarity: float = float('nan')
    max_violation: float = float('nan')
    sinr_db: List[float] = field(default_factory=list)
    sinr_trace: List[List[float]] = field(default_factory=list)
    mui_trace: List[float] = field(default_factory=list)
    beampattern: List[Tuple[float, float]] = field(default_factory=list)
    received: Optional[np.ndarray] = None
    error: str = ''

    @property
    def key(self) -> Tuple[int, int, int]:
        return self.point.series_index, self.point.sweep_index, self.trial

    @property
    def failed(self) -> bool:
        return self.status in FAILED_STATUSES


def run_trial(cfg: ScenarioConfig, point: SweepPoint, trial: int,
              name: CampaignName = CampaignName.RATE_VS_EPSILON) -> TrialRecord:
    """
    Draw (H, S) from the trial seed, solve, and evaluate the metrics.

    Exceptions propagate; the runner records them as failed trials.
    """
    rng = np.random.default_rng(cfg.rng_seed)
    comm = draw_comm_block(cfg, rng)
    x0 = lfm_chirp(cfg)
    result = drip_solve(cfg, comm, x0)
    x = result.waveform.vector_form
    report = evaluate_waveform(x, result.beamformers, comm, x0.vector_form, cfg, result.feasibility)
    record = TrialRecord(
        point=point, trial=trial, seed=cfg.rng_seed, status=result.status,
        epsilon=cfg.epsilon,
        iterations=result.iterations,
        objective=float(np.linalg.norm(x - comm.zf_reference.vector_form) ** 2),
        mui_energy=report.mui_energy,
        sum_rate=report.sum_rate_bps_hz,
        chirp_sum_rate=sum_rate(comm.channel, x0.matrix_form, comm.symbols, comm.symbol_scale,
                                cfg.comm_noise_power),
        papr_db=papr_db(x),
        similarity=report.similarity,
        max_violation=report.max_violation,
        sinr_db=list(report.sinr_per_target_db),
        sinr_trace=[list(row) for row in result.sinr_trace],
        mui_trace=list(result.mui_trace),
    )
    if name == CampaignName.BEAMPATTERN:
        record.beampattern = beampattern(x, cfg, beampattern_grid(cfg.beampattern_step_deg))
    if name == CampaignName.CONSTELLATION_SCATTER:
        record.received = comm.channel @ result.waveform.matrix_form
    return record


class CampaignRunner:
    """Runs every (grid point, trial) pair of a campaign and writes its tables."""

    def __init__(self, campaign: Campaign, out_dir: Path, threads: Optional[int] = None,
                 progress_callback: Optional[Callable] = None):
        """
        Initialize the runner.

        Args:
            campaign: Loaded campaign
            out_dir: Output directory (created if missing)
            threads: Worker count (DRIP_THREADS, else the CPU count)
            progress_callback: Optional callback receiving each log entry
        """
        self.campaign = campaign
        self.out_dir = Path(out_dir)
        if threads is None:
            threads = int(os.getenv('DRIP_THREADS', os.cpu_count() or 1))
        self.threads = max(1, int(threads))
        self.progress_callback = progress_callback
        self.run_log = []

    def _log_progress(self, message: str, level: str = 'info'):
        entry = {'timestamp': time.time(), 'message': message, 'level': level}
        self.run_log.append(entry)
        if level == 'error':
            logger.error(message)
        elif level == 'warning':
            logger.warning(message)
        else:
            logger.info(message)
        if self.progress_callback:
            self.progress_callback(entry)

    def _run_one(self, point: SweepPoint, trial: int) -> TrialRecord:
        cfg = self.campaign.scenario_for(point, trial)
        try:
            return run_trial(cfg, point, trial, self.campaign.name)
        except Exception as e:
            return TrialRecord(point=point, trial=trial, seed=cfg.rng_seed, status=STATUS_ERROR,
                               epsilon=cfg.epsilon, error=f"{type(e).__name__}: {e}")

    def run(self) -> Dict[str, object]:
        """
        Execute the campaign.

        Returns:
            Dictionary with status, statistics, written files and exit_code
        """
        campaign = self.campaign
        points = campaign.points()
        total = len(points) * campaign.trials
        result = {
            'status': 'running',
            'campaign': campaign.name.value,
            'start_time': time.time(),
            'files': [],
            'statistics': {'total_trials': total, 'completed': 0, 'failed': 0, 'status_counts': {}},
        }

        self._log_progress('═' * 70)
        self._log_progress(f"CAMPAIGN {campaign.name.value}: {len(points)} grid point(s) x "
                           f"{campaign.trials} trial(s), {self.threads} worker(s)")
        self._log_progress('═' * 70)

        self.out_dir.mkdir(parents=True, exist_ok=True)
        records: Dict[Tuple[int, int, int], TrialRecord] = {}
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            futures = {
                pool.submit(self._run_one, point, trial): (point, trial)
                for point in points
                for trial in range(campaign.trials)
            }
            for done, future in enumerate(as_completed(futures), 1):
                record = future.result()
                records[record.key] = record
                label = f"{campaign.sweep_parameter}={record.point.sweep_value}"
                if campaign.series_parameter:
                    label = f"{campaign.series_parameter}={record.point.series_value}, {label}"
                if record.failed:
                    detail = record.error or record.status
                    self._log_progress(f"  ✗ [{done}/{total}] {label}, trial {record.trial}: {detail}", 'warning')
                else:
                    logger.debug(f"  ✓ [{done}/{total}] {label}, trial {record.trial}: {record.status}")
                    if done % max(1, total // 10) == 0 or done == total:
                        self._log_progress(f"  ✓ [{done}/{total}] trials finished")

        ordered = [records[key] for key in sorted(records)]
        histogram = Counter(r.status for r in ordered)
        failed = sum(1 for r in ordered if r.failed)

        self._log_progress('═' * 70)
        self._log_progress("WRITING RESULTS")
        self._log_progress('═' * 70)
        columns, rows, notes = summarize(campaign, ordered)
        result['files'].append(str(write_trials_csv(campaign, ordered, self.out_dir)))
        result['files'].append(str(write_summary_csv(campaign, columns, rows, notes, self.out_dir)))
        result['files'].extend(str(p) for p in write_extra_tables(campaign, ordered, self.out_dir))
        for note in notes:
            self._log_progress(f"  {note}")

        result['statistics'].update({
            'completed': len(ordered),
            'failed': failed,
            'status_counts': dict(sorted(histogram.items())),
        })
        result['end_time'] = time.time()
        result['duration_seconds'] = result['end_time'] - result['start_time']
        result['exit_code'] = EXIT_TRIAL_FAILED if failed else EXIT_OK
        result['status'] = 'completed_with_errors' if failed else 'completed_success'

        counts = ', '.join(f"{k}={v}" for k, v in sorted(histogram.items()))
        self._log_progress(f"Campaign {campaign.name.value} finished in {result['duration_seconds']:.1f}s: "
                           f"{len(ordered)} trial(s), {failed} failed ({counts})",
                           'warning' if failed else 'info')
        return result


def run_campaign(campaign: Campaign, out_dir: Path, threads: Optional[int] = None,
                 progress_callback: Optional[Callable] = None) -> int:
    """Run a campaign and return its exit status (0, or 3 if any trial failed)."""
    return CampaignRunner(campaign, out_dir, threads, progress_callback).run()['exit_code']
