"""
CSV Exporters
Every table starts with '#' comment lines documenting its columns and, for
campaign output, the exact scenario and campaign that produced it. Floats are
written with repr so reruns are byte-identical.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from al_solver import InnerTrace
from beamformer import BeamformerBank
from metrics import beampattern, evaluate_waveform, papr_ccdf
from qcqp_assembly import constraint_kinds
from scenario import ScenarioConfig, format_scenario
from signals import CommBlock, ComplexWaveform

from .campaign import DEFAULT_CCDF_THRESHOLDS_DB, Campaign, CampaignName, beampattern_grid

logger = logging.getLogger(__name__)

COLUMN_DOCS = {
    'series_value': 'value of the series parameter (empty when the campaign has no series)',
    'sweep_value': 'value of the swept parameter',
    'trial': 'Monte-Carlo trial index t',
    'seed': 'random seed of the trial (base seed + t)',
    'status': 'solver status (converged, iteration_budget, inner_failure, error)',
    'iterations': 'outer iterations run',
    'objective': 'final ||x - x_comm||^2',
    'mui_energy': 'multi-user interference energy ||HX - S||_F^2 at the unit-norm symbol scale',
    'sum_rate': 'MUI-limited sum rate, bps/Hz',
    'chirp_sum_rate': 'sum rate of the reference chirp on the same draw, bps/Hz',
    'papr_db': 'peak-to-average power ratio over all space-time samples, dB',
    'similarity': '||x - x0||',
    'similarity_sq': '||x - x0||^2',
    'max_violation': 'largest positive constraint residual',
    'error': 'exception text for failed trials',
    'iteration': 'outer iteration k (1-based)',
    'target': 'radar target q (1-based)',
    'mean_sinr_db': 'radar SINR averaged over trials, dB',
    'min_sinr_db': 'smallest radar SINR over trials, dB',
    'mean_mui_energy': 'MUI energy averaged over trials',
    'mean_sum_rate': 'sum rate averaged over trials, bps/Hz',
    'median_sum_rate': 'median sum rate over trials, bps/Hz',
    'std_sum_rate': 'standard deviation of the sum rate over trials',
    'mean_chirp_sum_rate': 'reference chirp sum rate averaged over trials',
    'converged_fraction': 'fraction of trials with status converged',
    'trials': 'number of trials aggregated (failed trials excluded)',
    'angle_deg': 'scan angle, degrees',
    'gain_db': 'MVDR output SINR toward the scan angle, averaged in linear power, dB',
    'threshold_db': 'PAPR threshold, dB',
    'prob': 'empirical probability that the PAPR exceeds the threshold',
    'median': 'median MUI energy',
    'q1': 'first quartile',
    'q3': 'third quartile',
    'whisker_low': 'smallest value within 1.5 IQR of q1',
    'whisker_high': 'largest value within 1.5 IQR of q3',
    'mean': 'mean MUI energy',
    'epsilon': 'similarity radius',
    'mean_similarity': '||x - x0|| averaged over trials',
    'mean_similarity_sq': '||x - x0||^2 averaged over trials',
    'max_similarity': 'largest ||x - x0|| over trials',
    'user': 'communication user p (1-based)',
    'sample': 'time sample l (1-based)',
    're': 'real part',
    'im': 'imaginary part',
    'sample_index': 'position in the column-major vectorised waveform (0-based)',
    'index': 'position (1-based)',
    'kind': 'constraint family',
    'residual': 'c_i(x) - r_i (feasible when <= 0)',
    'outer': 'outer iteration the inner loop belongs to',
    'iter': 'inner iteration n (1-based)',
    'dual_norm': '||lambda||',
    'step_norm': '||x_r(n) - x_r(n-1)||',
    'value': 'metric value',
}


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return 'nan'
        return repr(value)
    return str(value)


def _doc(column: str) -> str:
    if column.startswith('sinr_db_'):
        return f"radar SINR of target {column[len('sinr_db_'):]} with the final combiner, dB"
    return COLUMN_DOCS.get(column, column)


def write_table(path: Union[str, Path], columns: Sequence[str], rows: Iterable[Sequence],
                comments: Sequence[str] = ()) -> Path:
    """
    Write a CSV table preceded by '#' comment lines.

    Args:
        path: Output file
        columns: Column names
        rows: Row values
        comments: Extra comment lines placed before the column documentation

    Returns:
        The written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as handle:
        for line in comments:
            handle.write(f"# {line}\n")
        for column in columns:
            handle.write(f"# {column}: {_doc(column)}\n")
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def scenario_comments(cfg: ScenarioConfig) -> List[str]:
    return [f"scenario: {line}" for line in format_scenario(cfg).splitlines()]


def campaign_comments(campaign: Campaign) -> List[str]:
    lines = [
        f"campaign: {campaign.name.value}",
        f"sweep: {campaign.sweep_parameter} = {', '.join(campaign.sweep_values)}",
    ]
    if campaign.series_parameter:
        lines.append(f"series: {campaign.series_parameter} = {', '.join(campaign.series_values)}")
    for name in sorted(campaign.mixes):
        lines.append(f"mix: {name} = {', '.join(campaign.mixes[name])} (trial t uses combination t, cycling)")
    lines.append(f"trials per point: {campaign.trials}; trial t uses seed {campaign.base_seed} + t")
    return lines + scenario_comments(campaign.base_scenario)


def write_trials_csv(campaign: Campaign, records, out_dir: Union[str, Path]) -> Path:
    """One row per (series value, sweep value, trial)."""
    n_targets = max([len(r.sinr_db) for r in records] + [campaign.base_scenario.n_targets])
    columns = ['series_value', 'sweep_value', 'trial', 'seed', 'status', 'iterations', 'objective',
               'mui_energy', 'sum_rate', 'chirp_sum_rate', 'papr_db', 'similarity', 'similarity_sq',
               'max_violation'] + [f"sinr_db_{q + 1}" for q in range(n_targets)] + ['error']
    rows = []
    for r in records:
        sinr = list(r.sinr_db) + [float('nan')] * (n_targets - len(r.sinr_db))
        rows.append([r.point.series_value, r.point.sweep_value, r.trial, r.seed, r.status, r.iterations,
                     r.objective, r.mui_energy, r.sum_rate, r.chirp_sum_rate, r.papr_db, r.similarity,
                     r.similarity ** 2, r.max_violation] + sinr + [r.error])
    path = Path(out_dir) / f"{campaign.name.value}_trials.csv"
    return write_table(path, columns, rows, campaign_comments(campaign))


def write_summary_csv(campaign: Campaign, columns: Sequence[str], rows, notes: Sequence[str],
                      out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / f"{campaign.name.value}_summary.csv"
    return write_table(path, columns, rows, list(notes) + campaign_comments(campaign))


def write_extra_tables(campaign: Campaign, records, out_dir: Union[str, Path]) -> List[Path]:
    """Campaign-specific raw tables (received constellation points)."""
    if campaign.name != CampaignName.CONSTELLATION_SCATTER:
        return []
    rows = []
    for r in records:
        if r.received is None:
            continue
        for user, sample, value in _received_entries(r.received):
            rows.append([r.point.series_value, r.point.sweep_value, r.trial, user, sample,
                         value.real, value.imag])
    path = Path(out_dir) / f"{campaign.name.value}_points.csv"
    columns = ['series_value', 'sweep_value', 'trial', 'user', 'sample', 're', 'im']
    return [write_table(path, columns, rows, campaign_comments(campaign))]


def _received_entries(received: np.ndarray) -> List[Tuple[int, int, complex]]:
    P, L = received.shape
    return [(p + 1, l + 1, complex(received[p, l])) for p in range(P) for l in range(L)]


def emit_constellation(waveform: ComplexWaveform, H: np.ndarray, out: Union[str, Path]) -> Path:
    """
    Write the noiseless received points H X for scatter plotting.

    Rows: (user, sample, re, im), P * L of them.
    """
    received = np.asarray(H) @ waveform.matrix_form
    rows = [[u, s, v.real, v.imag] for u, s, v in _received_entries(received)]
    return write_table(out, ['user', 'sample', 're', 'im'], rows,
                       [f"received constellation H X, {received.shape[0]} user(s) x {received.shape[1]} sample(s)"])


def export_waveform(waveform: ComplexWaveform, path: Union[str, Path]) -> Path:
    x = waveform.vector_form
    return write_table(path, ['sample_index', 're', 'im'], [[i, v.real, v.imag] for i, v in enumerate(x)],
                       [f"vectorised waveform x = vec(X), N_T = {waveform.n_tx}, L = {waveform.n_samples}"])


def export_metric_trace(values: Sequence[float], path: Union[str, Path], name: str) -> Path:
    return write_table(path, ['iteration', 'value'], [[k, v] for k, v in enumerate(values, 1)],
                       [f"metric: {name}"])


def export_outer_trace(result, path: Union[str, Path]) -> Path:
    """Per outer iteration: objective, MUI, violation and each target's SINR."""
    n_targets = len(result.sinr_trace[0]) if result.sinr_trace else 0
    columns = ['iteration', 'objective', 'mui_energy', 'max_violation'] + [f"sinr_db_{q + 1}" for q in range(n_targets)]
    rows = [
        [k + 1, result.objective_trace[k], result.mui_trace[k], result.violation_trace[k]] + list(result.sinr_trace[k])
        for k in range(result.iterations)
    ]
    return write_table(path, columns, rows, [f"status: {result.status}"])


def inner_trace_rows(trace: InnerTrace, outer: Optional[int] = None) -> List[list]:
    prefix = [] if outer is None else [outer]
    return [prefix + list(row) for row in trace.rows()]


def export_inner_trace(trace: InnerTrace, path: Union[str, Path]) -> Path:
    """Columns iter, objective, max_violation, dual_norm, step_norm."""
    return write_table(path, ['iter', 'objective', 'max_violation', 'dual_norm', 'step_norm'],
                       inner_trace_rows(trace))


def export_inner_traces(traces: Sequence[InnerTrace], path: Union[str, Path]) -> Path:
    rows = []
    for k, trace in enumerate(traces, 1):
        rows.extend(inner_trace_rows(trace, k))
    return write_table(path, ['outer', 'iter', 'objective', 'max_violation', 'dual_norm', 'step_norm'], rows)


def export_residuals(residuals: Sequence[float], cfg: ScenarioConfig, path: Union[str, Path]) -> Path:
    kinds = constraint_kinds(cfg.n_vars, cfg.n_targets)
    rows = [[i, kind, value] for i, (kind, value) in enumerate(zip(kinds, residuals), 1)]
    return write_table(path, ['index', 'kind', 'residual'], rows)


def export_beamformers(bank: BeamformerBank, path: Union[str, Path]) -> Path:
    rows = [[q + 1, i, v.real, v.imag] for q in range(bank.n_targets) for i, v in enumerate(bank.for_target(q))]
    return write_table(path, ['target', 'index', 're', 'im'], rows,
                       ["stacked combiners u_q = [u_q1; ...; u_qL]; index is 0-based within u_q"])


def export_beampattern(pattern: Sequence[Tuple[float, float]], path: Union[str, Path],
                       comments: Sequence[str] = ()) -> Path:
    return write_table(path, ['angle_deg', 'gain_db'], [list(p) for p in pattern], comments)


def export_ccdf(curve: Sequence[Tuple[float, float]], path: Union[str, Path],
                comments: Sequence[str] = ()) -> Path:
    return write_table(path, ['threshold_db', 'prob'], [list(p) for p in curve], comments)


def sample_power_ccdf(waveform: ComplexWaveform,
                      thresholds_db: Sequence[float] = DEFAULT_CCDF_THRESHOLDS_DB) -> List[Tuple[float, float]]:
    """Fraction of space-time samples whose power exceeds the average by more than each threshold."""
    x = waveform.vector_form
    power = np.abs(x) ** 2
    ratio_db = 10.0 * np.log10(np.maximum(power / power.mean(), np.finfo(float).tiny))
    return papr_ccdf(ratio_db, thresholds_db)


def write_solve_bundle(result, cfg: ScenarioConfig, comm: CommBlock, x0: ComplexWaveform,
                       out_dir: Union[str, Path]) -> List[Path]:
    """
    Serialise a SolveResult: waveform, traces, residuals, combiners,
    received constellation, MVDR beampattern, sample power CCDF and a
    JSON summary.

    Returns:
        Paths written, in a fixed order
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = evaluate_waveform(result.waveform.vector_form, result.beamformers, comm, x0.vector_form,
                               cfg, result.feasibility)
    written = [
        export_waveform(result.waveform, out_dir / 'waveform.csv'),
        export_outer_trace(result, out_dir / 'outer_trace.csv'),
        export_inner_traces(result.inner_traces, out_dir / 'inner_trace.csv'),
        export_metric_trace(result.objective_trace, out_dir / 'objective_trace.csv', 'objective ||x - x_comm||^2'),
        export_residuals(result.feasibility, cfg, out_dir / 'residuals.csv'),
        export_beamformers(result.beamformers, out_dir / 'beamformers.csv'),
        emit_constellation(result.waveform, comm.channel, out_dir / 'constellation.csv'),
        export_beampattern(beampattern(result.waveform.vector_form, cfg, beampattern_grid(cfg.beampattern_step_deg)),
                           out_dir / 'beampattern.csv', ["MVDR output SINR of a unit-power target steered over angle"]),
        export_ccdf(sample_power_ccdf(result.waveform), out_dir / 'power_ccdf.csv',
                    ["per-sample power over the average power; prob is the fraction of samples above threshold_db"]),
    ]
    summary_path = out_dir / 'summary.json'
    summary = {'result': result.summary(), 'metrics': report.to_dict(), 'scenario': cfg.to_dict()}
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + '\n')
    written.append(summary_path)
    logger.info(f"Wrote solve bundle ({len(written)} files) to {out_dir}")
    return written
