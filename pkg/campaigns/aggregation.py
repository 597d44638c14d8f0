"""
Campaign Aggregation
Per-campaign summaries of trial records: means over trials, box statistics,
PAPR CCDFs, averaged beampatterns and the similarity region breakpoint.
"""

import logging
from collections import OrderedDict
from typing import List, Sequence, Tuple

import numpy as np

from metrics import box_stats, papr_ccdf
from scenario import db_to_linear, linear_to_db

from .campaign import Campaign, CampaignName

logger = logging.getLogger(__name__)

BREAKPOINT_TOL = 1e-3

Summary = Tuple[List[str], List[list], List[str]]


def group_by_point(records) -> 'OrderedDict':
    """Usable records grouped by grid point, in grid order."""
    groups = OrderedDict()
    for r in sorted(records, key=lambda r: r.key):
        groups.setdefault(r.point, [])
        if r.status != 'error':
            groups[r.point].append(r)
    return groups


def _mean(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else float('nan')


def _padded(traces: List[List], length: int) -> np.ndarray:
    # early-stopped solves hold their last value
    return np.array([list(t) + [t[-1]] * (length - len(t)) for t in traces], dtype=float)


def _trace_summary(campaign: Campaign, records, kind: str) -> Summary:
    rows = []
    for point, group in group_by_point(records).items():
        group = [r for r in group if r.mui_trace]
        if not group:
            continue
        length = max(len(r.mui_trace) for r in group)
        if kind == 'sinr':
            stacked = _padded([r.sinr_trace for r in group], length)
            for k in range(length):
                for q in range(stacked.shape[2]):
                    rows.append([point.series_value, point.sweep_value, k + 1, q + 1,
                                 float(np.mean(stacked[:, k, q])), len(group)])
        else:
            stacked = _padded([r.mui_trace for r in group], length)
            for k in range(length):
                rows.append([point.series_value, point.sweep_value, k + 1,
                             float(np.mean(stacked[:, k])), len(group)])
    if kind == 'sinr':
        columns = ['series_value', 'sweep_value', 'iteration', 'target', 'mean_sinr_db', 'trials']
    else:
        columns = ['series_value', 'sweep_value', 'iteration', 'mean_mui_energy', 'trials']
    return columns, rows, []


def _rate_summary(campaign: Campaign, records) -> Summary:
    rows = []
    for point, group in group_by_point(records).items():
        rates = [r.sum_rate for r in group]
        rows.append([point.series_value, point.sweep_value, _mean(rates),
                     float(np.median(rates)) if rates else float('nan'),
                     float(np.std(rates)) if rates else float('nan'),
                     _mean([r.chirp_sum_rate for r in group]),
                     _mean([r.status == 'converged' for r in group]), len(group)])
    columns = ['series_value', 'sweep_value', 'mean_sum_rate', 'median_sum_rate', 'std_sum_rate',
               'mean_chirp_sum_rate', 'converged_fraction', 'trials']
    return columns, rows, []


def _mui_summary(campaign: Campaign, records) -> Summary:
    rows = []
    for point, group in group_by_point(records).items():
        rows.append([point.series_value, point.sweep_value, _mean([r.mui_energy for r in group]),
                     _mean([r.sum_rate for r in group]), len(group)])
    return ['series_value', 'sweep_value', 'mean_mui_energy', 'mean_sum_rate', 'trials'], rows, []


def _sinr_summary(campaign: Campaign, records) -> Summary:
    rows = []
    for point, group in group_by_point(records).items():
        if not group:
            continue
        stacked = np.array([r.sinr_db for r in group], dtype=float)
        for q in range(stacked.shape[1]):
            rows.append([point.series_value, point.sweep_value, q + 1, float(np.mean(stacked[:, q])),
                         float(np.min(stacked[:, q])), len(group)])
    return ['series_value', 'sweep_value', 'target', 'mean_sinr_db', 'min_sinr_db', 'trials'], rows, []


def _beampattern_summary(campaign: Campaign, records) -> Summary:
    rows = []
    for point, group in group_by_point(records).items():
        group = [r for r in group if r.beampattern]
        if not group:
            continue
        angles = [a for a, _ in group[0].beampattern]
        # average in linear power
        gains = np.array([[db_to_linear(g) for _, g in r.beampattern] for r in group])
        for angle, gain in zip(angles, gains.mean(axis=0)):
            rows.append([point.series_value, point.sweep_value, angle, linear_to_db(gain), len(group)])
    return ['series_value', 'sweep_value', 'angle_deg', 'gain_db', 'trials'], rows, []


def _ccdf_summary(campaign: Campaign, records) -> Summary:
    rows = []
    for point, group in group_by_point(records).items():
        if not group:
            continue
        for threshold, prob in papr_ccdf([r.papr_db for r in group], campaign.ccdf_thresholds_db):
            rows.append([point.series_value, point.sweep_value, threshold, prob, len(group)])
    return ['series_value', 'sweep_value', 'threshold_db', 'prob', 'trials'], rows, []


def _box_summary(campaign: Campaign, records) -> Summary:
    rows = []
    for point, group in group_by_point(records).items():
        if not group:
            continue
        values = [r.mui_energy for r in group]
        stats = box_stats(values)
        rows.append([point.series_value, point.sweep_value, stats['median'], stats['q1'], stats['q3'],
                     stats['whisker_low'], stats['whisker_high'], _mean(values), len(group)])
    columns = ['series_value', 'sweep_value', 'median', 'q1', 'q3', 'whisker_low', 'whisker_high',
               'mean', 'trials']
    return columns, rows, []


def similarity_breakpoint(epsilons: Sequence[float], similarities: Sequence[float],
                          tol: float = BREAKPOINT_TOL) -> float:
    """
    Smallest epsilon at which the mean similarity departs below the line similarity = epsilon.

    Returns:
        The breakpoint, or nan if the curve never departs
    """
    for eps, sim in sorted(zip(epsilons, similarities)):
        if sim < eps - tol:
            return float(eps)
    return float('nan')


def _similarity_summary(campaign: Campaign, records) -> Summary:
    rows = []
    epsilons, means = [], []
    for point, group in group_by_point(records).items():
        if not group:
            continue
        eps = group[0].epsilon
        sims = [r.similarity for r in group]
        rows.append([point.series_value, point.sweep_value, eps, _mean(sims),
                     _mean([s ** 2 for s in sims]), float(np.max(sims)), len(group)])
        epsilons.append(eps)
        means.append(_mean(sims))
    notes = []
    if campaign.series_parameter is None:
        edge = similarity_breakpoint(epsilons, means)
        if np.isnan(edge):
            notes.append("similarity stays on the line similarity = epsilon over the whole sweep")
        else:
            notes.append(f"similarity departs from the line similarity = epsilon at epsilon = {edge!r} "
                         f"(epsilon^2 = {edge ** 2!r})")
    columns = ['series_value', 'sweep_value', 'epsilon', 'mean_similarity', 'mean_similarity_sq',
               'max_similarity', 'trials']
    return columns, rows, notes


_SUMMARIES = {
    CampaignName.SINR_VS_ITER: lambda c, r: _trace_summary(c, r, 'sinr'),
    CampaignName.MUI_VS_ITER: lambda c, r: _trace_summary(c, r, 'mui'),
    CampaignName.RATE_VS_EPSILON: _rate_summary,
    CampaignName.CONSTELLATION_SCATTER: _mui_summary,
    CampaignName.SINR_VS_EPSILON: _sinr_summary,
    CampaignName.BEAMPATTERN: _beampattern_summary,
    CampaignName.PAPR_CCDF: _ccdf_summary,
    CampaignName.MUI_VS_EPSILON_BOX: _box_summary,
    CampaignName.MUI_VS_ETA: _mui_summary,
    CampaignName.SIMILARITY_REGIONS: _similarity_summary,
}


def summarize(campaign: Campaign, records) -> Summary:
    """
    Aggregate trial records the way the campaign's figure family needs.

    Returns:
        (column names, rows, notes); notes are extra header lines
    """
    return _SUMMARIES[campaign.name](campaign, records)
