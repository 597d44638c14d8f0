"""
DRIP Campaigns Package
Campaign definitions, the Monte-Carlo runner, aggregation and CSV exporters.
"""

from .campaign import Campaign, CampaignError, CampaignName, SweepPoint, load_campaign, parse_campaign
from .runner import CampaignRunner, TrialRecord, run_campaign, run_trial
from .aggregation import summarize, similarity_breakpoint
from .exporters import emit_constellation, export_inner_trace, export_waveform, write_solve_bundle

__all__ = [
    'Campaign',
    'CampaignError',
    'CampaignName',
    'SweepPoint',
    'load_campaign',
    'parse_campaign',
    'CampaignRunner',
    'TrialRecord',
    'run_campaign',
    'run_trial',
    'summarize',
    'similarity_breakpoint',
    'emit_constellation',
    'export_inner_trace',
    'export_waveform',
    'write_solve_bundle',
]
