"""
DRIP Waveform Flask API
HTTP front end for scenario validation, single solves and background
Monte-Carlo campaign runs.
"""

from flask import Flask, request, jsonify
from flask_cors import CORS
from dotenv import load_dotenv
from collections import deque
import dataclasses
import logging
import os
from pathlib import Path
from typing import Dict
import threading

import numpy as np

from bccd import drip_solve
from campaigns import CampaignError, CampaignRunner, load_campaign
from metrics import evaluate_waveform
from scenario import ScenarioConfig, ScenarioError, parse_scenario
from signals import draw_comm_block, lfm_chirp

load_dotenv()

# Oldest UI log entries are dropped beyond this many
MAX_LOG_LINES = int(os.getenv('DRIP_MAX_LOG_LINES', '1000'))

# Global state management (defined before logging handler)
app_state = {
    'campaign_status': 'idle',  # idle, running, completed, failed
    'current_campaign': None,
    'results': {
        'solve': None,
        'campaign': None
    },
    'logs': deque(maxlen=MAX_LOG_LINES)
}

# Thread lock for state management
state_lock = threading.Lock()


# Custom logging handler to capture all logs for UI display
class UILogHandler(logging.Handler):
    """Custom handler that adds log messages to app_state for UI display."""

    # Loggers to exclude from UI (too noisy)
    EXCLUDED_LOGGERS = {
        'werkzeug',  # Flask HTTP server logs
    }

    def emit(self, record):
        try:
            if record.name in self.EXCLUDED_LOGGERS:
                return
            if any(record.name.startswith(excluded + '.') for excluded in self.EXCLUDED_LOGGERS):
                return

            level_map = {
                logging.DEBUG: 'info',
                logging.INFO: 'info',
                logging.WARNING: 'warning',
                logging.ERROR: 'error',
                logging.CRITICAL: 'error'
            }
            level = level_map.get(record.levelno, 'info')

            # Format is: "2024-01-01 12:00:00 - module.name - LEVEL - message"
            message = self.format(record)
            parts = message.split(' - ', 3)
            clean_message = parts[3] if len(parts) >= 4 else message

            with state_lock:
                app_state['logs'].append({
                    'message': clean_message,
                    'level': level,
                    'timestamp': record.created
                })
        except Exception:
            self.handleError(record)


# Configure logging
logging.basicConfig(
    level=getattr(logging, os.environ.get('DRIP_LOG_LEVEL', 'INFO').upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

ui_handler = UILogHandler()
ui_handler.setLevel(logging.INFO)
ui_handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
logging.getLogger().addHandler(ui_handler)

# Initialize Flask app
app = Flask(__name__)
CORS(app)


def add_log(message: str, level: str = 'info'):
    """Add a log entry; the UILogHandler copies it into app_state."""
    if level == 'error':
        logger.error(message)
    elif level == 'warning':
        logger.warning(message)
    else:
        logger.info(message)


def scenario_from_payload(data: Dict) -> ScenarioConfig:
    """
    Build a scenario from a request body.

    Accepts either {"scenario": "<key = value text>"} or {"fields": {...}};
    both go through the file parser so unknown keys are rejected alike.
    """
    if not data:
        raise ScenarioError("Request body must be JSON with 'scenario' or 'fields'")
    if 'scenario' in data:
        return parse_scenario(str(data['scenario']), '<request>')
    if 'fields' in data and isinstance(data['fields'], dict):
        lines = []
        for key, value in data['fields'].items():
            if isinstance(value, (list, tuple)):
                value = ', '.join(str(v) for v in value)
            elif isinstance(value, bool):
                value = 'true' if value else 'false'
            lines.append(f"{key} = {value}")
        return parse_scenario('\n'.join(lines), '<request>')
    raise ScenarioError("Request body must contain 'scenario' text or a 'fields' object")


def _complex_list(values) -> Dict[str, list]:
    values = np.ravel(values)
    return {'re': [float(v) for v in values.real], 'im': [float(v) for v in values.imag]}


@app.route('/api/scenario/validate', methods=['POST'])
def validate_scenario():
    """
    Validate a scenario.

    Expected JSON body:
    {
        "scenario": "n_tx = 4\\nn_samples = 4\\n..."
    }
    or {"fields": {"n_tx": 4, "target_angles": [10, 30], ...}}
    """
    try:
        cfg = scenario_from_payload(request.get_json(silent=True))
    except ScenarioError as e:
        return jsonify({
            'success': False,
            'error': str(e)
        }), 400

    return jsonify({
        'success': True,
        'n_vars': cfg.n_vars,
        'n_constraints': cfg.n_constraints,
        'scenario': cfg.to_dict()
    })


@app.route('/api/solve', methods=['POST'])
def solve():
    """Solve one draw of a scenario synchronously."""
    data = request.get_json(silent=True) or {}
    try:
        cfg = scenario_from_payload(data)
        if 'seed' in data:
            cfg = cfg.with_overrides(rng_seed=int(data['seed']))
    except (ScenarioError, ValueError, TypeError) as e:
        return jsonify({
            'success': False,
            'error': str(e)
        }), 400

    try:
        add_log(f"Solving scenario: N_T={cfg.n_tx}, L={cfg.n_samples}, Q={cfg.n_targets}, seed={cfg.rng_seed}")
        comm = draw_comm_block(cfg, np.random.default_rng(cfg.rng_seed))
        x0 = lfm_chirp(cfg)
        result = drip_solve(cfg, comm, x0)
        report = evaluate_waveform(result.waveform.vector_form, result.beamformers, comm,
                                   x0.vector_form, cfg, result.feasibility)
        payload = {
            'result': result.summary(),
            'metrics': report.to_dict(),
            'objective_trace': result.objective_trace,
            'sinr_trace': result.sinr_trace,
            'mui_trace': result.mui_trace,
            'waveform': _complex_list(result.waveform.vector_form),
        }
        with state_lock:
            app_state['results']['solve'] = payload
        add_log(f"Solve finished with status {result.status}")
        return jsonify({'success': True, **payload})

    except Exception as e:
        logger.error(f"Solve failed: {e}", exc_info=True)
        return jsonify({
            'success': False,
            'error': str(e)
        }), 500


@app.route('/api/campaign/start', methods=['POST'])
def start_campaign():
    """
    Start a campaign on a background thread.

    Expected JSON body:
    {
        "campaign": "scenarios/campaigns/papr_ccdf.cfg",
        "out_dir": "results/papr_ccdf",
        "trials": 20,      (optional)
        "seed": 0,         (optional)
        "threads": 4       (optional)
    }
    """
    data = request.get_json(silent=True) or {}
    if 'campaign' not in data or 'out_dir' not in data:
        return jsonify({
            'success': False,
            'error': "Missing required fields 'campaign' and 'out_dir'"
        }), 400

    try:
        campaign = load_campaign(data['campaign'])
        changes = {}
        if 'trials' in data:
            changes['trials'] = int(data['trials'])
        if 'seed' in data:
            changes['base_scenario'] = campaign.base_scenario.with_overrides(rng_seed=int(data['seed']))
        if changes:
            campaign = dataclasses.replace(campaign, **changes)
        threads = int(data['threads']) if 'threads' in data else None
    except (CampaignError, ScenarioError, ValueError, TypeError, OSError) as e:
        return jsonify({
            'success': False,
            'error': str(e)
        }), 400

    with state_lock:
        if app_state['campaign_status'] == 'running':
            busy = True
        else:
            busy = False
            app_state['campaign_status'] = 'running'
            app_state['current_campaign'] = campaign.describe()
            app_state['results']['campaign'] = None
            app_state['logs'] = deque(maxlen=MAX_LOG_LINES)

    if busy:
        return jsonify({
            'success': False,
            'error': 'Campaign already running'
        }), 400

    thread = threading.Thread(target=run_campaign_job, args=(campaign, Path(data['out_dir']), threads))
    thread.daemon = True
    thread.start()

    return jsonify({
        'success': True,
        'message': f"Campaign {campaign.name.value} started"
    })


def run_campaign_job(campaign, out_dir: Path, threads=None):
    """Run a campaign and store its result in app_state."""
    try:
        result = CampaignRunner(campaign, out_dir, threads=threads).run()
        with state_lock:
            app_state['results']['campaign'] = result
            app_state['campaign_status'] = 'completed'
        add_log(f"Campaign {campaign.name.value} completed: {result['status']}")

    except Exception as e:
        logger.error(f"Campaign failed: {e}")
        with state_lock:
            app_state['campaign_status'] = 'failed'
            app_state['results']['campaign'] = {'status': 'failed', 'error': str(e)}


@app.route('/api/campaign/status', methods=['GET'])
def get_status():
    """Get the current campaign status."""
    with state_lock:
        return jsonify({
            'campaign_status': app_state['campaign_status'],
            'current_campaign': app_state['current_campaign']
        })


@app.route('/api/logs', methods=['GET'])
def get_logs():
    """Get captured logs."""
    with state_lock:
        return jsonify({
            'logs': list(app_state['logs'])
        })


@app.route('/api/reports/<kind>', methods=['GET'])
def get_report(kind):
    """Get the latest solve or campaign report."""
    if kind not in ['solve', 'campaign']:
        return jsonify({
            'success': False,
            'error': 'Invalid report name'
        }), 400

    with state_lock:
        result = app_state['results'].get(kind)

    if result is None:
        return jsonify({
            'success': False,
            'error': f'No {kind} results available'
        }), 404

    return jsonify({
        'success': True,
        'report': kind,
        'results': result
    })


@app.route('/api/reports', methods=['GET'])
def get_all_reports():
    """Get all reports."""
    with state_lock:
        return jsonify({
            'success': True,
            'results': dict(app_state['results'])
        })


@app.route('/api/reset', methods=['POST'])
def reset_state():
    """Reset results and logs (refused while a campaign runs)."""
    with state_lock:
        running = app_state['campaign_status'] == 'running'
        if not running:
            app_state['campaign_status'] = 'idle'
            app_state['current_campaign'] = None
            app_state['results'] = {'solve': None, 'campaign': None}
            app_state['logs'] = deque(maxlen=MAX_LOG_LINES)

    if running:
        return jsonify({
            'success': False,
            'error': 'Cannot reset while a campaign is running'
        }), 400

    add_log("State reset")
    return jsonify({
        'success': True,
        'message': 'State reset successfully'
    })


@app.route('/api/health', methods=['GET'])
def health_check():
    """Health check endpoint."""
    with state_lock:
        status = app_state['campaign_status']
    return jsonify({
        'status': 'healthy',
        'campaign_status': status
    })


if __name__ == '__main__':
    port = int(os.environ.get('PORT', 8000))
    debug = os.environ.get('DEBUG', 'False').lower() == 'true'

    logger.info(f"Starting DRIP waveform API on port {port}")
    app.run(host='0.0.0.0', port=port, debug=debug)
