"""
Tests for the Flask API.
"""

from collections import deque
import dataclasses
import logging
from unittest.mock import patch

import pytest

import app as drip_app
from campaigns import load_campaign
from conftest import SCENARIO_DIR

TINY_TEXT = (SCENARIO_DIR / 'tiny.cfg').read_text()
TINY_SMOKE = SCENARIO_DIR / 'campaigns' / 'tiny_smoke.cfg'


@pytest.fixture
def client():
    with drip_app.state_lock:
        drip_app.app_state.update({
            'campaign_status': 'idle',
            'current_campaign': None,
            'results': {'solve': None, 'campaign': None},
            'logs': deque(maxlen=drip_app.MAX_LOG_LINES),
        })
    drip_app.app.config['TESTING'] = True
    with drip_app.app.test_client() as test_client:
        yield test_client


class TestScenarioEndpoints:
    """Tests for /api/scenario/validate and /api/solve."""

    def test_health(self, client):
        """Test the health check."""
        response = client.get('/api/health')
        assert response.status_code == 200
        assert response.get_json() == {'status': 'healthy', 'campaign_status': 'idle'}

    def test_validate_fields(self, client):
        """Test a scenario given as a JSON object."""
        response = client.post('/api/scenario/validate', json={
            'fields': {'n_tx': 2, 'n_samples': 2, 'n_users': 1, 'target_angles': [20]}})
        body = response.get_json()
        assert response.status_code == 200
        assert body['n_vars'] == 4
        assert body['n_constraints'] == 8
        assert body['scenario']['target_angles'] == [20.0]

    def test_validate_text(self, client):
        """Test a scenario given in the file format."""
        response = client.post('/api/scenario/validate', json={'scenario': TINY_TEXT})
        assert response.status_code == 200
        assert response.get_json()['scenario']['eta_db'] == 6.0

    @pytest.mark.parametrize('payload,message', [
        ({'fields': {'n_tx': 1, 'n_samples': 2, 'n_users': 2, 'target_angles': [20]}}, 'n_users'),
        ({'fields': {'n_tx': 2, 'n_samples': 2, 'n_users': 1, 'target_angles': [20], 'gain': 3}}, 'gain'),
        ({'other': 1}, 'scenario'),
        (None, 'JSON'),
    ])
    def test_validate_rejects(self, client, payload, message):
        """Test invalid scenarios return 400 with the reason."""
        response = client.post('/api/scenario/validate', json=payload)
        assert response.status_code == 400
        assert message in response.get_json()['error']

    def test_solve_tiny(self, client):
        """Test a synchronous solve and the stored report."""
        response = client.post('/api/solve', json={'scenario': TINY_TEXT, 'seed': 3})
        body = response.get_json()
        assert response.status_code == 200
        assert body['success'] is True
        assert len(body['waveform']['re']) == 4
        assert len(body['mui_trace']) == body['result']['iterations']
        report = client.get('/api/reports/solve').get_json()
        assert report['results']['result'] == body['result']

    def test_solve_bad_seed(self, client):
        """Test a seed that is not an integer."""
        response = client.post('/api/solve', json={'scenario': TINY_TEXT, 'seed': 'abc'})
        assert response.status_code == 400


class TestCampaignEndpoints:
    """Tests for the background campaign endpoints."""

    @patch('app.threading.Thread')
    def test_start_and_busy(self, mock_thread, client, tmp_path):
        """Test a started campaign blocks a second start and a reset."""
        payload = {'campaign': str(TINY_SMOKE), 'out_dir': str(tmp_path), 'trials': 1}
        response = client.post('/api/campaign/start', json=payload)
        assert response.status_code == 200
        mock_thread.return_value.start.assert_called_once()

        status = client.get('/api/campaign/status').get_json()
        assert status['campaign_status'] == 'running'
        assert status['current_campaign']['trials'] == 1

        busy = client.post('/api/campaign/start', json=payload)
        assert busy.status_code == 400
        assert 'already running' in busy.get_json()['error']
        assert client.post('/api/reset').status_code == 400

    @pytest.mark.parametrize('payload', [
        {'campaign': str(TINY_SMOKE)},
        {'campaign': 'no/such/campaign.cfg', 'out_dir': 'out'},
        {'campaign': str(TINY_SMOKE), 'out_dir': 'out', 'trials': 0},
    ])
    def test_start_rejects(self, client, payload):
        """Test missing fields, unreadable files and invalid overrides."""
        response = client.post('/api/campaign/start', json=payload)
        assert response.status_code == 400
        assert client.get('/api/campaign/status').get_json()['campaign_status'] == 'idle'

    def test_campaign_job_stores_result(self, client, tmp_path, caplog):
        """Test the background job body on a one-trial smoke campaign."""
        campaign = dataclasses.replace(load_campaign(TINY_SMOKE), trials=1)
        with caplog.at_level(logging.INFO):
            drip_app.run_campaign_job(campaign, tmp_path, threads=1)
        assert drip_app.app_state['campaign_status'] == 'completed'
        report = client.get('/api/reports/campaign').get_json()
        assert report['results']['statistics']['completed'] == 2
        assert any('CAMPAIGN rate_vs_epsilon' in entry['message']
                   for entry in client.get('/api/logs').get_json()['logs'])

    @patch('app.CampaignRunner')
    def test_campaign_job_failure(self, mock_runner, client, tmp_path):
        """Test an exception inside the job marks the campaign failed."""
        mock_runner.return_value.run.side_effect = RuntimeError('disk full')
        drip_app.run_campaign_job(load_campaign(TINY_SMOKE), tmp_path)
        assert drip_app.app_state['campaign_status'] == 'failed'
        assert drip_app.app_state['results']['campaign'] == {'status': 'failed', 'error': 'disk full'}


class TestReports:
    """Tests for /api/reports and /api/reset."""

    def test_invalid_kind(self, client):
        assert client.get('/api/reports/beampattern').status_code == 400

    def test_missing_report(self, client):
        assert client.get('/api/reports/campaign').status_code == 404

    def test_reset_when_idle(self, client):
        """Test reset clears stored results."""
        drip_app.app_state['results']['solve'] = {'result': {}}
        assert client.post('/api/reset').status_code == 200
        assert client.get('/api/reports').get_json()['results'] == {'solve': None, 'campaign': None}


class TestLogs:
    """Tests for the captured UI log."""

    def test_oldest_entries_are_dropped(self, client):
        """Test the log keeps only the newest MAX_LOG_LINES entries."""
        handler = drip_app.UILogHandler()
        handler.setFormatter(logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s'))
        for n in range(drip_app.MAX_LOG_LINES + 5):
            handler.emit(logging.makeLogRecord({'name': 'bccd', 'levelno': logging.INFO, 'levelname': 'INFO',
                                                     'msg': f"line {n}"}))
        logs = client.get('/api/logs').get_json()['logs']
        assert len(logs) == drip_app.MAX_LOG_LINES
        assert logs[0]['message'] == 'line 5'
        assert logs[-1]['message'] == f"line {drip_app.MAX_LOG_LINES + 4}"

    def test_reset_keeps_the_cap(self, client):
        """Test reset installs a fresh capped log."""
        assert client.post('/api/reset').status_code == 200
        assert drip_app.app_state['logs'].maxlen == drip_app.MAX_LOG_LINES
