"""
Shared pytest fixtures and the --runslow switch.
"""

from pathlib import Path

import numpy as np
import pytest

from qcqp_assembly import QcqpProblem, phi_vec
from scenario import ScenarioConfig

REPO_ROOT = Path(__file__).parent
SCENARIO_DIR = REPO_ROOT / 'scenarios'


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run desk-scale reproduction tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: desk-scale reproduction check (needs --runslow)')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='needs --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_cfg():
    """N_T=2, N_R=2, L=2, one user, one target, no interferers; loose floors."""
    return ScenarioConfig(
        n_tx=2, n_rx=2, n_samples=2, n_users=1, target_angles=(20.0,),
        epsilon=0.5, eta_db=6.0, sinr_floors_db=(-30.0,), outer_iters=4,
    )


@pytest.fixture
def small_cfg():
    """N_T=3, N_R=2, L=2 with two targets and one interferer."""
    return ScenarioConfig(
        n_tx=3, n_rx=2, n_samples=2, n_users=2, target_angles=(10.0, 40.0),
        interferer_angles=(-30.0,), target_powers=(1.0, 0.5), interferer_powers=(2.0,),
        epsilon=0.5, eta_db=6.0, sinr_floors_db=(0.0, 0.0),
    )


@pytest.fixture
def reference_cfg():
    """Desk-scale scene: 12 Tx, 7 Rx, 7 samples, 4 users, targets at 10 and 30 degrees."""
    return ScenarioConfig(
        n_tx=12, n_rx=7, n_samples=7, n_users=4, target_angles=(10.0, 30.0),
        interferer_angles=(-20.0,), eta_db=2.5, sinr_floors_db=(20.0, 20.0), epsilon=1.0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_unit(rng, n):
    """Random complex vector of unit norm."""
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return x / np.linalg.norm(x)


def norm_ball_problem(x_comm, x0, epsilon, papr_rhs=10.0):
    """Unit-norm, similarity and loose per-sample constraints, no SINR rows."""
    n = x_comm.size
    identity = np.eye(2 * n)
    zeros = np.zeros(2 * n)
    return QcqpProblem(
        P0=identity,
        q0=-2.0 * phi_vec(x_comm),
        objective_constant=float(np.vdot(x_comm, x_comm).real),
        dense_P=np.stack([identity, -identity, identity]),
        dense_q=np.stack([zeros, zeros, -2.0 * phi_vec(x0)]),
        dense_r=np.array([1.0, -1.0, epsilon ** 2 - float(np.vdot(x0, x0).real)]),
        papr_rhs=papr_rhs,
        n_complex=n,
        n_targets=0,
    )
