"""
Test configuration for tdi-sense
"""
import json
import math

import numpy as np
import pytest

from config import TestingConfig
from tdisense import create_app
from tdisense.model import PhysicalParams


@pytest.fixture(scope='session')
def app():
    """Create application for testing."""
    app = create_app(TestingConfig)
    app.config['TESTING'] = True

    with app.app_context():
        yield app


@pytest.fixture(scope='function')
def client(app):
    """Create test client."""
    return app.test_client()


@pytest.fixture(scope='function')
def runner(app):
    """Create CLI runner."""
    return app.test_cli_runner()


@pytest.fixture
def swap_params():
    """omega = 1/300, g = 10, T = 80 pi"""
    return PhysicalParams(1 / 300, 10.0, 80 * math.pi)


@pytest.fixture
def cnot_params():
    """omega = 0.01, g = 10, T = 80 pi"""
    return PhysicalParams(0.01, 10.0, 80 * math.pi)


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(20240917)


@pytest.fixture
def config_file(tmp_path):
    """Write an experiment configuration and return its path."""
    def write(**overrides):
        data = {
            'omega': 1 / 300,
            'g': 10.0,
            'T': 80 * math.pi,
            'shots': 10000,
            'repetitions': 20,
            'epsilons': [1e-4, 1e-3],
            'strategies': ['fe_swap', 'ce_swap', 'if'],
            'mode': 'exact',
            'seed': 7,
            'out_dir': str(tmp_path / 'results'),
        }
        data.update(overrides)
        path = tmp_path / 'experiment.json'
        path.write_text(json.dumps(data))
        return str(path)
    return write
