import sys
from pathlib import Path

import pytest

# tailbench.py lives at the repository root
ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from tailbandits.env import BanditInstance, LinearInstance, NoiseModel, basis_actions


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: statistical checks with many replications")


@pytest.fixture
def two_arm():
    return BanditInstance((0.6, 0.4), NoiseModel("gaussian", 0.3))


@pytest.fixture
def noiseless_two_arm():
    return BanditInstance((0.9, 0.4), NoiseModel("gaussian", 0.0))


@pytest.fixture
def rademacher_two_arm():
    return BanditInstance((0.6, 0.4), NoiseModel("rademacher", 0.3))


@pytest.fixture
def basis_two():
    return LinearInstance((0.5, 0.3), basis_actions(2), NoiseModel("gaussian", 0.5))


@pytest.fixture
def minimal_plan_text():
    return """
name: minimal
seed: 3
horizons: [50]
instances:
  - means: [0.6, 0.4]
policies:
  - kind: ucb
    bonus: {variant: tail_anytime}
"""
