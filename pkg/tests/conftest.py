"""
Shared fixtures: tiny experiment configs and a session-wide phantom dataset.

Slow end-to-end tests are skipped unless pytest is given --runslow.
"""

import pytest

from bmdsnet.formats.config_file import parse_config_text
from bmdsnet.services.harness import load_splits

TINY_CONFIG = """\
# tiny desk-scale setup for tests
seed = 0
data.num_samples = 10
data.size = 16
data.crop_size = 8
model.widths = 2,4,4
stage1.epochs = 1
stage1.batch_size = 4
stage1.eval_every = 1
stage2.epochs = 1
stage2.T_infer = 3
eval.scenarios = full,missing:3,noise:0.1
eval.num_seeds = 2
eval.ensemble_size = 2
eval.alpha_values = 0.5
"""


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run slow end-to-end training tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def tiny_cfg():
    """ExperimentConfig small enough to train in well under a second per epoch"""
    return parse_config_text(TINY_CONFIG)


@pytest.fixture
def tiny_config_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY_CONFIG)
    return path


@pytest.fixture(scope="session")
def tiny_data_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("phantoms")


@pytest.fixture(scope="session")
def tiny_splits(tiny_data_dir):
    """8 train / 1 val / 1 test phantoms of edge 16, generated once per session"""
    return load_splits(parse_config_text(TINY_CONFIG), tiny_data_dir)
