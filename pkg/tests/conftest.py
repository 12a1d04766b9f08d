import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from gridres.cli import _data_path  # noqa: E402
from gridres.env import EnvConfig, GridEnv  # noqa: E402
from gridres.feeder import parse_feeder, parse_scenario  # noqa: E402

MINIMAL_FEEDER = """
node 150 source 0
node 2 load 100
branch 1 150 2
source_rating 500
"""

# A source, a DER island behind a normally closed sectionalizer, and two
# critical loads; small enough that every metric is hand-checkable.
TOY_FEEDER = """
node 150 source 0
node 1 junction 0
node 2 load 120 critical
node 3 load 80
node 4 load 150 critical
node 5 load 30
branch 1 150 1
branch 2 1 2
branch 3 1 3
branch 4 3 4 switch 0 nc
branch 5 4 5
branch 6 2 4 switch 1 no
der 5 400 0 400 -50 50
source_rating 1000
"""


@pytest.fixture(scope="session")
def default_net():
    return parse_feeder(Path(_data_path("default_feeder.txt")).read_text())


@pytest.fixture(scope="session")
def scenario_library(default_net):
    scen_dir = Path(_data_path("scenarios"))
    return [parse_scenario(p.read_text(), default_net) for p in sorted(scen_dir.glob("*.txt"))]


@pytest.fixture(scope="session")
def default_env(default_net, scenario_library):
    return GridEnv(default_net, scenario_library, EnvConfig())


@pytest.fixture(scope="session")
def toy_net():
    return parse_feeder(TOY_FEEDER)


@pytest.fixture()
def toy_env(toy_net):
    cfg = EnvConfig(episode_length=8, budget=400.0, calibration_samples=4, percolation_trials=50)
    return GridEnv(toy_net, (), cfg)
