"""Bundled data files stay loadable and self-consistent."""

from pathlib import Path

import numpy as np
import pytest

from gridres.cli import _data_path
from gridres.metrics import DEFAULT_WEIGHTS, ahp_weights, load_pairwise_matrix


def test_example_pairwise_matrix_reproduces_default_weights():
    text = Path(_data_path("ahp_pairwise_example.txt")).read_text()
    weights = ahp_weights(load_pairwise_matrix(text))
    assert np.allclose(weights.w, DEFAULT_WEIGHTS.w, atol=1e-12)
    assert weights.consistency_ratio <= 1e-9


def test_scenarios_cover_the_published_contingencies(scenario_library):
    names = {s.name for s in scenario_library}
    assert names == {"flood", "wildfire", "hurricane", "short_circuit"}
    for scenario in scenario_library:
        assert scenario.disabled_nodes or scenario.disabled_branches


def test_severe_scenarios_require_deep_configurations(default_env):
    """Full critical-load coverage under the severe scenarios needs the
    4-unit configurations; the short circuit is switch-recoverable."""
    eng = default_env.engine
    by_name = {s.name: s for s in default_env.scenarios}
    for name in ("flood", "wildfire", "hurricane"):
        sw = (1,) * 10
        best_low = max(eng.score(sw, by_name[name], c)["rho"] for c in range(3))
        deep = eng.score(sw, by_name[name], 4)["rho"]
        assert deep > best_low + 0.1
    sw = (1,) * 10
    assert eng.score(sw, by_name["short_circuit"], 0)["rho"] > 0.6
