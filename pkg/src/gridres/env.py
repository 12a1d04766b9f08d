"""Episodic feeder-switching environment.

Each step the controller picks a configuration c in 0..5 (how many DER
units run), a 10-bit switch vector, and a binary grid preference.  Weather
follows a two-state Markov chain; entering the calamity state draws a
scenario that knocks out part of the network.  The reward trades the
composite resilience of the realized topology against the configuration
and switching cost:

    normal:    R = a1 * rho - a2 * cost + beta_efficiency
    calamity:  R = a3 * rho - a4 * cost + beta_resilience(rho) + beta_adaptation

with the tiered bonus +150 / +100 / +50 above resilience 0.8 / 0.7 / 0.6
and -100 at or below 0.6.  Raw rewards are normalized by online running
statistics before the agents see them.

The observation is a fixed 20-vector:

    [ w | s1..s10 | budget | progress | R_c  pv  n_cls  a_ros | eff  fault  last_cost ]
      1     10        1         1               4                      3
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .economics import DEFAULT_PARAMETERS
from .feeder import EMPTY_SCENARIO, GridNetwork, Scenario, Subgraph, effective_topology
from .metrics import (
    DEFAULT_WEIGHTS,
    AhpWeights,
    MetricVector,
    classify_paths,
    cls_ratio,
    composite_score,
    dg_feasible,
    enumerate_supply_paths,
    high_centrality_count,
    path_variability,
    rating_of_service,
    resilience_score,
)
from .percolation import percolation_threshold

WEATHER_NORMAL = 0
WEATHER_CALAMITY = 1

OBSERVATION_DIM = 20
N_CONFIGS = 6
N_SWITCHES = 10


class EnvError(ValueError):
    """Bad environment configuration or action."""


@dataclass(frozen=True)
class Weather:
    value: int = WEATHER_NORMAL
    active_scenario: Scenario | None = None
    fault_duration: int = 0

    def __post_init__(self):
        if self.value not in (WEATHER_NORMAL, WEATHER_CALAMITY):
            raise EnvError(f"weather value must be 0 or 1, got {self.value}")
        if self.value == WEATHER_NORMAL and self.fault_duration != 0:
            raise EnvError("fault duration must be 0 in normal weather")

    @property
    def label(self) -> str:
        return "calamity" if self.value == WEATHER_CALAMITY else "normal"


@dataclass(frozen=True)
class EnvConfig:
    episode_length: int = 100
    budget: float = 5_000.0
    p_enter: float = 0.10
    p_exit: float = 0.30
    alpha1: float = 100.0
    alpha2: float = 1.0
    alpha3: float = 200.0
    alpha4: float = 0.5
    beta_efficiency: float = 10.0
    efficiency_cost_fraction: float = 0.01  # bonus when cost <= this share of budget
    beta_adaptation: float = 20.0
    adaptation_window: int = 2
    toggle_cost: float = DEFAULT_PARAMETERS.c_maint
    config_base_cost: tuple[float, ...] = DEFAULT_PARAMETERS.config_base_cost
    config_n_der: tuple[int, ...] = DEFAULT_PARAMETERS.config_n_der
    mu_maint: tuple[float, ...] = DEFAULT_PARAMETERS.mu_maint
    weights: AhpWeights = DEFAULT_WEIGHTS
    percolation_trials: int = 200
    percolation_step: float = 0.02
    metric_seed: int = 12345
    calibration_samples: int = 12
    scenario_dir: str = ""
    weights_file: str = ""

    def __post_init__(self):
        if self.episode_length < 1:
            raise EnvError("episode length must be at least 1")
        if self.budget <= 0:
            raise EnvError("budget must be positive")
        for name in ("p_enter", "p_exit"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise EnvError(f"{name} must lie in [0, 1], got {p}")

    @classmethod
    def from_file(cls, text: str) -> "EnvConfig":
        overrides = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise EnvError(f"line {lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in ("scenario_dir", "weights_file"):
                overrides[key] = value
            elif key in (
                "episode_length",
                "adaptation_window",
                "percolation_trials",
                "metric_seed",
                "calibration_samples",
            ):
                overrides[key] = int(value)
            elif key in (
                "budget",
                "p_enter",
                "p_exit",
                "alpha1",
                "alpha2",
                "alpha3",
                "alpha4",
                "beta_efficiency",
                "efficiency_cost_fraction",
                "beta_adaptation",
                "toggle_cost",
                "percolation_step",
            ):
                overrides[key] = float(value)
            else:
                raise EnvError(f"line {lineno}: unknown setting {key!r}")
        return cls(**overrides)


@dataclass(frozen=True, eq=False)
class EnvState:
    observation: np.ndarray  # exactly OBSERVATION_DIM entries
    step_index: int
    budget_remaining: float
    weather: Weather
    config: int
    switches: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class StepOutcome:
    next_state: EnvState
    reward: float
    normalized_reward: float
    done: bool
    info: dict


def resilience_bonus(rho: float) -> float:
    """Tiered calamity bonus; the bottom tier is a penalty."""
    if rho > 0.8:
        return 150.0
    if rho > 0.7:
        return 100.0
    if rho > 0.6:
        return 50.0
    return -100.0


def reward_normal(rho: float, step_cost: float, cfg: EnvConfig = EnvConfig()) -> float:
    bonus = cfg.beta_efficiency if step_cost <= cfg.efficiency_cost_fraction * cfg.budget else 0.0
    return cfg.alpha1 * rho - cfg.alpha2 * step_cost + bonus


def reward_calamity(
    rho: float, step_cost: float, adapted: bool, cfg: EnvConfig = EnvConfig()
) -> float:
    extra = cfg.beta_adaptation if adapted else 0.0
    return cfg.alpha3 * rho - cfg.alpha4 * step_cost + resilience_bonus(rho) + extra


def step_cost(config: int, toggles: int, cfg: EnvConfig = EnvConfig()) -> float:
    """Configuration base cost plus per-toggle maintenance."""
    return cfg.config_base_cost[config] + cfg.toggle_cost * toggles * cfg.mu_maint[config]


def weather_transition(current: Weather, rng, cfg: EnvConfig, scenario_library=()) -> Weather:
    """One step of the two-state weather chain.  Entering calamity draws a
    scenario uniformly from the library; the fault clock runs while the
    calamity persists."""
    if current.value == WEATHER_NORMAL:
        if rng.random() < cfg.p_enter:
            if scenario_library:
                scenario = scenario_library[int(rng.integers(len(scenario_library)))]
            else:
                scenario = EMPTY_SCENARIO
            return Weather(WEATHER_CALAMITY, scenario, 1)
        return Weather(WEATHER_NORMAL, None, 0)
    if rng.random() < cfg.p_exit:
        return Weather(WEATHER_NORMAL, None, 0)
    return Weather(WEATHER_CALAMITY, current.active_scenario, current.fault_duration + 1)


class RunningNorm:
    """Online mean/std (population) used to normalize the reward stream."""

    EPS = 1e-8

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    @property
    def std(self) -> float:
        if self.count == 0:
            return 0.0
        return float(np.sqrt(self.m2 / self.count))

    def normalize(self, x: float) -> float:
        return (x - self.mean) / max(self.std, self.EPS)

    def state(self) -> dict:
        return {"count": self.count, "mean": self.mean, "m2": self.m2}

    def restore(self, state: dict) -> None:
        self.count = int(state["count"])
        self.mean = float(state["mean"])
        self.m2 = float(state["m2"])


def _topology_key(switches, scenario: Scenario) -> tuple:
    return (
        tuple(switches),
        scenario.name,
        tuple(sorted(scenario.disabled_nodes)),
        tuple(sorted(scenario.disabled_branches)),
    )


def _stable_seed(metric_seed: int, key: tuple) -> np.random.SeedSequence:
    digest = hashlib.sha256(repr(key).encode()).digest()
    words = np.frombuffer(digest[:16], dtype=np.uint32)
    return np.random.SeedSequence([metric_seed, *map(int, words)])


class ResilienceEngine:
    """Scores topologies, caching the expensive structure-only metrics.

    The percolation threshold and high-centrality count depend only on the
    energized graph, so they are cached per (switch vector, scenario).  The
    per-configuration service metrics reuse cached reachability sets.  The
    percolation seed is derived from the topology key, which makes every
    cached value independent of visit order.
    """

    def __init__(self, net: GridNetwork, cfg: EnvConfig, scenario_library=()):
        self.net = net
        self.cfg = cfg
        self.scenarios = tuple(scenario_library)
        self.p_grid = tuple(np.round(np.arange(0.0, 1.0 + 1e-12, cfg.percolation_step), 10))
        self._topo: dict[tuple, dict] = {}
        self._vectors: dict[tuple, MetricVector] = {}
        self._lo, self._hi = self._calibrate()

    # -- structure-level ---------------------------------------------------

    def topology_stats(self, switches, scenario: Scenario) -> dict:
        key = _topology_key(switches, scenario)
        cached = self._topo.get(key)
        if cached is not None:
            return cached
        sub = effective_topology(self.net, switches, scenario)
        if len(sub.nodes) == 0:
            p_m, n_hc = 0.0, 0
        else:
            seed = _stable_seed(self.cfg.metric_seed, key)
            p_m = percolation_threshold(sub, self.p_grid, self.cfg.percolation_trials, seed)
            n_hc = high_centrality_count(sub)
        reach = {}
        for node in (self.net.source_node, *(d.node for d in self.net.ders)):
            reach[node] = sub.reachable_from(node)
        stats = {"key": key, "sub": sub, "p_m": p_m, "n_hc": n_hc, "reach": reach}
        self._topo[key] = stats
        return stats

    # -- configuration-level -----------------------------------------------

    def raw_vector(self, switches, scenario: Scenario, config: int) -> MetricVector:
        stats = self.topology_stats(switches, scenario)
        vkey = (stats["key"], config)
        cached = self._vectors.get(vkey)
        if cached is not None:
            return cached
        vec = self._compute_vector(stats, config)
        self._vectors[vkey] = vec
        return vec

    def _active_der_nodes(self, config: int) -> tuple[int, ...]:
        return tuple(d.node for d in self.net.ders[: self.cfg.config_n_der[config]])

    def _dispatch(self, active_nodes) -> dict:
        dispatch = {}
        for d in self.net.ders:
            if d.node in active_nodes:
                q = 0.0 if d.q_min <= 0.0 <= d.q_max else d.q_min
                dispatch[d.node] = (d.p_max, q)
        return dispatch

    def _compute_vector(self, stats: dict, config: int) -> MetricVector:
        net = self.net
        sub: Subgraph = stats["sub"]
        active = self._active_der_nodes(config)
        sources = [net.source_node, *active]
        reached: set[int] = set()
        for node in sources:
            reached |= stats["reach"].get(node, frozenset())
        served_total = sum(
            net.node_by_id[nid].demand for nid in reached if net.node_by_id[nid].kind == "load"
        )
        feasible = dg_feasible(net, self._dispatch(active), served_total)

        criticals = net.critical_nodes
        pv = path_variability(classify_paths(sub, net, active))
        if criticals:
            served_crit = [c for c in criticals if c in reached] if feasible else []
            p_cl = sum(net.node_by_id[c].demand for c in served_crit)
            n_cls = cls_ratio(p_cl, net.total_critical_demand)
            paths = enumerate_supply_paths(sub, net, active)
            if paths and feasible:
                a_ros = (len(served_crit) / len(criticals)) * (
                    rating_of_service(paths) / len(paths)
                )
            else:
                a_ros = 0.0
        else:
            n_cls = 1.0
            a_ros = 0.0
        return MetricVector(pv, n_cls, a_ros, stats["p_m"], stats["n_hc"])

    # -- scoring -----------------------------------------------------------

    def normalize(self, raw: MetricVector) -> np.ndarray:
        x = raw.as_array()
        span = self._hi - self._lo
        out = np.full(5, 0.5)
        nz = span > 0
        out[nz] = np.clip((x[nz] - self._lo[nz]) / span[nz], 0.0, 1.0)
        return out

    def score(self, switches, scenario: Scenario, config: int) -> dict:
        """Resilience of the realized configuration plus the composite over
        all six candidate configurations on the same topology."""
        normalized = [
            self.normalize(self.raw_vector(switches, scenario, c)) for c in range(N_CONFIGS)
        ]
        scores = [resilience_score(v, self.cfg.weights) for v in normalized]
        return {
            "rho": scores[config],
            "composite": composite_score(scores),
            "normalized": normalized[config],
            "scores": scores,
        }

    def _calibrate(self) -> tuple[np.ndarray, np.ndarray]:
        """Fixed per-component normalization bounds, sampled over reference
        switch vectors, all scenarios, and all configurations."""
        rng = np.random.default_rng(self.cfg.metric_seed)
        switch_sets = {self.net.normal_switch_state, (1,) * N_SWITCHES, (0,) * N_SWITCHES}
        for _ in range(self.cfg.calibration_samples):
            switch_sets.add(tuple(int(b) for b in rng.integers(0, 2, N_SWITCHES)))
        self._lo = np.zeros(5)
        self._hi = np.ones(5)  # placeholder so raw_vector can run
        mat = []
        for scenario in (EMPTY_SCENARIO, *self.scenarios):
            for switches in sorted(switch_sets):
                for config in range(N_CONFIGS):
                    mat.append(self.raw_vector(switches, scenario, config).as_array())
        mat = np.array(mat)
        return mat.min(axis=0), mat.max(axis=0)


class GridEnv:
    """Owns one rollout at a time; reward-normalization statistics persist
    across episodes.  Instances are single-threaded; share the immutable
    GridNetwork across instances for parallel rollouts."""

    def __init__(self, net: GridNetwork, scenarios=(), cfg: EnvConfig = EnvConfig()):
        for scenario in scenarios:
            scenario.validate(net)
        self.net = net
        self.cfg = cfg
        self.scenarios = tuple(scenarios)
        self.engine = ResilienceEngine(net, cfg, self.scenarios)
        self.reward_norm = RunningNorm()
        self._fixed_closed = sum(
            1 for b in net.branches if b.has_switch and b.switch_index is None and b.normally_closed
        )
        self._rng = np.random.default_rng()
        self._state: EnvState | None = None
        self._forced: Weather | None = None
        self._done = True
        self._cum_rho = 0.0
        self._cum_cost = 0.0
        self._last_cost = 0.0
        self._onset_step: int | None = None
        self._onset_config = 0

    # -- helpers -----------------------------------------------------------

    def closed_switch_count(self, switches) -> int:
        return int(sum(switches)) + self._fixed_closed

    def _scenario_for(self, weather: Weather) -> Scenario:
        if weather.value == WEATHER_CALAMITY and weather.active_scenario is not None:
            return weather.active_scenario
        return EMPTY_SCENARIO

    def _observe(self, weather: Weather, switches, config: int, budget: float, step_idx: int) -> EnvState:
        scored = self.engine.score(switches, self._scenario_for(weather), config)
        obs = np.empty(OBSERVATION_DIM)
        obs[0] = float(weather.value)
        obs[1:11] = switches
        obs[11] = min(1.0, max(0.0, budget / self.cfg.budget))
        obs[12] = step_idx / self.cfg.episode_length
        obs[13] = scored["composite"]
        obs[14:17] = scored["normalized"][:3]
        eff = self._cum_rho / (self._cum_cost + 1.0)
        obs[17] = eff / (1.0 + eff)
        obs[18] = min(1.0, weather.fault_duration / self.cfg.episode_length)
        obs[19] = min(1.0, max(0.0, self._last_cost / self.cfg.budget))
        return EnvState(obs, step_idx, budget, weather, config, tuple(switches))

    # -- API ---------------------------------------------------------------

    def reset(self, seed=None, forced_weather: Weather | None = None) -> EnvState:
        """Start an episode.  forced_weather pins the weather (and scenario)
        for the whole episode; used for what-if contingency queries."""
        self._rng = np.random.default_rng(seed)
        self._done = False
        self._cum_rho = 0.0
        self._cum_cost = 0.0
        self._last_cost = 0.0
        self._onset_step = None
        self._onset_config = 0
        self._forced = forced_weather
        weather = forced_weather if forced_weather is not None else Weather()
        self._state = self._observe(
            weather, self.net.normal_switch_state, 0, self.cfg.budget, 0
        )
        return self._state

    @property
    def state(self) -> EnvState:
        if self._state is None:
            raise EnvError("environment not reset")
        return self._state

    @property
    def done(self) -> bool:
        return self._done

    def step(self, config_action: int, switch_action, grid_action: int) -> StepOutcome:
        """Apply one joint action.

        The reward is evaluated under the weather the agent observed (the
        active scenario's outages apply when that weather is calamity);
        the weather then advances for the next observation.  Stepping a
        finished episode is a no-op that returns the frozen state.
        """
        if self._state is None:
            raise EnvError("environment not reset")
        if self._done:
            return StepOutcome(self._state, 0.0, 0.0, True, {"noop": True})
        config = int(config_action)
        if not 0 <= config < N_CONFIGS:
            raise EnvError(f"configuration action must lie in 0..5, got {config}")
        switches = tuple(int(b) for b in switch_action)
        if len(switches) != N_SWITCHES or any(b not in (0, 1) for b in switches):
            raise EnvError("switch action must be a 10-bit vector")
        if int(grid_action) not in (0, 1):
            raise EnvError(f"grid action must be 0 or 1, got {grid_action}")

        state = self._state
        weather = state.weather
        toggles = sum(a != b for a, b in zip(switches, state.switches, strict=True))
        cost = step_cost(config, toggles, self.cfg)
        scenario = self._scenario_for(weather)
        scored = self.engine.score(switches, scenario, config)
        rho = scored["rho"]

        if weather.value == WEATHER_CALAMITY:
            adapted = (
                self._onset_step is not None
                and state.step_index - self._onset_step < self.cfg.adaptation_window
                and config != self._onset_config
            )
            reward = reward_calamity(rho, cost, adapted, self.cfg)
            tier = resilience_bonus(rho)
            bonuses = {"resilience_tier": tier, "adaptation": adapted}
        else:
            reward = reward_normal(rho, cost, self.cfg)
            got_eff = cost <= self.cfg.efficiency_cost_fraction * self.cfg.budget
            bonuses = {"efficiency": got_eff}

        self.reward_norm.update(reward)
        normalized = self.reward_norm.normalize(reward)

        budget = max(0.0, state.budget_remaining - cost)
        self._cum_rho += rho
        self._cum_cost += cost
        self._last_cost = cost

        if self._forced is not None:
            next_weather = self._forced
        else:
            next_weather = weather_transition(weather, self._rng, self.cfg, self.scenarios)
        if weather.value == WEATHER_NORMAL and next_weather.value == WEATHER_CALAMITY:
            self._onset_step = state.step_index + 1
            self._onset_config = config

        step_idx = state.step_index + 1
        done = step_idx >= self.cfg.episode_length or budget <= 0.0
        self._done = done
        self._state = self._observe(next_weather, switches, config, budget, step_idx)

        info = {
            "rho": rho,
            "composite": scored["composite"],
            "step_cost": cost,
            "toggles": toggles,
            "bonuses": bonuses,
            "weather": weather.label,
            "scenario": scenario.name if scenario is not EMPTY_SCENARIO else "",
            "config": config,
            "closed_switches": self.closed_switch_count(switches),
        }
        return StepOutcome(self._state, reward, normalized, done, info)
