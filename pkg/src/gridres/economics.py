"""Commercial analysis of switching policies: costs, revenue, NPV, BCR.

Per-step cash components (all dollars):

    C_cap(c, s)     = (C_ctrl + n_DER(c) C_DER + s (C_sw + C_comm + C_prot)) mu_cap(c) / L
    C_op(c, s, w)   = (C_operator + C_monitor + C_maint s + n_DER(c) C_fuel + C_comm_op s) mu_op(c) gamma(w)
    C_fail(r, w)    = (1 - r) (N_c C_outage + 2 C_restore + 10 C_emerg) phi(w)
    V_res(r)        = r V_o N_c
    R_rev(r, w)     = S_fee N_s T/30 + P_contract r + I_rate r [w = calamity]
    B_risk(r, w)    = P_cost (r_base - r)   when calamity and r < r_base, else 0

gamma is 1.5 during calamity (1.0 otherwise) and phi is 3.0 (1.0).  Trace
aggregates: C_total adds a development term C_dev * T / 8760, NPV discounts
yearly cash flows against the initial investment, and BCR / CPUB / NB
compare total revenue plus risk benefit against total cost.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields

NORMAL = "normal"
CALAMITY = "calamity"

# Equipment damage, reputation cost, and inflation are carried for
# completeness but enter no aggregate below.
_UNUSED_IN_TOTALS = ("c_damage", "c_rep", "inflation_rate")


class EconomicsError(ValueError):
    """Invalid economic parameters or trace data."""


@dataclass(frozen=True)
class EconomicParameters:
    # capital costs
    c_ctrl: float = 50_000.0
    c_der: float = 3_000.0
    c_sw: float = 1_500.0
    c_comm: float = 2_500.0
    c_prot: float = 2_000.0
    # operational costs
    c_maint: float = 2.0
    c_fuel: float = 10.0
    c_comm_op: float = 0.5
    c_operator: float = 30.0
    c_monitor: float = 5.0
    # failure costs
    c_outage: float = 5.0
    c_restore: float = 50.0
    c_emerg: float = 200.0
    c_damage: float = 1_000.0
    c_rep: float = 5_000.0
    # configuration multipliers, linear across configs 0..5 within the
    # published ranges 1.0-3.5 / 1.0-2.0 / 1.0-1.5
    mu_cap: tuple[float, ...] = (1.0, 1.5, 2.0, 2.5, 3.0, 3.5)
    mu_op: tuple[float, ...] = (1.0, 1.2, 1.4, 1.6, 1.8, 2.0)
    mu_maint: tuple[float, ...] = (1.0, 1.1, 1.2, 1.3, 1.4, 1.5)
    # other parameters
    discount_rate: float = 0.03
    lifetime_years: int = 5
    inflation_rate: float = 0.03
    n_customers: int = 50
    outage_value: float = 100.0
    subscription_fee: float = 2_000.0
    n_subscribers: int = 1
    performance_contract: float = 1_000.0
    incentive_rate: float = 2_000.0
    c_dev: float = 30_000.0
    c_init: float = 150_000.0
    penalty_cost: float = 1_000.0
    baseline_resilience: float = 0.5
    config_base_cost: tuple[float, ...] = (0.0, 15.0, 28.0, 40.0, 50.0, 75.0)
    config_n_der: tuple[int, ...] = (0, 1, 2, 3, 4, 4)
    episode_length: int = 50

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name in ("mu_cap", "mu_op", "mu_maint", "config_base_cost", "config_n_der"):
                if len(value) != 6:
                    raise EconomicsError(f"{f.name} needs 6 entries (configs 0..5)")
                if any(v < 0 for v in value):
                    raise EconomicsError(f"{f.name} entries must be non-negative")
            elif isinstance(value, (int, float)) and f.name not in (
                "discount_rate",
                "inflation_rate",
                "lifetime_years",
            ):
                if value < 0:
                    raise EconomicsError(f"{f.name} must be non-negative, got {value}")
        if not 0.0 <= self.discount_rate < 1.0 or not 0.0 <= self.inflation_rate < 1.0:
            raise EconomicsError("discount and inflation rates must lie in [0, 1)")
        if self.lifetime_years < 1:
            raise EconomicsError("project lifetime must be at least one year")

    @classmethod
    def from_file(cls, text: str) -> "EconomicParameters":
        """Load from key = value text; keys mirror the parameter symbols
        (C_ctrl, C_DER, ..., mu_cap as 6 comma-separated values)."""
        overrides = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise EconomicsError(f"line {lineno}: expected key = value")
            key, value = (part.strip() for part in line.split("=", 1))
            name = _KEY_TO_FIELD.get(key)
            if name is None:
                raise EconomicsError(f"line {lineno}: unknown parameter {key!r}")
            try:
                if name in ("mu_cap", "mu_op", "mu_maint", "config_base_cost"):
                    overrides[name] = tuple(float(v) for v in value.replace(",", " ").split())
                elif name == "config_n_der":
                    overrides[name] = tuple(int(v) for v in value.replace(",", " ").split())
                elif name in ("lifetime_years", "n_customers", "n_subscribers", "episode_length"):
                    overrides[name] = int(value)
                else:
                    overrides[name] = float(value)
            except ValueError as exc:
                raise EconomicsError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc
        return cls(**overrides)


_KEY_TO_FIELD = {
    "C_ctrl": "c_ctrl",
    "C_DER": "c_der",
    "C_sw": "c_sw",
    "C_comm": "c_comm",
    "C_prot": "c_prot",
    "C_maint": "c_maint",
    "C_fuel": "c_fuel",
    "C_comm_op": "c_comm_op",
    "C_comm-op": "c_comm_op",
    "C_operator": "c_operator",
    "C_monitor": "c_monitor",
    "C_outage": "c_outage",
    "C_restore": "c_restore",
    "C_emerg": "c_emerg",
    "C_damage": "c_damage",
    "C_rep": "c_rep",
    "mu_cap": "mu_cap",
    "mu_op": "mu_op",
    "mu_maint": "mu_maint",
    "delta": "discount_rate",
    "L": "lifetime_years",
    "eta": "inflation_rate",
    "N_c": "n_customers",
    "V_o": "outage_value",
    "S_fee": "subscription_fee",
    "N_s": "n_subscribers",
    "P_contract": "performance_contract",
    "I_rate": "incentive_rate",
    "C_dev": "c_dev",
    "C_init": "c_init",
    "P_cost": "penalty_cost",
    "r_base": "baseline_resilience",
    "C_config": "config_base_cost",
    "n_DER": "config_n_der",
    "T": "episode_length",
}

DEFAULT_PARAMETERS = EconomicParameters()


@dataclass(frozen=True)
class TraceStep:
    t: int
    weather: str  # normal | calamity
    config: int
    closed_switches: int
    resilience: float
    reward: float
    step_cost: float

    def __post_init__(self):
        if self.weather not in (NORMAL, CALAMITY):
            raise EconomicsError(f"weather must be normal or calamity, got {self.weather!r}")
        if not 0.0 <= self.resilience <= 1.0:
            raise EconomicsError(f"resilience must lie in [0, 1], got {self.resilience}")
        if not 0 <= self.config <= 5:
            raise EconomicsError(f"config must lie in 0..5, got {self.config}")
        if self.closed_switches < 0:
            raise EconomicsError("closed switch count must be non-negative")


TRACE_HEADER = ("t", "weather", "config", "closed_switches", "resilience", "reward", "step_cost")


@dataclass(frozen=True)
class EpisodeTrace:
    steps: tuple[TraceStep, ...]

    def __post_init__(self):
        if not self.steps:
            raise EconomicsError("a trace needs at least one step")

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for s in self.steps:
            writer.writerow(
                [s.t, s.weather, s.config, s.closed_switches,
                 f"{s.resilience:.17g}", f"{s.reward:.17g}", f"{s.step_cost:.17g}"]
            )
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "EpisodeTrace":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise EconomicsError("empty trace file") from None
        if tuple(header) != TRACE_HEADER:
            raise EconomicsError(f"unexpected trace header {header!r}")
        steps = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                steps.append(
                    TraceStep(int(row[0]), row[1], int(row[2]), int(row[3]),
                              float(row[4]), float(row[5]), float(row[6]))
                )
            except (IndexError, ValueError) as exc:
                raise EconomicsError(f"line {lineno}: malformed trace row {row!r}") from exc
        return cls(tuple(steps))


def _weather_is_calamity(weather) -> bool:
    if isinstance(weather, str):
        return weather == CALAMITY
    return bool(weather)


def capital_cost(config: int, closed_switches: int, params: EconomicParameters = DEFAULT_PARAMETERS) -> float:
    """Annualized capital cost, amortized over the project lifetime."""
    base = (
        params.c_ctrl
        + params.config_n_der[config] * params.c_der
        + closed_switches * (params.c_sw + params.c_comm + params.c_prot)
    )
    return base * params.mu_cap[config] / params.lifetime_years


def operational_cost(
    config: int, closed_switches: int, weather, params: EconomicParameters = DEFAULT_PARAMETERS
) -> float:
    """Per-step operations spend; 1.5x during calamity."""
    gamma = 1.5 if _weather_is_calamity(weather) else 1.0
    base = (
        params.c_operator
        + params.c_monitor
        + params.c_maint * closed_switches
        + params.config_n_der[config] * params.c_fuel
        + params.c_comm_op * closed_switches
    )
    return base * params.mu_op[config] * gamma


def failure_cost(resilience: float, weather, params: EconomicParameters = DEFAULT_PARAMETERS) -> float:
    """Outage / restoration / emergency-generation losses; 3x during calamity."""
    phi = 3.0 if _weather_is_calamity(weather) else 1.0
    base = params.n_customers * params.c_outage + 2.0 * params.c_restore + 10.0 * params.c_emerg
    return (1.0 - resilience) * base * phi


def resilience_value(resilience: float, params: EconomicParameters = DEFAULT_PARAMETERS) -> float:
    """Dollar value of sustained service across the customer base."""
    return resilience * params.outage_value * params.n_customers


def revenue_potential(resilience: float, weather, params: EconomicParameters = DEFAULT_PARAMETERS) -> float:
    """Subscription + performance contract + calamity incentive revenue."""
    rev = params.subscription_fee * params.n_subscribers * params.episode_length / 30.0
    rev += params.performance_contract * resilience
    if _weather_is_calamity(weather):
        rev += params.incentive_rate * resilience
    return rev


def risk_reduction_benefit(resilience: float, weather, params: EconomicParameters = DEFAULT_PARAMETERS) -> float:
    """Penalty term for sub-baseline resilience during calamity (strict)."""
    if _weather_is_calamity(weather) and resilience < params.baseline_resilience:
        return params.penalty_cost * (params.baseline_resilience - resilience)
    return 0.0


def step_costs(step: TraceStep, params: EconomicParameters = DEFAULT_PARAMETERS) -> float:
    """Configuration + capital + operational + failure cost of one step."""
    return (
        params.config_base_cost[step.config]
        + capital_cost(step.config, step.closed_switches, params)
        + operational_cost(step.config, step.closed_switches, step.weather, params)
        + failure_cost(step.resilience, step.weather, params)
    )


def total_cost(trace: EpisodeTrace, params: EconomicParameters = DEFAULT_PARAMETERS) -> float:
    """Sum of per-step costs plus the development term C_dev * T / 8760,
    T being the number of steps in the trace."""
    per_step = sum(step_costs(s, params) for s in trace)
    return per_step + params.c_dev * len(trace) / 8760.0


def npv(traces_by_year, params: EconomicParameters = DEFAULT_PARAMETERS) -> float:
    """NPV = -C_init + sum_y CF_y / (1 + delta)^y.

    traces_by_year maps a year index in [0, L) to that year's trace (or
    None for an idle year); a plain sequence is read as years 0, 1, ...
    """
    if not isinstance(traces_by_year, dict):
        traces_by_year = {y: t for y, t in enumerate(traces_by_year)}
    if any(not 0 <= y < params.lifetime_years for y in traces_by_year):
        raise EconomicsError(f"year indices must lie in [0, {params.lifetime_years})")
    value = -params.c_init
    for year, trace in sorted(traces_by_year.items()):
        if trace is None:
            continue
        cash = sum(
            revenue_potential(s.resilience, s.weather, params) - step_costs(s, params)
            for s in trace
        )
        value += cash / (1.0 + params.discount_rate) ** year
    return value


@dataclass(frozen=True)
class CostEffectiveness:
    bcr: float
    cpub: float
    nb: float


def cost_effectiveness(trace: EpisodeTrace, params: EconomicParameters = DEFAULT_PARAMETERS) -> CostEffectiveness:
    """BCR, CPUB, and NB of one trace.

    Benefits are total revenue plus total risk-reduction benefit; the
    resilience value V_res is intentionally not part of BCR benefits and is
    reported separately by the evaluation layer.  Zero benefits make CPUB
    infinite.
    """
    benefits = sum(
        revenue_potential(s.resilience, s.weather, params)
        + risk_reduction_benefit(s.resilience, s.weather, params)
        for s in trace
    )
    cost = total_cost(trace, params)
    if cost <= 0:
        raise EconomicsError("total cost must be positive")
    bcr = benefits / cost
    cpub = cost / benefits if benefits > 0 else math.inf
    return CostEffectiveness(bcr=bcr, cpub=cpub, nb=benefits - cost)
