"""Command-line entry points: train, evaluate, recommend, report.

Exit codes: 0 success, 1 usage error, 2 data error (feeder/config/CSV),
3 checkpoint error.  All outputs are UTF-8 text or CSV; reruns on the same
inputs and seeds produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

import numpy as np

from .economics import (
    DEFAULT_PARAMETERS,
    EconomicParameters,
    EconomicsError,
    EpisodeTrace,
    TraceStep,
    cost_effectiveness,
    resilience_value,
    total_cost,
)
from .env import EnvConfig, EnvError, GridEnv, Weather, WEATHER_CALAMITY
from .feeder import FeederError, GridNetwork, Scenario, parse_feeder, parse_scenario
from .metrics import MetricDomainError, ahp_weights, load_pairwise_matrix
from .ppo import PpoHyperparams, StrategicPolicy, TacticalPolicy
from .training import (
    CheckpointError,
    TrainConfig,
    load_checkpoint,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CHECKPOINT = 3

CONFIG_LABELS = ("Base Case", "1 DER", "2 DER", "3 DER", "4 DER", "4 DER + Additional Switch")


@dataclass(frozen=True)
class ContingencyReportRow:
    contingency: str
    weather: str
    recommendation: str
    switches: tuple[int, ...]
    total_cost: float

    def __post_init__(self):
        if len(self.switches) != 10 or any(b not in (0, 1) for b in self.switches):
            raise ValueError("switch vector must be 10 bits")
        if self.total_cost < 0:
            raise ValueError("total cost must be non-negative")

    def formatted(self) -> str:
        bits = " ".join(str(b) for b in self.switches)
        return f"{self.contingency},{self.weather},{self.recommendation},[{bits}],{self.total_cost:.15g}"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; we reserve that for data errors
        raise _UsageError(message)


def _data_path(name: str) -> str:
    return str(resources.files("gridres").joinpath("data", name))


def _read_text(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _load_feeder(args) -> GridNetwork:
    path = args.feeder or _data_path("default_feeder.txt")
    return parse_feeder(_read_text(path))


def _load_env_config(args) -> EnvConfig:
    if args.env_config:
        return EnvConfig.from_file(_read_text(args.env_config))
    return EnvConfig()


def _load_econ(args) -> EconomicParameters:
    if args.econ_config:
        return EconomicParameters.from_file(_read_text(args.econ_config))
    return DEFAULT_PARAMETERS


def _load_scenarios(cfg: EnvConfig, net: GridNetwork) -> list[Scenario]:
    base = Path(cfg.scenario_dir) if cfg.scenario_dir else Path(_data_path("scenarios"))
    if not base.is_dir():
        raise FeederError(f"scenario directory not found: {base}")
    scenarios = []
    for path in sorted(base.glob("*.txt")):
        scenarios.append(parse_scenario(path.read_text(encoding="utf-8"), net))
    return scenarios


def _build_env(args) -> GridEnv:
    net = _load_feeder(args)
    cfg = _load_env_config(args)
    if cfg.weights_file:
        matrix = load_pairwise_matrix(_read_text(cfg.weights_file))
        cfg = replace(cfg, weights=ahp_weights(matrix))
    scenarios = _load_scenarios(cfg, net)
    return GridEnv(net, scenarios, cfg)


def _make_agents(seed: int) -> tuple[StrategicPolicy, TacticalPolicy]:
    seeds = np.random.SeedSequence(seed).spawn(2)
    return StrategicPolicy(seed=seeds[0]), TacticalPolicy(seed=seeds[1])


def _greedy_actions(strategic, tactical, obs):
    w = int(round(float(obs[0])))
    probs, _ = strategic.forward(obs, w)
    c = int(np.argmax(probs))
    switch_probs, grid_prob, _ = tactical.forward(np.append(obs, float(c)), w)
    bits = tuple(int(p > 0.5) for p in switch_probs)
    g = int(grid_prob > 0.5)
    return c, bits, g


def _rollout_trace(env: GridEnv, strategic, tactical, seed, steps=None, forced=None) -> tuple[EpisodeTrace, list[dict]]:
    state = env.reset(seed=seed, forced_weather=forced)
    rows = []
    infos = []
    t = 0
    while not env.done:
        c, bits, g = _greedy_actions(strategic, tactical, state.observation)
        outcome = env.step(c, bits, g)
        info = outcome.info
        rows.append(
            TraceStep(
                t=t,
                weather=info["weather"],
                config=info["config"],
                closed_switches=info["closed_switches"],
                resilience=info["rho"],
                reward=outcome.reward,
                step_cost=info["step_cost"],
            )
        )
        infos.append(info)
        state = outcome.next_state
        t += 1
        if steps is not None and t >= steps:
            break
    return EpisodeTrace(tuple(rows)), infos


# -- train ---------------------------------------------------------------------


def cmd_train(args) -> int:
    env = _build_env(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = TrainConfig(
        episodes=args.episodes,
        update_every=args.update_every,
        checkpoint_interval=args.checkpoint_interval,
        save_best_only=args.save_best,
        keep_checkpoints=args.keep,
        resume_path=args.resume,
        seed=args.seed,
        out_dir=str(out_dir),
    )
    hp = PpoHyperparams(update_every=args.update_every)
    result = train(cfg, env, hp=hp)
    (out_dir / "metrics_episodes.csv").write_text(result.metrics.episodes_csv(), encoding="utf-8")
    (out_dir / "metrics_updates.csv").write_text(result.metrics.updates_csv(), encoding="utf-8")
    print(f"trained {cfg.episodes} episodes; metrics and checkpoints in {out_dir}")
    return EXIT_OK


# -- evaluate --------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    env = _build_env(args)
    econ = _load_econ(args)
    strategic, tactical = _make_agents(args.seed)
    ok, _meta = load_checkpoint(strategic, tactical, args.checkpoint)
    if not ok:
        print(f"error: cannot load checkpoint {args.checkpoint}", file=sys.stderr)
        return EXIT_CHECKPOINT
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    per_episode_rho = []
    per_episode_reward = []
    per_episode_bcr = []
    per_episode_vres = []
    config_hist = [0] * 6
    calamity_steps = 0
    for k in range(args.episodes):
        trace, _ = _rollout_trace(env, strategic, tactical, np.random.SeedSequence([args.seed, k]))
        (out_dir / f"trace_ep{k}.csv").write_text(trace.to_csv(), encoding="utf-8")
        rhos = [s.resilience for s in trace]
        per_episode_rho.append(float(np.mean(rhos)))
        per_episode_reward.append(float(sum(s.reward for s in trace)))
        per_episode_bcr.append(cost_effectiveness(trace, econ).bcr)
        per_episode_vres.append(float(np.mean([resilience_value(s.resilience, econ) for s in trace])))
        for s in trace:
            if s.weather == "calamity":
                calamity_steps += 1
                config_hist[s.config] += 1

    high_der = config_hist[4] + config_hist[5]
    lines = [
        f"episodes = {args.episodes}",
        f"resilience_mean = {np.mean(per_episode_rho):.6f}",
        f"resilience_std = {np.std(per_episode_rho):.6f}",
        f"reward_mean = {np.mean(per_episode_reward):.6f}",
        f"bcr_mean = {np.mean(per_episode_bcr):.6f}",
        f"resilience_value_mean = {np.mean(per_episode_vres):.6f}",
        f"calamity_steps = {calamity_steps}",
    ]
    for c in range(6):
        lines.append(f"calamity_config_{c} = {config_hist[c]}")
    frac = high_der / calamity_steps if calamity_steps else 0.0
    lines.append(f"calamity_high_der_fraction = {frac:.6f}")
    summary = "\n".join(lines) + "\n"
    (out_dir / "summary.txt").write_text(summary, encoding="utf-8")
    print(summary, end="")
    return EXIT_OK


# -- recommend -------------------------------------------------------------------


def cmd_recommend(args) -> int:
    env = _build_env(args)
    econ = _load_econ(args)
    strategic, tactical = _make_agents(args.seed)
    ok, _meta = load_checkpoint(strategic, tactical, args.checkpoint)
    if not ok:
        print(f"error: cannot load checkpoint {args.checkpoint}", file=sys.stderr)
        return EXIT_CHECKPOINT
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    scenarios = []
    for path in args.scenario:
        scenarios.append(parse_scenario(_read_text(path), env.net))

    rows: list[ContingencyReportRow] = []
    for i, scenario in enumerate(scenarios, start=1):
        cid = f"C{i}"
        for weather_label, forced in (
            ("normal", Weather()),
            (scenario.name, Weather(WEATHER_CALAMITY, scenario, 1)),
        ):
            trace, infos = _rollout_trace(
                env, strategic, tactical, np.random.SeedSequence([args.seed, i]),
                steps=econ.episode_length, forced=forced,
            )
            last = trace.steps[-1]
            final_bits = tuple(int(b) for b in env.state.switches)
            row = ContingencyReportRow(
                contingency=cid,
                weather=weather_label,
                recommendation=CONFIG_LABELS[last.config],
                switches=final_bits,
                total_cost=total_cost(trace, econ),
            )
            rows.append(row)
            (out_dir / f"trace_{cid}_{weather_label}.csv").write_text(trace.to_csv(), encoding="utf-8")

    header = "contingency,weather,recommendation,switches,total_cost"
    body = "\n".join(row.formatted() for row in rows)
    (out_dir / "recommendations.csv").write_text(header + "\n" + body + "\n", encoding="utf-8")
    print(header)
    print(body)
    return EXIT_OK


# -- report ----------------------------------------------------------------------


def _validated_rows(path, expected_header, row_width) -> list[list[str]]:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return []
    reader = csv.reader(text.splitlines())
    header = next(reader)
    if header != list(expected_header):
        raise EconomicsError(f"{path}: line 1: expected header {','.join(expected_header)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != row_width:
            raise EconomicsError(f"{path}: line {lineno}: expected {row_width} columns")
        try:
            float(row[0])
        except ValueError:
            raise EconomicsError(f"{path}: line {lineno}: bad index {row[0]!r}") from None
        rows.append(row)
    return rows


def cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows = _validated_rows(args.metrics, ("episode", "reward", "moving_avg50"), 3)
    lines = ["episode,reward,moving_avg50"]
    for row in rows:
        lines.append(",".join(row))
    (out_dir / "plot_rewards.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    if args.updates:
        rows = _validated_rows(args.updates, ("update", "agent", "approx_kl", "entropy"), 4)
        lines = ["update,agent,approx_kl,entropy"]
        for row in rows:
            lines.append(",".join(row))
        (out_dir / "plot_kl_entropy.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"plot data written to {out_dir}")
    return EXIT_OK


# -- wiring ----------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--feeder", default="", help="feeder file (default: bundled network)")
    sub.add_argument("--env-config", default="", help="environment config file")
    sub.add_argument("--econ-config", default="", help="economic parameters file")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out-dir", default="out")


def build_parser() -> _Parser:
    parser = _Parser(prog="gridres", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    p_train = commands.add_parser("train", help="train the dual-agent controller")
    _add_common(p_train)
    p_train.add_argument("--episodes", type=int, default=1200)
    p_train.add_argument("--update-every", type=int, default=25)
    p_train.add_argument("--checkpoint-interval", type=int, default=100)
    p_train.add_argument("--save-best", action="store_true")
    p_train.add_argument("--keep", type=int, default=5)
    p_train.add_argument("--resume", default="")
    p_train.set_defaults(func=cmd_train)

    p_eval = commands.add_parser("evaluate", help="greedy-policy evaluation episodes")
    _add_common(p_eval)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--episodes", type=int, default=10)
    p_eval.set_defaults(func=cmd_evaluate)

    p_rec = commands.add_parser("recommend", help="contingency recommendations")
    _add_common(p_rec)
    p_rec.add_argument("--checkpoint", required=True)
    p_rec.add_argument("--scenario", action="append", required=True,
                       help="scenario file (repeatable, one contingency each)")
    p_rec.set_defaults(func=cmd_recommend)

    p_rep = commands.add_parser("report", help="emit plot-ready data from metrics CSVs")
    _add_common(p_rep)
    p_rep.add_argument("--metrics", required=True, help="episode metrics CSV")
    p_rep.add_argument("--updates", default="", help="update metrics CSV")
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return EXIT_CHECKPOINT
    except (FeederError, EconomicsError, EnvError, MetricDomainError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
