"""Training loop, metrics bookkeeping, and crash-safe checkpointing.

One update round runs every ``update_every`` completed episodes: each step's
normalized reward is split 60/40 between the strategic and tactical buffers,
both agents run their own GAE + clipped-PPO update on their own stream, and
the buffers are cleared.  Checkpoints are directories

    ckpt_<episode>/
        strategic_actor.bin   strategic_critic.bin
        tactical_actor.bin    tactical_critic.bin
        meta.txt

written to a temp directory first and atomically renamed into place, so an
interrupted save can never be half-loaded.  Parameter files are a versioned
binary: magic, format version, shape table, then raw little-endian float64
payloads (bit-exact round-trips).
"""

from __future__ import annotations

import logging
import os
import shutil
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import GridEnv
from .ppo import (
    ExperienceBuffer,
    PpoHyperparams,
    StrategicPolicy,
    TacticalPolicy,
    UpdateStats,
)

log = logging.getLogger(__name__)

STRATEGIC_REWARD_SHARE = 0.6
TACTICAL_REWARD_SHARE = 0.4
MOVING_AVG_WINDOW = 50

CHECKPOINT_MAGIC = b"GRESCKPT"
CHECKPOINT_VERSION = 1
NETWORK_FILES = (
    "strategic_actor.bin",
    "strategic_critic.bin",
    "tactical_actor.bin",
    "tactical_critic.bin",
)
META_FILE = "meta.txt"


class CheckpointError(RuntimeError):
    """Missing, truncated, or mismatched checkpoint data."""


@dataclass
class TrainConfig:
    episodes: int = 1200
    update_every: int = 25
    checkpoint_interval: int = 100
    save_best_only: bool = False
    keep_checkpoints: int = 5
    resume_path: str = ""
    seed: int = 0
    out_dir: str = "runs"

    def __post_init__(self):
        if min(self.episodes, self.update_every, self.checkpoint_interval, self.keep_checkpoints) < 1:
            raise ValueError("episodes, cadences, and keep count must all be >= 1")


class TrainingMetrics:
    """Per-episode rewards with a 50-episode moving average, plus one row of
    (approx KL, entropy) per agent per update round."""

    def __init__(self):
        self.episode_rewards: list[float] = []
        self.update_rows: list[tuple[int, str, float, float]] = []

    def add_episode(self, reward: float) -> None:
        self.episode_rewards.append(float(reward))

    def add_update(self, agent: str, stats: UpdateStats) -> None:
        index = sum(1 for row in self.update_rows if row[1] == agent) + 1
        self.update_rows.append((index, agent, stats.approx_kl, stats.entropy))

    def moving_average(self, episode_index: int) -> float | None:
        """Trailing 50-episode mean; defined from episode 50 onward
        (episode_index is 1-based)."""
        if episode_index < MOVING_AVG_WINDOW:
            return None
        window = self.episode_rewards[episode_index - MOVING_AVG_WINDOW : episode_index]
        return float(np.mean(window))

    def current_average(self) -> float:
        """Mean over the trailing window, shortened while fewer than 50
        episodes exist; used for save-best comparisons."""
        if not self.episode_rewards:
            return -np.inf
        return float(np.mean(self.episode_rewards[-MOVING_AVG_WINDOW:]))

    def episodes_csv(self) -> str:
        lines = ["episode,reward,moving_avg50"]
        for i, r in enumerate(self.episode_rewards, start=1):
            avg = self.moving_average(i)
            lines.append(f"{i},{r:.10g},{'' if avg is None else format(avg, '.10g')}")
        return "\n".join(lines) + "\n"

    def updates_csv(self) -> str:
        lines = ["update,agent,approx_kl,entropy"]
        for index, agent, kl, entropy in self.update_rows:
            lines.append(f"{index},{agent},{kl:.10g},{entropy:.10g}")
        return "\n".join(lines) + "\n"


# -- parameter file format ---------------------------------------------------


def write_arrays(path, arrays) -> None:
    """Serialize arrays: magic, version, count, shape table, then payload."""
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<II", CHECKPOINT_VERSION, len(arrays))
    payload = bytearray()
    for a in arrays:
        a = np.ascontiguousarray(a, dtype="<f8")
        blob += struct.pack("<I", a.ndim)
        blob += struct.pack(f"<{a.ndim}Q", *a.shape)
        payload += a.tobytes()
    Path(path).write_bytes(bytes(blob) + bytes(payload))


def read_arrays(path) -> list[np.ndarray]:
    raw = Path(path).read_bytes()
    if raw[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    offset = len(CHECKPOINT_MAGIC)
    try:
        version, count = struct.unpack_from("<II", raw, offset)
        offset += 8
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        shapes = []
        for _ in range(count):
            (ndim,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            shape = struct.unpack_from(f"<{ndim}Q", raw, offset)
            offset += 8 * ndim
            shapes.append(shape)
        arrays = []
        for shape in shapes:
            n = int(np.prod(shape)) if shape else 1
            end = offset + 8 * n
            if end > len(raw):
                raise CheckpointError(f"{path}: truncated payload")
            arrays.append(np.frombuffer(raw[offset:end], dtype="<f8").reshape(shape).copy())
            offset = end
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated header") from exc
    if offset != len(raw):
        raise CheckpointError(f"{path}: trailing bytes")
    return arrays


def _write_meta(path, meta: dict) -> None:
    lines = [f"{k} = {v!r}" if isinstance(v, str) else f"{k} = {v}" for k, v in meta.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _read_meta(path) -> dict:
    meta = {}
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or "=" not in line:
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        try:
            meta[key] = int(value)
        except ValueError:
            try:
                meta[key] = float(value)
            except ValueError:
                meta[key] = value.strip("'\"")
    return meta


# -- checkpoint directories --------------------------------------------------


def checkpoint_dirs(out_dir) -> list[Path]:
    """Completed checkpoints under out_dir, oldest first."""
    out = Path(out_dir)
    if not out.is_dir():
        return []
    found = []
    for child in out.iterdir():
        if child.is_dir() and child.name.startswith("ckpt_"):
            tail = child.name[5:]
            if tail.isdigit():
                found.append((int(tail), child))
    return [path for _, path in sorted(found)]


def save_checkpoint(
    strategic: StrategicPolicy,
    tactical: TacticalPolicy,
    episode: int,
    metrics: TrainingMetrics,
    out_dir,
    save_best: bool = False,
    best_so_far: float | None = None,
    extra_meta: dict | None = None,
) -> Path | None:
    """Write ckpt_<episode>; with save_best set, only when the trailing
    average beats best_so_far.  Returns the final path, or None if skipped."""
    avg = metrics.current_average()
    if save_best and best_so_far is not None and avg <= best_so_far:
        return None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    final = out / f"ckpt_{episode}"
    tmp = Path(tempfile.mkdtemp(prefix=f"ckpt_{episode}.tmp-", dir=out))
    try:
        arrays_by_file = {
            "strategic_actor.bin": strategic.actor.parameter_arrays(),
            "strategic_critic.bin": strategic.critic.parameter_arrays(),
            "tactical_actor.bin": tactical.actor.parameter_arrays(),
            "tactical_critic.bin": tactical.critic.parameter_arrays(),
        }
        for name in NETWORK_FILES:
            write_arrays(tmp / name, arrays_by_file[name])
        meta = {
            "episode": episode,
            "avg_reward": avg,
            "strategic_updates": strategic.update_count,
            "tactical_updates": tactical.update_count,
        }
        if extra_meta:
            meta.update(extra_meta)
        _write_meta(tmp / META_FILE, meta)
        if final.exists():
            shutil.rmtree(final)
        os.replace(tmp, final)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return final


def load_checkpoint(strategic: StrategicPolicy, tactical: TacticalPolicy, path) -> tuple[bool, dict]:
    """Restore all four parameter sets; on any failure nothing is mutated
    and (False, {}) is returned.  Metadata is optional: a checkpoint without
    meta.txt loads successfully with empty metadata."""
    base = Path(path)
    targets = (
        (strategic.actor, base / "strategic_actor.bin"),
        (strategic.critic, base / "strategic_critic.bin"),
        (tactical.actor, base / "tactical_actor.bin"),
        (tactical.critic, base / "tactical_critic.bin"),
    )
    staged = []
    try:
        for net, file in targets:
            arrays = read_arrays(file)
            expected = net.parameter_arrays()
            if len(arrays) != len(expected) or any(
                a.shape != e.shape for a, e in zip(arrays, expected)
            ):
                raise CheckpointError(f"{file}: parameter shapes do not match the agent")
            staged.append((net, arrays))
    except (OSError, CheckpointError) as exc:
        log.warning("checkpoint load failed: %s", exc)
        return False, {}
    for net, arrays in staged:
        net.load_arrays(arrays)
    meta_path = base / META_FILE
    meta = _read_meta(meta_path) if meta_path.exists() else {}
    return True, meta


def cleanup_checkpoints(out_dir, keep: int) -> None:
    dirs = checkpoint_dirs(out_dir)
    for stale in dirs[: max(0, len(dirs) - keep)]:
        shutil.rmtree(stale)


# -- training loop -------------------------------------------------------------


@dataclass
class TrainResult:
    strategic: StrategicPolicy
    tactical: TacticalPolicy
    metrics: TrainingMetrics
    checkpoints: list[Path] = field(default_factory=list)


def train(
    cfg: TrainConfig,
    env: GridEnv,
    strategic: StrategicPolicy | None = None,
    tactical: TacticalPolicy | None = None,
    hp: PpoHyperparams | None = None,
) -> TrainResult:
    """Run the episode loop with periodic updates and checkpoints.

    A broken resume path logs a warning and training starts from scratch.
    The final checkpoint is always written, regardless of save_best_only.
    """
    hp = hp or PpoHyperparams(update_every=cfg.update_every)
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    strategic = strategic or StrategicPolicy(seed=seeds[0], lr=hp.lr_strategic)
    tactical = tactical or TacticalPolicy(seed=seeds[1], lr=hp.lr_tactical)
    rng = np.random.default_rng(seeds[2])

    metrics = TrainingMetrics()
    start_episode = 0
    best: float | None = None
    if cfg.resume_path:
        ok, meta = load_checkpoint(strategic, tactical, cfg.resume_path)
        if ok:
            start_episode = int(meta.get("episode", -1)) + 1
            if "best_avg" in meta:
                best = float(meta["best_avg"])
            if "reward_norm_count" in meta:
                env.reward_norm.restore(
                    {
                        "count": meta["reward_norm_count"],
                        "mean": meta["reward_norm_mean"],
                        "m2": meta["reward_norm_m2"],
                    }
                )
            log.info("resumed from %s at episode %d", cfg.resume_path, start_episode)
        else:
            log.warning("could not resume from %r; starting fresh", cfg.resume_path)

    buffer_s = ExperienceBuffer()
    buffer_t = ExperienceBuffer()
    written: list[Path] = []

    def _save(episode: int, save_best: bool) -> None:
        nonlocal best
        extra = {
            "best_avg": metrics.current_average() if best is None else max(best, metrics.current_average()),
            "reward_norm_count": env.reward_norm.count,
            "reward_norm_mean": env.reward_norm.mean,
            "reward_norm_m2": env.reward_norm.m2,
        }
        path = save_checkpoint(
            strategic, tactical, episode, metrics, cfg.out_dir,
            save_best=save_best, best_so_far=best, extra_meta=extra,
        )
        if path is not None:
            written.append(path)
            best = extra["best_avg"]
        cleanup_checkpoints(cfg.out_dir, cfg.keep_checkpoints)

    for episode in range(start_episode, cfg.episodes):
        state = env.reset(seed=np.random.SeedSequence([cfg.seed, episode]))
        episode_reward = 0.0
        done = False
        while not done:
            obs = state.observation
            c, logp_s, value_s, _ = strategic.act(obs, rng)
            tactical_obs = np.append(obs, float(c))
            bits, g, logp_t, value_t = tactical.act(tactical_obs, rng)
            outcome = env.step(c, bits, g)
            shared = outcome.normalized_reward
            buffer_s.add(obs, c, logp_s, STRATEGIC_REWARD_SHARE * shared, value_s, outcome.done)
            buffer_t.add(tactical_obs, (bits, g), logp_t, TACTICAL_REWARD_SHARE * shared,
                         value_t, outcome.done)
            episode_reward += outcome.reward
            state = outcome.next_state
            done = outcome.done
        metrics.add_episode(episode_reward)

        if (episode + 1) % cfg.update_every == 0 and len(buffer_s) and len(buffer_t):
            metrics.add_update("strategic", strategic.update(buffer_s, hp, rng))
            metrics.add_update("tactical", tactical.update(buffer_t, hp, rng))
            buffer_s.clear()
            buffer_t.clear()

        if (episode + 1) % cfg.checkpoint_interval == 0:
            _save(episode, cfg.save_best_only)

    _save(cfg.episodes - 1, False)
    return TrainResult(strategic, tactical, metrics, written)
