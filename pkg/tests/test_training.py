"""Episode loop cadence, metrics, and crash-safe checkpoint round-trips."""

import numpy as np
import pytest

from gridres import training
from gridres.env import EnvConfig, GridEnv
from gridres.ppo import StrategicPolicy, TacticalPolicy
from gridres.training import (
    MOVING_AVG_WINDOW,
    STRATEGIC_REWARD_SHARE,
    TACTICAL_REWARD_SHARE,
    CheckpointError,
    TrainConfig,
    TrainingMetrics,
    checkpoint_dirs,
    cleanup_checkpoints,
    load_checkpoint,
    read_arrays,
    save_checkpoint,
    train,
    write_arrays,
)


@pytest.fixture()
def fast_env(toy_net):
    cfg = EnvConfig(episode_length=6, budget=600.0, calibration_samples=2, percolation_trials=20)
    return GridEnv(toy_net, (), cfg)


def make_agents(seed=0):
    seeds = np.random.SeedSequence(seed).spawn(2)
    return StrategicPolicy(seed=seeds[0]), TacticalPolicy(seed=seeds[1])


class TestRewardSplit:
    def test_split_constants(self):
        assert STRATEGIC_REWARD_SHARE == pytest.approx(0.6)
        assert TACTICAL_REWARD_SHARE == pytest.approx(0.4)
        assert STRATEGIC_REWARD_SHARE * 10.0 == pytest.approx(6.0)
        assert TACTICAL_REWARD_SHARE * 10.0 == pytest.approx(4.0)

    def test_shares_sum_to_whole(self):
        rng = np.random.default_rng(0)
        for r in rng.normal(0, 50, 200):
            assert STRATEGIC_REWARD_SHARE * r + TACTICAL_REWARD_SHARE * r == pytest.approx(
                r, abs=1e-12
            )


class TestMetrics:
    def test_moving_average_undefined_before_window(self):
        m = TrainingMetrics()
        for _ in range(MOVING_AVG_WINDOW - 1):
            m.add_episode(1.0)
        assert m.moving_average(len(m.episode_rewards)) is None
        csv = m.episodes_csv().splitlines()
        assert csv[-1].endswith(",")  # empty moving-average column

    def test_constant_rewards(self):
        m = TrainingMetrics()
        for _ in range(100):
            m.add_episode(5.0)
        for ep in range(MOVING_AVG_WINDOW, 101):
            assert m.moving_average(ep) == pytest.approx(5.0)

    def test_ramp_mean(self):
        m = TrainingMetrics()
        for r in range(1, 101):
            m.add_episode(float(r))
        assert m.moving_average(100) == pytest.approx(75.5)

    def test_csv_shapes(self):
        m = TrainingMetrics()
        m.add_episode(1.5)
        from gridres.ppo import UpdateStats

        m.add_update("strategic", UpdateStats(0.1, 0.2, 1.7, 0.01, 4, 6, False))
        m.add_update("tactical", UpdateStats(0.1, 0.2, 7.0, 0.02, 4, 6, False))
        m.add_update("strategic", UpdateStats(0.1, 0.2, 1.6, 0.011, 4, 6, False))
        assert m.episodes_csv().splitlines()[0] == "episode,reward,moving_avg50"
        rows = m.updates_csv().splitlines()
        assert rows[0] == "update,agent,approx_kl,entropy"
        assert rows[1].startswith("1,strategic,")
        assert rows[3].startswith("2,strategic,")


class TestParameterFiles:
    def test_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        arrays = [rng.normal(0, 1, (7, 3)), rng.normal(0, 1, 5), np.array([2.5])]
        path = tmp_path / "params.bin"
        write_arrays(path, arrays)
        back = read_arrays(path)
        assert len(back) == 3
        for a, b in zip(arrays, back):
            assert a.shape == b.shape
            assert np.array_equal(a, b)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.bin"
        path.write_bytes(b"NOTACKPT" + b"\0" * 32)
        with pytest.raises(CheckpointError, match="magic"):
            read_arrays(path)

    def test_truncation_detected(self, tmp_path):
        path = tmp_path / "x.bin"
        write_arrays(path, [np.ones((4, 4))])
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])
        with pytest.raises(CheckpointError, match="truncated"):
            read_arrays(path)


class TestCheckpointRoundTrip:
    def test_identical_action_distributions(self, tmp_path):
        strategic, tactical = make_agents(7)
        metrics = TrainingMetrics()
        metrics.add_episode(1.0)
        path = save_checkpoint(strategic, tactical, 500, metrics, tmp_path)
        assert path.name == "ckpt_500"

        fresh_s, fresh_t = make_agents(99)  # different init
        ok, meta = load_checkpoint(fresh_s, fresh_t, path)
        assert ok
        assert meta["episode"] == 500
        rng = np.random.default_rng(5)
        for _ in range(100):
            s20 = rng.normal(0, 1, 20)
            s20[0] = float(rng.random() < 0.5)
            w = int(s20[0])
            p_a, v_a = strategic.forward(s20, w)
            p_b, v_b = fresh_s.forward(s20, w)
            assert np.max(np.abs(p_a - p_b)) <= 1e-12
            assert abs(v_a - v_b) <= 1e-12
            s21 = np.append(s20, float(rng.integers(6)))
            sw_a, g_a, tv_a = tactical.forward(s21, w)
            sw_b, g_b, tv_b = fresh_t.forward(s21, w)
            assert np.max(np.abs(sw_a - sw_b)) <= 1e-12
            assert abs(g_a - g_b) <= 1e-12 and abs(tv_a - tv_b) <= 1e-12

    def test_missing_meta_is_fine(self, tmp_path):
        strategic, tactical = make_agents(3)
        metrics = TrainingMetrics()
        path = save_checkpoint(strategic, tactical, 7, metrics, tmp_path)
        (path / "meta.txt").unlink()
        ok, meta = load_checkpoint(*make_agents(4), path)
        assert ok and meta == {}

    def test_nonexistent_path(self, tmp_path):
        ok, meta = load_checkpoint(*make_agents(1), tmp_path / "missing")
        assert (ok, meta) == (False, {})

    def test_corrupt_file_leaves_agents_untouched(self, tmp_path):
        strategic, tactical = make_agents(11)
        metrics = TrainingMetrics()
        path = save_checkpoint(strategic, tactical, 1, metrics, tmp_path)
        blob = (path / "tactical_critic.bin").read_bytes()
        (path / "tactical_critic.bin").write_bytes(blob[: len(blob) // 2])

        target_s, target_t = make_agents(12)
        before = np.concatenate([target_s.actor.get_flat(), target_t.actor.get_flat()])
        ok, _ = load_checkpoint(target_s, target_t, path)
        after = np.concatenate([target_s.actor.get_flat(), target_t.actor.get_flat()])
        assert not ok
        assert np.array_equal(before, after)

    def test_shape_mismatch_rejected(self, tmp_path):
        strategic, tactical = make_agents(13)
        path = save_checkpoint(strategic, tactical, 2, TrainingMetrics(), tmp_path)
        wrong = StrategicPolicy(seed=0, hidden=32)
        ok, _ = load_checkpoint(wrong, TacticalPolicy(seed=0), path)
        assert not ok

    def test_save_best_skips_below_best(self, tmp_path):
        strategic, tactical = make_agents(15)
        metrics = TrainingMetrics()
        metrics.add_episode(1.0)
        out = save_checkpoint(
            strategic, tactical, 3, metrics, tmp_path, save_best=True, best_so_far=100.0
        )
        assert out is None
        assert checkpoint_dirs(tmp_path) == []

    def test_cleanup_keeps_newest(self, tmp_path):
        strategic, tactical = make_agents(17)
        metrics = TrainingMetrics()
        for ep in (10, 20, 30):
            save_checkpoint(strategic, tactical, ep, metrics, tmp_path)
        cleanup_checkpoints(tmp_path, keep=1)
        assert [p.name for p in checkpoint_dirs(tmp_path)] == ["ckpt_30"]


class TestCrashInjection:
    def test_interrupted_save_never_mixes_generations(self, tmp_path, monkeypatch):
        strategic, tactical = make_agents(19)
        metrics = TrainingMetrics()
        metrics.add_episode(2.0)
        good = save_checkpoint(strategic, tactical, 1, metrics, tmp_path)
        good_arrays = [read_arrays(good / name) for name in training.NETWORK_FILES]

        # mutate the agents, then crash after two of the four files
        strategic.actor.weights[0] += 1.0
        calls = {"n": 0}
        real = training.write_arrays

        def flaky(path, arrays):
            calls["n"] += 1
            if calls["n"] > 2:
                raise OSError("simulated crash between file writes")
            real(path, arrays)

        monkeypatch.setattr(training, "write_arrays", flaky)
        with pytest.raises(OSError):
            save_checkpoint(strategic, tactical, 2, metrics, tmp_path)
        monkeypatch.setattr(training, "write_arrays", real)

        # no partial directory was published
        assert [p.name for p in checkpoint_dirs(tmp_path)] == ["ckpt_1"]
        assert not list(tmp_path.glob("ckpt_2*"))
        # the earlier generation still loads in full
        ok, _ = load_checkpoint(*make_agents(23), good)
        assert ok
        for name, arrays in zip(training.NETWORK_FILES, good_arrays):
            for a, b in zip(arrays, read_arrays(good / name)):
                assert np.array_equal(a, b)


class TestTrainLoop:
    def test_single_episode_no_update_one_final_checkpoint(self, fast_env, tmp_path):
        cfg = TrainConfig(
            episodes=1, update_every=25, checkpoint_interval=100, out_dir=str(tmp_path), seed=1
        )
        result = train(cfg, fast_env)
        assert all(agent != "strategic" or False for agent, *_ in [])  # no updates happened
        assert result.metrics.update_rows == []
        assert [p.name for p in checkpoint_dirs(tmp_path)] == ["ckpt_0"]
        assert len(result.metrics.episode_rewards) == 1

    def test_two_update_rounds_for_fifty_episodes(self, fast_env, tmp_path):
        cfg = TrainConfig(
            episodes=50, update_every=25, checkpoint_interval=1000, out_dir=str(tmp_path), seed=2
        )
        result = train(cfg, fast_env)
        per_agent = {}
        for _, agent, _, _ in result.metrics.update_rows:
            per_agent[agent] = per_agent.get(agent, 0) + 1
        assert per_agent == {"strategic": 2, "tactical": 2}

    def test_checkpoint_cadence_and_pruning(self, fast_env, tmp_path):
        cfg = TrainConfig(
            episodes=8,
            update_every=4,
            checkpoint_interval=2,
            keep_checkpoints=2,
            out_dir=str(tmp_path),
            seed=3,
        )
        train(cfg, fast_env)
        assert len(checkpoint_dirs(tmp_path)) <= 2
        assert checkpoint_dirs(tmp_path)[-1].name == "ckpt_7"

    def test_resume_from_checkpoint(self, fast_env, tmp_path):
        cfg = TrainConfig(
            episodes=4, update_every=2, checkpoint_interval=2, out_dir=str(tmp_path), seed=4
        )
        first = train(cfg, fast_env)
        resume = TrainConfig(
            episodes=6,
            update_every=2,
            checkpoint_interval=2,
            out_dir=str(tmp_path / "second"),
            resume_path=str(checkpoint_dirs(tmp_path)[-1]),
            seed=4,
        )
        second = train(resume, fast_env)
        # resumed from episode 4, so only episodes 4 and 5 ran
        assert len(second.metrics.episode_rewards) == 2

    def test_bad_resume_starts_fresh(self, fast_env, tmp_path):
        cfg = TrainConfig(
            episodes=2,
            update_every=25,
            checkpoint_interval=100,
            out_dir=str(tmp_path),
            resume_path=str(tmp_path / "nope"),
            seed=5,
        )
        result = train(cfg, fast_env)
        assert len(result.metrics.episode_rewards) == 2

    def test_buffers_cleared_after_update(self, fast_env, tmp_path):
        # indirect check: when episodes == update_every the final buffers are
        # empty, so a second round cannot occur without new experience
        cfg = TrainConfig(
            episodes=2, update_every=1, checkpoint_interval=100, out_dir=str(tmp_path), seed=6
        )
        result = train(cfg, fast_env)
        assert sum(1 for _, a, _, _ in result.metrics.update_rows if a == "strategic") == 2

    def test_reward_stream_split_in_buffers(self, fast_env):
        # mirror one collection step and verify the 60/40 bookkeeping
        strategic, tactical = make_agents(31)
        rng = np.random.default_rng(0)
        state = fast_env.reset(seed=0)
        c, logp_s, v_s, _ = strategic.act(state.observation, rng)
        bits, g, logp_t, v_t = tactical.act(np.append(state.observation, float(c)), rng)
        out = fast_env.step(c, bits, g)
        shared = out.normalized_reward
        assert STRATEGIC_REWARD_SHARE * shared + TACTICAL_REWARD_SHARE * shared == pytest.approx(
            shared, abs=1e-12
        )
