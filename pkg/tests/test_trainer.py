import csv

import numpy as np
import pytest
import torch

from trashfleet import open_map
from trashfleet.learner.trainer import LOG_COLUMNS, Trainer, TrainerConfig, train
from trashfleet.rollout import EnvSpec
from trashfleet.world import FleetConfig


def tiny_config(**kw):
    base = dict(
        episodes=4,
        batch_size=16,
        buffer_capacity=1000,
        lr=1e-3,
        learn_start=2,
        train_every=10,
        target_sync=5,
        eval_every=2,
        eval_episodes=2,
        checkpoint_every=2,
        conv_channels=(4, 4, 4),
        fc=(16, 16, 16),
        strict_determinism=True,
    )
    base.update(kw)
    return TrainerConfig(**base)


@pytest.fixture
def env():
    return EnvSpec(open_map(8, 8), FleetConfig(2, 2), horizon=20)


def test_config_validation():
    for bad in (dict(gamma=1.0), dict(gamma=0.0), dict(behavior="boltzmann"), dict(prefill=1.5), dict(reward_scale=0.0)):
        with pytest.raises(ValueError):
            TrainerConfig(**bad)
    with pytest.raises(ValueError):
        TrainerConfig(batch_size=64, buffer_capacity=32)


def test_schedules():
    cfg = TrainerConfig(episodes=1000)
    assert cfg.epsilon(0) == 1.0
    assert cfg.epsilon(250) == pytest.approx(0.525)
    assert cfg.epsilon(500) == pytest.approx(0.05) == cfg.epsilon(900)
    assert cfg.beta(0) == pytest.approx(0.4) and cfg.beta(1000) == pytest.approx(1.0)
    assert cfg.eval_seeds() == [1_000_000 + k for k in range(10)]


def test_zero_episodes_writes_initial_checkpoint(tmp_path, env):
    result = train(env, tiny_config(episodes=0), tmp_path)
    assert result.episodes == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["checkpoint_initial.pt"]


def test_prefill_fills_exactly_before_learning(tmp_path, env):
    cfg = tiny_config(behavior="greedy-mix", prefill=0.2, episodes=1)
    tr = Trainer(env, cfg, tmp_path)
    tr.prefill()
    assert {t: len(b) for t, b in tr.buffers.items()} == {"scout": 200, "cleaner": 200}
    tr.run()
    assert min(tr.first_grad_fill.values()) >= 200


def test_prefill_ignores_missing_team(tmp_path):
    env = EnvSpec(open_map(8, 8), FleetConfig(0, 2), horizon=20)
    tr = Trainer(env, tiny_config(prefill=0.1), tmp_path)
    tr.prefill()
    assert len(tr.buffers["cleaner"]) == 100 and len(tr.buffers["scout"]) == 0


def test_log_and_checkpoints(tmp_path, env):
    result = train(env, tiny_config(), tmp_path)
    with open(result.log_path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == LOG_COLUMNS
    assert [r[0] for r in rows[1:]] == ["1", "2", "3", "4"]
    assert rows[2][3] != "" and rows[1][3] == ""
    names = {p.name for p in tmp_path.iterdir()}
    assert {"checkpoint_initial.pt", "checkpoint_best.pt", "checkpoint_latest.pt", "train_log.csv"} <= names
    payload = torch.load(tmp_path / "checkpoint_latest.pt", weights_only=False)
    assert payload["episode"] == 4
    assert set(payload["teams"]) == {"scout", "cleaner"}
    for team in payload["teams"].values():
        assert set(team) >= {"online", "target", "optimizer"}
    assert "behavior" in payload["rng"] and "torch" in payload["rng"]


def test_strict_runs_repeat_exactly(tmp_path, env):
    a = train(env, tiny_config(seed=7), tmp_path / "a")
    b = train(env, tiny_config(seed=7), tmp_path / "b")
    c = train(env, tiny_config(seed=8), tmp_path / "c")
    assert a.log_path.read_bytes() == b.log_path.read_bytes()
    assert a.log_path.read_bytes() != c.log_path.read_bytes()


def test_resume_continues_episode_count(tmp_path, env):
    train(env, tiny_config(episodes=2), tmp_path)
    result = train(env, tiny_config(episodes=4), tmp_path, resume=True)
    assert result.episodes == 4
    with open(result.log_path) as fh:
        rows = list(csv.reader(fh))
    assert [r[0] for r in rows[1:]] == ["1", "2", "3", "4"]


def test_resume_rejects_other_network(tmp_path, env):
    train(env, tiny_config(episodes=2), tmp_path)
    with pytest.raises(ValueError):
        train(env, tiny_config(episodes=4, fc=(8, 8, 8)), tmp_path, resume=True)


def test_target_changes_only_at_sync(tmp_path, env):
    tr = Trainer(env, tiny_config(target_sync=3), tmp_path)
    tr.prefill = lambda: None
    tr.play(1, "learn", epsilon=1.0)
    team = tr.teams["cleaner"]
    team.grad_steps = 0

    def snapshot():
        return [p.detach().clone() for p in team.target.parameters()]

    prev = snapshot()
    for step in range(1, 10):
        tr._learn(0.5)
        now = snapshot()
        changed = any(not torch.equal(a, b) for a, b in zip(prev, now))
        assert changed == (step % 3 == 0)
        if changed:
            for a, b in zip(team.target.parameters(), team.online.parameters()):
                assert torch.equal(a, b)
        prev = now


def test_double_q_audit_during_training(tmp_path, env):
    tr = Trainer(env, tiny_config(), tmp_path)
    tr.audit = []
    for k in range(3):
        tr.play(k, "learn", epsilon=1.0)
    assert tr.audit
    for chosen, best in tr.audit:
        assert torch.equal(chosen, best)


def test_evaluate_uses_held_out_seeds(tmp_path, env):
    tr = Trainer(env, tiny_config(), tmp_path)
    p1, m1 = tr.evaluate()
    p2, m2 = tr.evaluate()
    assert (p1, m1) == (p2, m2)
    assert 0 <= p1 <= 100 and m1 >= 0
    assert np.isfinite(m1)


def test_reward_scale_multiplies_stored_rewards(tmp_path, env):
    stored = {}
    for scale in (1.0, 0.25):
        tr = Trainer(env, tiny_config(prefill=0.05, reward_scale=scale), tmp_path / str(scale))
        tr.prefill()
        stored[scale] = {t: b.rewards[: len(b)].copy() for t, b in tr.buffers.items()}
    for team in ("scout", "cleaner"):
        assert np.any(stored[1.0][team] != 0)
        np.testing.assert_allclose(stored[0.25][team], 0.25 * stored[1.0][team], rtol=1e-6)
