"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that the terminal summary prints at the end
of the run (see ``conftest.py``). The desk-scale learning check trains for a
few hours on first use and caches the result under
``$TRASHFLEET_ACCEPTANCE_CACHE`` (default ``~/.cache/trashfleet``), keyed by
the training configuration and the package source.
"""

from __future__ import annotations

import contextlib
import hashlib
import json
import os
import time
from pathlib import Path

import numpy as np
import pytest
import torch
import yaml
from test_metrics import dense_mse

import trashfleet
from trashfleet.benchmark import run_benchmark
from trashfleet.cli import main as cli_main
from trashfleet.learner.agent import DQNPolicy
from trashfleet.learner.dqn import behavior_action, td_target, train_step
from trashfleet.learner.network import DuelingQNetwork, NetSpec
from trashfleet.learner.replay import PrioritizedReplayBuffer
from trashfleet.learner.trainer import Trainer, TrainerConfig
from trashfleet.metrics import gaussian_mse, ptc
from trashfleet.policies import make_baseline
from trashfleet.rollout import EnvSpec, run_episode
from trashfleet.scenarios import load_scenario, open_map
from trashfleet.world import FleetConfig

RESULTS: dict[int, str] = {}


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record PASS or FAIL for one criterion and echo it immediately."""
    t0 = time.perf_counter()
    detail: dict = {}
    try:
        yield detail
    except BaseException:
        line = f"criterion {number} FAIL: {title}  {_fmt(detail)}"
        RESULTS[number] = line
        print(line)
        raise
    detail["seconds"] = round(time.perf_counter() - t0, 1)
    line = f"criterion {number} PASS: {title}  {_fmt(detail)}"
    RESULTS[number] = line
    print(line)


def _fmt(detail: dict) -> str:
    return " ".join(f"{k}={v}" for k, v in detail.items())


# -- 1 ---------------------------------------------------------------------------


def test_criterion_1_conservation_suite():
    n_episodes = 1000
    with criterion(1, "conservation, no collisions, coverage monotone") as d:
        violations = []
        steps = 0
        for scenario in ("scenario_a", "scenario_b"):
            env = EnvSpec(load_scenario(scenario))
            for seed in range(n_episodes):
                prev = {"U": None}

                def check(state, result):
                    nonlocal steps
                    steps += 1
                    if state.collected_total + state.remaining != state.n_initial:
                        violations.append((scenario, seed, state.t, "conservation"))
                    cells = {tuple(p) for p in state.positions.tolist()}
                    if len(cells) != state.n_agents:
                        violations.append((scenario, seed, state.t, "collision"))
                    if prev["U"] is not None and np.any(state.coverage < prev["U"]):
                        violations.append((scenario, seed, state.t, "coverage"))
                    prev["U"] = state.coverage.copy()

                trace = run_episode(env, make_baseline("random"), seed, on_step=check)
                if trace.collected_total + trace.remaining[-1] != trace.n_initial:
                    violations.append((scenario, seed, "final"))
        d["episodes"] = 2 * n_episodes
        d["steps"] = steps
        d["violations"] = len(violations)
        assert not violations, violations[:5]


# -- 2 ---------------------------------------------------------------------------


def test_criterion_2_metric_oracles():
    with criterion(2, "gaussian MSE vs dense oracle, PTC identity") as d:
        rng = np.random.default_rng(2024)
        worst = 0.0
        for k in range(200):
            h, w = rng.integers(1, 25, size=2)
            y = rng.poisson(rng.uniform(0.1, 3), (h, w))
            m = rng.poisson(rng.uniform(0.1, 3), (h, w))
            worst = max(worst, abs(gaussian_mse(y, m) - dense_mse(y, m)))
        d["max_abs_err"] = f"{worst:.1e}"
        assert worst <= 1e-9

        n_traces = 0
        for scenario in ("scenario_a", "scenario_b"):
            env = EnvSpec(load_scenario(scenario))
            for name in ("random", "greedy", "pso", "lawnmower"):
                for seed in range(5):
                    t = run_episode(env, make_baseline(name), seed)
                    expect = 100.0 * np.cumsum(t.collected) / t.n_initial
                    assert np.array_equal(t.ptc(), expect)
                    assert np.array_equal(ptc(t.collected, t.n_initial), expect)
                    assert t.ptc()[-1] == 100.0 * t.collected_total / t.n_initial
                    n_traces += 1
        d["ptc_traces"] = n_traces


# -- 3 ---------------------------------------------------------------------------


class _Row(torch.nn.Module):
    def __init__(self, row):
        super().__init__()
        self.row = torch.nn.Parameter(torch.tensor(row, dtype=torch.float64))

    def forward(self, x):
        return self.row.expand(x.shape[0], -1)


def test_criterion_3_double_q():
    with criterion(3, "double-Q toy target and evaluated-action audit") as d:
        y, chosen = td_target(
            torch.tensor([1.0], dtype=torch.float64),
            torch.zeros(1, 1),
            torch.ones(1, 2, dtype=torch.bool),
            torch.tensor([False]),
            _Row([1.0, 3.0]),
            _Row([5.0, 7.0]),
            gamma=0.5,
        )
        d["toy_target"] = y.item()
        assert y.item() == 4.5 and chosen.item() == 1

        torch.manual_seed(3)
        spec = NetSpec(8, 8, conv_channels=(4, 4, 4), fc=(16, 16, 16))
        net, tgt = DuelingQNetwork(spec), DuelingQNetwork(spec)
        rng = np.random.default_rng(3)
        buf = PrioritizedReplayBuffer(512, (6, 8, 8))
        for _ in range(512):
            mask = rng.random(8) < 0.5
            mask[rng.integers(8)] = True
            buf.add(rng.random((6, 8, 8)), rng.integers(8), rng.normal(), rng.random((6, 8, 8)), mask, rng.random() < 0.1)
        opt = torch.optim.Adam(net.parameters(), lr=1e-3)
        audit: list = []
        for step in range(10_000):
            train_step(buf, net, tgt, opt, 8, 0.99, 0.4, rng, audit=audit)
            if step % 100 == 99:
                tgt.load_state_dict(net.state_dict())
        mismatches = sum(int((a != b).sum()) for a, b in audit)
        d["batches"] = len(audit)
        d["mismatches"] = mismatches
        assert len(audit) == 10_000 and mismatches == 0


# -- 4 ---------------------------------------------------------------------------


def test_criterion_4_gradient_check():
    with criterion(4, "loss gradients vs central differences") as d:
        torch.manual_seed(4)
        net = DuelingQNetwork(NetSpec(8, 8, conv_channels=(4, 4, 4), fc=(16, 16, 16))).double()
        g = torch.Generator().manual_seed(4)
        obs = torch.rand(4, 6, 8, 8, generator=g, dtype=torch.float64)
        actions = torch.tensor([0, 3, 5, 7])
        y = torch.tensor([1.0, -2.0, 0.5, 3.0], dtype=torch.float64)
        w = torch.tensor([1.0, 0.4, 0.7, 0.9], dtype=torch.float64)

        def loss():
            q = net(obs).gather(1, actions[:, None]).squeeze(1)
            return (w * (y - q) ** 2).mean()

        net.zero_grad()
        loss().backward()
        analytic = torch.cat([p.grad.reshape(-1) for p in net.parameters()]).numpy()
        numeric = []
        h = 1e-6
        with torch.no_grad():
            for p in net.parameters():
                flat = p.view(-1)
                for k in range(flat.numel()):
                    old = flat[k].item()
                    flat[k] = old + h
                    up = loss().item()
                    flat[k] = old - h
                    down = loss().item()
                    flat[k] = old
                    numeric.append((up - down) / (2 * h))
        numeric = np.array(numeric)
        rel = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), np.linalg.norm(numeric))
        d["params"] = len(numeric)
        d["rel_err"] = f"{rel:.1e}"
        assert rel < 1e-4


# -- 5 ---------------------------------------------------------------------------


def test_criterion_5_per_fidelity():
    with criterion(5, "prioritized sampling frequencies and sum-tree drift") as d:
        buf = PrioritizedReplayBuffer(3, (1,), alpha=1.0)
        for p in (8.0, 1.0, 1.0):
            buf.add(np.zeros(1), 0, 0.0, np.zeros(1), np.ones(8, bool), False, p)
        rng = np.random.default_rng(5)
        draws = np.concatenate([buf.sample_indices(100, rng) for _ in range(1000)])
        freq = np.bincount(draws, minlength=3) / len(draws)
        d["freq"] = [round(float(f), 4) for f in freq]
        assert np.all(np.abs(freq - [0.8, 0.1, 0.1]) <= 0.01)

        buf = PrioritizedReplayBuffer(1000, (1,), alpha=0.6)
        obs, mask = np.zeros(1), np.ones(8, bool)
        ops = 0
        while ops < 1_000_000:
            for _ in range(50):
                buf.add(obs, 0, 0.0, obs, mask, False, float(rng.uniform(1e-3, 10)))
            buf.update_priorities(rng.integers(0, len(buf), 64), rng.normal(0, 3, 64))
            ops += 114
        rel = abs(buf.tree.total - buf.tree.leaves().sum()) / buf.tree.leaves().sum()
        d["ops"] = ops
        d["rel_drift"] = f"{rel:.1e}"
        assert rel <= 1e-6 and len(buf) == 1000


# -- 6 ---------------------------------------------------------------------------


def test_criterion_6_baseline_ordering():
    with criterion(6, "greedy > PSO > {random, lawnmower}; greedy A > B") as d:
        factories = {name: (lambda n=name: make_baseline(n)) for name in ("greedy", "pso", "random", "lawnmower")}
        envs = [EnvSpec(load_scenario(s)) for s in ("scenario_a", "scenario_b")]
        report = run_benchmark(factories, envs, n_episodes=100, timed=False)
        means = {(r.policy, r.scenario): float(r.final_ptc.mean()) for r in report.results}
        for s in ("scenario_a", "scenario_b"):
            d[s] = {p: round(means[p, s], 2) for p in factories}
        for s in ("scenario_a", "scenario_b"):
            assert means["greedy", s] > means["pso", s]
            assert means["pso", s] > max(means["random", s], means["lawnmower", s])
        assert means["greedy", "scenario_a"] > means["greedy", "scenario_b"]


# -- 7 ---------------------------------------------------------------------------

DESK_MAP = (24, 18)
DESK_CONFIG = dict(
    episodes=2000,
    buffer_capacity=60_000,
    batch_size=64,
    lr=2.5e-4,
    train_every=4,
    behavior="greedy-mix",
    prefill=0.2,
    reward_scale=0.02,
    conv_channels=(16, 16, 16),
    fc=(128, 64, 64),
    padding=1,
    eval_every=100,
    eval_episodes=10,
    checkpoint_every=50,
    seed=0,
)
HELD_OUT = [2_000_000 + k for k in range(50)]

_TRAINING_SOURCES = (
    "world.py",
    "rewards.py",
    "perception.py",
    "policies.py",
    "rollout.py",
    "scenarios.py",
    "learner/network.py",
    "learner/replay.py",
    "learner/dqn.py",
    "learner/agent.py",
    "learner/trainer.py",
)


def _desk_key() -> str:
    h = hashlib.sha256(json.dumps([DESK_MAP, DESK_CONFIG], sort_keys=True).encode())
    root = Path(trashfleet.__file__).parent
    for name in _TRAINING_SOURCES:
        h.update((root / name).read_bytes())
    return h.hexdigest()[:16]


def desk_scale_run() -> Path:
    """Train the desk-scale configuration once and return its output directory."""
    cache = Path(os.environ.get("TRASHFLEET_ACCEPTANCE_CACHE", Path.home() / ".cache" / "trashfleet"))
    out = cache / f"desk_{_desk_key()}"
    done = out / "DONE"
    if not done.exists():
        env = EnvSpec(open_map(*DESK_MAP), FleetConfig(2, 2))
        trainer = Trainer(env, TrainerConfig(**DESK_CONFIG), out)
        trainer.run(resume=(out / "checkpoint_latest.pt").exists())
        done.write_text("ok\n")
    return out


@pytest.mark.slow
def test_criterion_7_desk_scale_learning():
    with criterion(7, "desk-scale training beats the random walker") as d:
        out = desk_scale_run()
        env = EnvSpec(open_map(*DESK_MAP), FleetConfig(2, 2))
        policy = DQNPolicy.from_checkpoint(out / "checkpoint_best.pt")
        learned = [run_episode(env, policy, s) for s in HELD_OUT]
        walker = [run_episode(env, make_baseline("random"), s) for s in HELD_OUT]
        ptc_l = np.mean([t.ptc()[-1] for t in learned])
        ptc_r = np.mean([t.ptc()[-1] for t in walker])
        mse_l = np.mean([t.mse[-1] for t in learned])
        mse_r = np.mean([t.mse[-1] for t in walker])
        d.update(ptc=round(ptc_l, 2), ptc_random=round(ptc_r, 2), mse=f"{mse_l:.5f}", mse_random=f"{mse_r:.5f}")
        assert ptc_l >= 2 * ptc_r
        assert mse_l <= 0.5 * mse_r


# -- 8 ---------------------------------------------------------------------------


def test_criterion_8_greedy_mix(tmp_path):
    with criterion(8, "prefill to 20% before learning; mixed-mode frequencies") as d:
        env = EnvSpec(open_map(10, 10), FleetConfig(2, 2), horizon=30)
        cfg = TrainerConfig(
            episodes=2,
            batch_size=16,
            buffer_capacity=2000,
            behavior="greedy-mix",
            prefill=0.2,
            learn_start=1,
            conv_channels=(4, 4, 4),
            fc=(16, 16, 16),
        )
        tr = Trainer(env, cfg, tmp_path)
        tr.prefill()
        fill = {t: len(b) for t, b in tr.buffers.items()}
        tr.run()
        d["prefill"] = fill
        d["first_grad_fill"] = dict(tr.first_grad_fill)
        assert fill == {"scout": 400, "cleaner": 400}
        assert min(tr.first_grad_fill.values()) >= 400

        rng = np.random.default_rng(8)
        mask = np.array([1, 1, 1, 0, 0, 1, 0, 1], dtype=bool)
        q = np.zeros(8)
        draws = np.array([behavior_action(q, mask, 1.0, True, lambda: 2, rng) for _ in range(100_000)])
        freq = np.bincount(draws, minlength=8) / len(draws)
        expect = np.where(mask, 0.5 / mask.sum(), 0.0)
        expect[2] += 0.5
        d["greedy_freq"] = round(float(freq[2]), 4)
        assert np.all(np.abs(freq - expect) <= 0.01)


# -- 9 ---------------------------------------------------------------------------

TINY_RUN = """\
scenario: {map}
scouts: 1
cleaners: 2
horizon: 40
trainer:
  batch_size: 16
  buffer_capacity: 4000
  learn_start: 2
  train_every: 4
  eval_every: 25
  eval_episodes: 3
  checkpoint_every: 25
  conv_channels: [4, 8, 8]
  fc: [32, 16, 16]
"""


def test_criterion_9_determinism(tmp_path):
    with criterion(9, "strict-mode train and evaluate logs are byte-identical") as d:
        mp = tmp_path / "pond.map"
        mp.write_text("10 9\n" + "111111111\n" * 3 + "111001111\n" + "111111111\n" * 4 + "222222222\n" * 2)
        cfg = tmp_path / "run.yaml"
        cfg.write_text(TINY_RUN.format(map=mp))
        for run in ("a", "b"):
            rc = cli_main(["train", "--config", str(cfg), "--episodes", "50", "--seed", "9", "--strict-determinism", "--out", str(tmp_path / f"train_{run}")])
            assert rc == 0
            rc = cli_main(
                ["evaluate", "--config", str(cfg), "--policy", "random,greedy,dddql", "--checkpoint", str(tmp_path / "train_a" / "checkpoint_latest.pt"),
                 "--episodes", "10", "--seed", "9", "--strict-determinism", "--no-plot", "--out", str(tmp_path / f"eval_{run}")]
            )
            assert rc == 0
        compared = []
        for sub, names in (
            ("train", ["train_log.csv"]),
            ("eval", ["report.csv", "report.json", "traces_random_pond.csv", "traces_greedy_pond.csv", "traces_dddql_pond.csv"]),
        ):
            for name in names:
                a = (tmp_path / f"{sub}_a" / name).read_bytes()
                b = (tmp_path / f"{sub}_b" / name).read_bytes()
                assert a == b, f"{sub}/{name} differs"
                compared.append(name)
        configs = [yaml.safe_load((tmp_path / f"train_{r}" / "config.yaml").read_text()) for r in "ab"]
        for c in configs:
            c.pop("out")
        assert configs[0] == configs[1]
        rows = (tmp_path / "train_a" / "train_log.csv").read_text().splitlines()
        d["train_rows"] = len(rows) - 1
        d["files"] = len(compared)
        assert len(rows) == 51
