"""Training loop: one dueling double-Q network and one replay buffer per team."""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..metrics import ptc
from ..perception import N_CHANNELS, ObservationTracker
from ..policies import greedy
from ..rewards import fleet_rewards
from ..rollout import EnvSpec, episode_seed, new_episode, run_episode, select_actions, substream
from ..world import HOLD, N_ACTIONS, apply_actions, legal_actions
from .agent import TEAMS, DQNPolicy, Team, load_checkpoint, save_checkpoint, team_of, team_q_values
from .dqn import behavior_action, train_step
from .network import NetSpec
from .replay import PrioritizedReplayBuffer

log = logging.getLogger(__name__)

LOG_COLUMNS = ["episode", "loss_scout", "loss_cleaner", "eval_PTC", "eval_MSE", "epsilon"]
BEHAVIORS = ("egreedy", "greedy-mix")


@dataclass
class TrainerConfig:
    episodes: int = 60_000
    batch_size: int = 128
    lr: float = 1e-4
    gamma: float = 0.99
    buffer_capacity: int = 1_000_000
    target_sync: int = 100
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_fraction: float = 0.5
    per_alpha: float = 0.6
    per_beta_start: float = 0.4
    per_eps: float = 1e-6
    reward_scale: float = 1.0  # stored reward = scale * reward; argmax policy is unchanged
    behavior: str = "egreedy"
    prefill: float = 0.0
    train_every: int = 1
    learn_start: int = 10  # in batches
    eval_every: int = 500
    eval_episodes: int = 10
    eval_seed_base: int = 1_000_000
    checkpoint_every: int = 500
    seed: int = 0
    conv_channels: tuple[int, ...] = (16, 32, 32)
    fc: tuple[int, ...] = (256, 128, 64)
    padding: int = 0
    strict_determinism: bool = False

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if self.behavior not in BEHAVIORS:
            raise ValueError(f"behavior must be one of {BEHAVIORS}")
        if not 0.0 <= self.prefill <= 1.0:
            raise ValueError("prefill is a fraction of capacity in [0, 1]")
        if self.batch_size > self.buffer_capacity:
            raise ValueError("batch_size cannot exceed buffer capacity")
        if not self.reward_scale > 0:
            raise ValueError("reward_scale must be positive")
        if self.episodes < 0 or self.train_every < 1 or self.target_sync < 1:
            raise ValueError("episodes >= 0, train_every >= 1 and target_sync >= 1 required")
        self.conv_channels = tuple(self.conv_channels)
        self.fc = tuple(self.fc)

    def epsilon(self, episode: int) -> float:
        span = max(1.0, self.eps_fraction * self.episodes)
        frac = min(1.0, episode / span)
        return self.eps_start + frac * (self.eps_end - self.eps_start)

    def beta(self, episode: int) -> float:
        frac = min(1.0, episode / max(1, self.episodes))
        return self.per_beta_start + frac * (1.0 - self.per_beta_start)

    def eval_seeds(self) -> list[int]:
        return [self.eval_seed_base + k for k in range(self.eval_episodes)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["conv_channels"] = list(self.conv_channels)
        d["fc"] = list(self.fc)
        return d


def set_determinism(seed: int, strict: bool) -> None:
    torch.manual_seed(seed)
    if strict:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)


@dataclass
class TrainResult:
    episodes: int
    best_eval_ptc: float | None
    log_path: Path
    checkpoints: list[Path] = field(default_factory=list)


class Trainer:
    """Owns team networks, buffers and RNG streams for one training run."""

    def __init__(self, env: EnvSpec, config: TrainerConfig, out_dir: str | Path):
        self.env = env
        self.cfg = config
        self.out = Path(out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        set_determinism(config.seed, config.strict_determinism)
        h, w = env.grid.shape
        self.spec = NetSpec(
            height=h,
            width=w,
            in_channels=N_CHANNELS,
            n_actions=N_ACTIONS,
            conv_channels=config.conv_channels,
            padding=config.padding,
            fc=config.fc,
        )
        self.teams = {name: Team.build(self.spec, config.lr) for name in TEAMS}
        self.buffers = {
            name: PrioritizedReplayBuffer(
                config.buffer_capacity,
                (N_CHANNELS, h, w),
                n_actions=N_ACTIONS,
                alpha=config.per_alpha,
                eps=config.per_eps,
            )
            for name in TEAMS
        }
        self.act_rng = substream(config.seed, "train-behavior")
        self.sample_rng = substream(config.seed, "train-replay")
        self.episode = 0
        self.env_steps = 0
        self.best_ptc: float | None = None
        self.first_grad_fill: dict[str, int] = {}
        self.audit: list | None = None

    # -- persistence ----------------------------------------------------------

    def _extra(self) -> dict:
        return {
            "episode": self.episode,
            "env_steps": self.env_steps,
            "best_eval_ptc": self.best_ptc,
            "config": self.cfg.to_dict(),
            "rng": {
                "behavior": self.act_rng.bit_generator.state,
                "replay": self.sample_rng.bit_generator.state,
                "torch": torch.get_rng_state(),
            },
        }

    def save(self, name: str) -> Path:
        path = self.out / name
        save_checkpoint(path, self.teams, self.spec, **self._extra())
        return path

    def restore(self, path: str | Path) -> None:
        teams, spec, payload = load_checkpoint(path, lr=self.cfg.lr)
        if spec != self.spec:
            raise ValueError("checkpoint network does not match this configuration")
        self.teams = teams
        self.episode = payload["episode"]
        self.env_steps = payload["env_steps"]
        self.best_ptc = payload["best_eval_ptc"]
        self.act_rng.bit_generator.state = payload["rng"]["behavior"]
        self.sample_rng.bit_generator.state = payload["rng"]["replay"]
        torch.set_rng_state(payload["rng"]["torch"])

    # -- episodes -------------------------------------------------------------

    def _store(self, team: str, limit: int | None, *transition) -> None:
        buf = self.buffers[team]
        if limit is None or len(buf) < limit:
            buf.add(*transition)

    def _learn(self, epsilon_beta: float) -> None:
        cfg = self.cfg
        start = max(cfg.batch_size, cfg.learn_start * cfg.batch_size)
        for name in TEAMS:
            buf = self.buffers[name]
            if len(buf) < start:
                continue
            team = self.teams[name]
            self.first_grad_fill.setdefault(name, len(buf))
            loss = train_step(
                buf,
                team.online,
                team.target,
                team.optimizer,
                cfg.batch_size,
                cfg.gamma,
                epsilon_beta,
                self.sample_rng,
                audit=self.audit,
            )
            team.losses.append(loss)
            team.grad_steps += 1
            if team.grad_steps % cfg.target_sync == 0:
                team.sync()

    def play(self, seed: int, mode: str, epsilon: float = 0.0, beta: float = 1.0, limit: int | None = None) -> None:
        """One episode that feeds the buffers.

        ``mode='prefill'`` drives every agent with the greedy baseline and stops
        adding once a buffer holds ``limit`` transitions; ``mode='learn'`` uses
        the behaviour policy and takes gradient steps on the configured cadence.
        """
        state = new_episode(self.env.grid, self.env.fleet, seed, self.env.dyn, self.env.horizon)
        tracker = ObservationTracker(state)
        obs = tracker.observe_all(state)
        mixed = self.cfg.behavior == "greedy-mix"
        while not state.done:
            if mode == "prefill":
                if all(len(self.buffers[t]) >= limit for t in self._present()):
                    return
                choose = greedy
            else:
                q = team_q_values(state, self.teams, obs)

                def choose(st, n, mask):
                    return behavior_action(q[n], mask, epsilon, mixed, lambda: greedy(st, n, mask), self.act_rng)

            actions, _ = select_actions(state, choose)
            result = apply_actions(state, actions)
            rewards, _ = fleet_rewards(state, result, self.env.weights)
            tracker.update(state)
            next_obs = tracker.observe_all(state)
            done = state.done
            for n, a in enumerate(actions):
                if a == HOLD:
                    continue
                next_mask = np.ones(N_ACTIONS, bool) if done else legal_actions(state, n)
                self._store(team_of(state, n), limit, obs[n], a, self.cfg.reward_scale * rewards[n], next_obs[n], next_mask, done)
            obs = next_obs
            if mode == "learn":
                self.env_steps += 1
                if self.env_steps % self.cfg.train_every == 0:
                    self._learn(beta)

    def _present(self) -> list[str]:
        sizes = {"scout": self.env.fleet.n_scouts, "cleaner": self.env.fleet.n_cleaners}
        return [t for t in TEAMS if sizes[t] > 0]

    def prefill(self) -> None:
        target = int(round(self.cfg.prefill * self.cfg.buffer_capacity))
        if target <= 0:
            return
        k = 0
        while not all(len(self.buffers[t]) >= target for t in self._present()):
            self.play(episode_seed(self.cfg.seed, "prefill", k), "prefill", limit=target)
            k += 1
        log.info("prefilled buffers to %s", {t: len(b) for t, b in self.buffers.items()})

    def evaluate(self, seeds: list[int] | None = None) -> tuple[float, float]:
        seeds = self.cfg.eval_seeds() if seeds is None else seeds
        policy = DQNPolicy(self.teams)
        final_ptc, final_mse = [], []
        for s in seeds:
            trace = run_episode(self.env, policy, s)
            final_ptc.append(float(ptc(trace.collected, trace.n_initial)[-1]))
            final_mse.append(trace.mse[-1])
        return float(np.mean(final_ptc)), float(np.mean(final_mse))

    def run(self, resume: bool = False) -> TrainResult:
        cfg = self.cfg
        log_path = self.out / "train_log.csv"
        latest = self.out / "checkpoint_latest.pt"
        if resume and latest.is_file():
            self.restore(latest)
            mode = "a"
        else:
            mode = "w"
        ckpts = [] if resume else [self.save("checkpoint_initial.pt")]
        if cfg.episodes == 0:
            return TrainResult(0, None, log_path, ckpts)

        self.prefill()
        with open(log_path, mode, newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if mode == "w":
                writer.writerow(LOG_COLUMNS)
            while self.episode < cfg.episodes:
                e = self.episode
                eps = cfg.epsilon(e)
                for team in self.teams.values():
                    team.losses.clear()
                self.play(episode_seed(cfg.seed, "train", e), "learn", epsilon=eps, beta=cfg.beta(e))
                self.episode = e + 1

                row = [self.episode]
                for name in TEAMS:
                    losses = self.teams[name].losses
                    row.append(repr(float(np.mean(losses))) if losses else "")
                if self.episode % cfg.eval_every == 0 or self.episode == cfg.episodes:
                    p, m = self.evaluate()
                    row += [repr(p), repr(m)]
                    if self.best_ptc is None or p > self.best_ptc:
                        self.best_ptc = p
                        ckpts.append(self.save("checkpoint_best.pt"))
                    log.info("episode %d eval PTC %.2f MSE %.5f eps %.3f", self.episode, p, m, eps)
                else:
                    row += ["", ""]
                row.append(repr(eps))
                writer.writerow(row)
                fh.flush()
                if self.episode % cfg.checkpoint_every == 0 or self.episode == cfg.episodes:
                    self.save("checkpoint_latest.pt")
        ckpts.append(self.out / "checkpoint_latest.pt")
        return TrainResult(self.episode, self.best_ptc, log_path, ckpts)


def train(env: EnvSpec, config: TrainerConfig, out_dir: str | Path, resume: bool = False) -> TrainResult:
    return Trainer(env, config, out_dir).run(resume=resume)
