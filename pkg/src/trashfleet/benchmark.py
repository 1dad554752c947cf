"""Table-style benchmark: every policy on the same seeded episodes."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .metrics import ci95
from .policies import Policy
from .rollout import EnvSpec, EpisodeTrace, run_episode

PolicyFactory = Callable[[], Policy]

REPORT_COLUMNS = [
    "policy",
    "scenario",
    "episodes",
    "ptc_mean",
    "ptc_ci95",
    "mse_mean",
    "mse_ci95",
    "decision_ms",
]


@dataclass
class PolicyResult:
    policy: str
    scenario: str
    traces: list[EpisodeTrace] = field(default_factory=list)

    @property
    def final_ptc(self) -> np.ndarray:
        return np.array([t.ptc()[-1] for t in self.traces])

    @property
    def final_mse(self) -> np.ndarray:
        return np.array([t.mse[-1] for t in self.traces])

    def row(self) -> dict:
        ms = [v for t in self.traces for v in t.decision_ms]
        return {
            "policy": self.policy,
            "scenario": self.scenario,
            "episodes": len(self.traces),
            "ptc_mean": float(self.final_ptc.mean()),
            "ptc_ci95": ci95(self.final_ptc),
            "mse_mean": float(self.final_mse.mean()),
            "mse_ci95": ci95(self.final_mse),
            "decision_ms": float(np.mean(ms)) if ms else float("nan"),
        }


@dataclass
class BenchmarkReport:
    results: list[PolicyResult]
    seeds: list[int]

    def rows(self) -> list[dict]:
        return [r.row() for r in self.results]

    def get(self, policy: str, scenario: str) -> PolicyResult:
        for r in self.results:
            if r.policy == policy and r.scenario == scenario:
                return r
        raise KeyError((policy, scenario))

    def write_csv(self, path: str | Path, timing: bool = True) -> None:
        cols = REPORT_COLUMNS if timing else REPORT_COLUMNS[:-1]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
            w.writeheader()
            for row in self.rows():
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})

    def write_json(self, path: str | Path, timing: bool = True) -> None:
        def trace(t: EpisodeTrace) -> dict:
            d = t.to_dict()
            if not timing:
                d.pop("decision_ms")
            return d

        payload = {
            "seeds": self.seeds,
            "summary": [{k: v for k, v in row.items() if timing or k != "decision_ms"} for row in self.rows()],
            "traces": {f"{r.policy}/{r.scenario}": [trace(t) for t in r.traces] for r in self.results},
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)

    def plot(self, path: str | Path) -> None:
        """PTC and MSE against step with shaded 95% bands, one row per scenario."""
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        scenarios = sorted({r.scenario for r in self.results})
        fig, axes = plt.subplots(len(scenarios), 2, figsize=(10, 3.5 * len(scenarios)), squeeze=False)
        for row, sc in enumerate(scenarios):
            for r in (r for r in self.results if r.scenario == sc):
                for col, series in enumerate(
                    (np.array([t.ptc() for t in r.traces]), np.array([t.mse for t in r.traces]))
                ):
                    mean = series.mean(axis=0)
                    half = np.array([ci95(series[:, k]) for k in range(series.shape[1])])
                    steps = np.arange(1, series.shape[1] + 1)
                    ax = axes[row, col]
                    ax.plot(steps, mean, label=r.policy)
                    ax.fill_between(steps, mean - half, mean + half, alpha=0.2)
            axes[row, 0].set_ylabel(f"{sc}\nPTC (%)")
            axes[row, 1].set_ylabel("MSE")
            for ax in axes[row]:
                ax.set_xlabel("step")
        axes[0, 0].legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def _play(args) -> EpisodeTrace:
    env, factory, seed, timed = args
    return run_episode(env, factory(), seed, timed=timed)


def run_policy(
    env: EnvSpec,
    factory: PolicyFactory,
    seeds: list[int],
    jobs: int = 1,
    timed: bool = True,
) -> PolicyResult:
    """Evaluate a fresh policy instance per episode.

    Parallel workers are only used for untimed runs so latency numbers are not
    polluted by contention.
    """
    name = factory().name
    if jobs > 1 and not timed:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(_play, [(env, factory, s, False) for s in seeds]))
    else:
        traces = [run_episode(env, factory(), s, timed=timed) for s in seeds]
    return PolicyResult(name, env.grid.name, traces)


def run_benchmark(
    policies: dict[str, PolicyFactory],
    envs: list[EnvSpec],
    n_episodes: int = 100,
    seeds: list[int] | None = None,
    jobs: int = 1,
    timed: bool = True,
) -> BenchmarkReport:
    """Run each policy on each scenario over one shared seed list."""
    seeds = list(range(n_episodes)) if seeds is None else list(seeds)
    results = []
    for env in envs:
        for label, factory in policies.items():
            t0 = time.perf_counter()
            res = run_policy(env, factory, seeds, jobs=jobs, timed=timed)
            res.policy = label
            for t in res.traces:
                t.policy = label
            res.wall_s = time.perf_counter() - t0
            results.append(res)
    return BenchmarkReport(results, seeds)
