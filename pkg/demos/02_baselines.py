"""
Four hand-written planners on both ports
=========================================

Run the random walker, the lawn mower, PSO and the greedy planner over the
same seeded episodes on both bundled scenarios, then plot the mean PTC and
MSE curves with 95% bands.

Usage: python demos/02_baselines.py [episodes] [out_dir]
"""

import sys
from pathlib import Path

from trashfleet.benchmark import run_benchmark
from trashfleet.policies import make_baseline
from trashfleet.rollout import EnvSpec
from trashfleet.scenarios import load_scenario

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 20
out = Path(sys.argv[2] if len(sys.argv) > 2 else "runs/demo_baselines")
out.mkdir(parents=True, exist_ok=True)

# Every planner sees the same trash, wind and drift for a given seed.
factories = {name: (lambda n=name: make_baseline(n)) for name in ("random", "lawnmower", "pso", "greedy")}
envs = [EnvSpec(load_scenario("scenario_a")), EnvSpec(load_scenario("scenario_b"))]
report = run_benchmark(factories, envs, n_episodes=episodes)

for row in report.rows():
    print(
        f"{row['scenario']}  {row['policy']:>9}: PTC {row['ptc_mean']:6.2f} +/- {row['ptc_ci95']:5.2f}"
        f"   MSE {row['mse_mean']:.5f}   {row['decision_ms']:.2f} ms/decision"
    )

# The corridor in scenario B traps the greedy planner more often than the open basin.
a = report.get("greedy", "scenario_a").final_ptc.mean()
b = report.get("greedy", "scenario_b").final_ptc.mean()
print(f"greedy: scenario A {a:.1f} vs scenario B {b:.1f}")

report.write_csv(out / "report.csv")
report.plot(out / "curves.png")
print(f"wrote {out / 'report.csv'} and {out / 'curves.png'}")
