"""Command line: ``python -m trashfleet {train,evaluate,rollout}``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .benchmark import run_benchmark
from .learner.agent import DQNPolicy
from .learner.trainer import BEHAVIORS, set_determinism, train
from .policies import BASELINES, make_baseline
from .rollout import episode_seed, run_episode
from .world import WorldError

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2
DRL_POLICIES = ("dddql", "dddql-greedy")
POLICIES = DRL_POLICIES + tuple(BASELINES)

log = logging.getLogger("trashfleet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML file overriding defaults; flags override the file")
    p.add_argument("--scenario", help="bundled scenario name or path to a .map file")
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--strict-determinism", action="store_true", help="single-threaded, deterministic kernels")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="trashfleet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train both team networks")
    _common(p)
    p.add_argument("--episodes", type=int)
    p.add_argument("--prefill", type=float, help="fraction of buffer capacity filled by greedy play first")
    p.add_argument("--behavior", choices=BEHAVIORS)
    p.add_argument("--buffer-capacity", type=int)
    p.add_argument("--train-every", type=int)
    p.add_argument("--resume", action="store_true", help="continue from checkpoint_latest.pt in --out")

    p = sub.add_parser("evaluate", help="benchmark policies on a shared seed list")
    _common(p)
    p.add_argument("--policy", required=True, help=f"comma-separated subset of {','.join(POLICIES)}")
    p.add_argument("--episodes", type=int, default=100)
    p.add_argument("--checkpoint")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("rollout", help="play one episode and write its JSONL log and path plot")
    _common(p)
    p.add_argument("--policy", required=True, choices=POLICIES)
    p.add_argument("--checkpoint")
    p.add_argument("--no-plot", action="store_true")
    return parser


def _run_config(args) -> cfgmod.RunConfig:
    cfg = cfgmod.load(args.config) if args.config else cfgmod.RunConfig()
    trainer = {}
    for flag, key in (
        ("episodes", "episodes"),
        ("prefill", "prefill"),
        ("behavior", "behavior"),
        ("buffer_capacity", "buffer_capacity"),
        ("train_every", "train_every"),
    ):
        if args.command == "train" and getattr(args, flag, None) is not None:
            trainer[key] = getattr(args, flag)
    if args.strict_determinism:
        trainer["strict_determinism"] = True
    over = {"scenario": args.scenario, "seed": args.seed, "horizon": args.horizon, "out": args.out}
    if trainer:
        over["trainer"] = trainer
    cfg = cfg.override(**over)
    return cfg.override(trainer={"seed": cfg.seed})


def _policy_factory(name: str, checkpoint: str | None):
    if name in DRL_POLICIES:
        if not checkpoint:
            raise UsageError(f"policy {name} needs --checkpoint")
        path = Path(checkpoint)
        if not path.is_file():
            raise FileNotFoundError(f"checkpoint not found: {path}")
        teams = DQNPolicy.from_checkpoint(path).teams

        def make():
            return DQNPolicy(teams, name=name)

        return make
    if name not in BASELINES:
        raise UsageError(f"unknown policy {name!r}; choose from {', '.join(POLICIES)}")
    return lambda: make_baseline(name)


def cmd_train(args) -> int:
    cfg = _run_config(args)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(cfg.dump())
    result = train(cfg.env(), cfg.trainer, out, resume=args.resume)
    print(f"trained {result.episodes} episodes; outputs in {out}")
    return EXIT_OK


def _write_trace_csv(path: Path, res) -> None:
    with open(path, "w") as fh:
        fh.write("seed,K,collected_total,final_ptc,final_mse,ptc_per_step,mse_per_step\n")
        for t in res.traces:
            p = t.ptc()
            fh.write(
                f"{t.seed},{t.n_initial},{t.collected_total},{p[-1]!r},{t.mse[-1]!r},"
                f"{' '.join(repr(float(v)) for v in p)},{' '.join(repr(float(v)) for v in t.mse)}\n"
            )


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    names = [n.strip() for n in args.policy.split(",") if n.strip()]
    if not names:
        raise UsageError("no policy given")
    if args.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    factories = {n: _policy_factory(n, args.checkpoint) for n in names}
    set_determinism(cfg.seed, cfg.trainer.strict_determinism)
    seeds = [episode_seed(cfg.seed, "evaluate", k) for k in range(args.episodes)]
    strict = cfg.trainer.strict_determinism
    report = run_benchmark(factories, [cfg.env()], seeds=seeds, jobs=args.jobs, timed=args.jobs <= 1)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    # Wall-clock latency is never reproducible, so strict runs keep it out of the report files.
    report.write_csv(out / "report.csv", timing=not strict)
    report.write_json(out / "report.json", timing=not strict)
    if strict:
        timing = {f"{r.policy}/{r.scenario}": r.row()["decision_ms"] for r in report.results}
        (out / "timing.json").write_text(json.dumps(timing, indent=1))
    for res in report.results:
        _write_trace_csv(out / f"traces_{res.policy}_{res.scenario}.csv", res)
    if not args.no_plot:
        report.plot(out / "curves.png")
    for row in report.rows():
        print(
            f"{row['policy']:>13} {row['scenario']}: PTC {row['ptc_mean']:6.2f} +/- {row['ptc_ci95']:.2f}  "
            f"MSE {row['mse_mean']:.5f} +/- {row['mse_ci95']:.5f}  {row['decision_ms']:.3f} ms"
        )
    return EXIT_OK


def plot_paths(path: Path, grid, positions: list, remaining_cells: np.ndarray, specs) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 6))
    ax.imshow(grid.navigable, cmap="Blues", vmin=-1, vmax=1.5, origin="upper")
    track = np.array(positions)  # (T+1, N, 2)
    for n, spec in enumerate(specs):
        style = "-" if spec.can_clean else "--"
        ax.plot(track[:, n, 1], track[:, n, 0], style, lw=1.2, label=f"{'cleaner' if spec.can_clean else 'scout'} {n}")
    if len(remaining_cells):
        ax.scatter(remaining_cells[:, 1], remaining_cells[:, 0], s=14, c="yellow", edgecolors="k", lw=0.4, label="trash left")
    ax.legend(fontsize="x-small", loc="upper right")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_rollout(args) -> int:
    cfg = _run_config(args)
    factory = _policy_factory(args.policy, args.checkpoint)
    set_determinism(cfg.seed, cfg.trainer.strict_determinism)
    env = cfg.env()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / f"rollout_{args.policy}_{env.grid.name}_{cfg.seed}.jsonl"
    positions = []
    final = {}

    def on_step(state, result):
        positions.append(state.positions.tolist())
        final["state"] = state

    with open(log_path, "w") as fh:
        trace = run_episode(env, factory(), cfg.seed, log=fh, on_step=on_step)
    with open(log_path) as fh:
        header = json.loads(fh.readline())
    positions.insert(0, header["positions"])
    if not args.no_plot:
        state = final["state"]
        cells = np.argwhere(state.truth > 0)
        plot_paths(log_path.with_suffix(".png"), env.grid, positions, cells, state.specs)
    print(f"PTC {trace.ptc()[-1]:.2f}  log {log_path}")
    return EXIT_OK


COMMANDS = {"train": cmd_train, "evaluate": cmd_evaluate, "rollout": cmd_rollout}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"trashfleet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, ValueError, RuntimeError, MemoryError, WorldError) as exc:
        print(f"trashfleet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
