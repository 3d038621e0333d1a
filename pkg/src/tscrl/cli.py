"""Command-line entry point: gen-traffic, train, eval, compare.

Every run resolves a RunConfig (defaults < config file < flags), executes,
and leaves a ``run_manifest.txt`` in the output directory from which the
run can be reproduced byte for byte: the manifest is itself a valid config
file (its ``manifest.*`` metadata lines are ignored on parse).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys
from pathlib import Path

from . import metrics
from .agents import (EpisodeRecord, fixed_controller, greedy_controller, train)
from .config import ConfigError, RunConfig, parse_config
from .network import NetworkSpec
from .persistence import (ARTIFACT_VERSION, file_checksum, load_model,
                          read_model_dims, save_model, write_manifest)
from .rng import derive_seed
from .traffic import generate_schedule, write_schedule_csv, _SCHEDULE_HEADER
from .metrics import METRIC_NAMES

TRAIN_CSV_HEADER = ["episode", "epsilon", "total_reward", "tnr", "tawt", "ewpv",
                    "aql_E", "aql_W", "aql_N", "aql_S"]
TRACE_CSV_HEADER = ["tick", "phase", "ql_N", "ql_W", "ql_E", "ql_S", "awt"]


def _schedules_digest(schedules) -> str:
    digest = hashlib.sha256()
    for schedule in schedules:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(_SCHEDULE_HEADER)
        for e in schedule.entries:
            writer.writerow([repr(e.depart_time), e.origin.name,
                             e.movement.name, e.destination.name])
        digest.update(buf.getvalue().encode())
    return digest.hexdigest()


def _eval_seeds(config: RunConfig) -> list[int]:
    return [derive_seed(config.seed, "eval", i)
            for i in range(1, config.eval_episodes + 1)]


def _write_run_manifest(config: RunConfig, command: str, out_dir: Path,
                        weights_checksum: str, schedule_checksum: str) -> None:
    lines = config.as_lines()
    meta = {
        "manifest.command": command,
        "manifest.artifact_version": ARTIFACT_VERSION,
        "manifest.weights_checksum": weights_checksum,
        "manifest.schedule_checksum": schedule_checksum,
    }
    body = "\n".join(lines + [f"{k} = {v}" for k, v in meta.items()]) + "\n"
    (out_dir / "run_manifest.txt").write_text(body)


def _metric_row(label: str, rep: metrics.MetricsReport) -> list[str]:
    return [label] + [repr(v) for v in rep.values()]


def _write_eval_csv(path: Path, seeds, per_episode, mean_rep) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + list(METRIC_NAMES))
        for s, rep in zip(seeds, per_episode):
            writer.writerow(_metric_row(f"seed_{s}", rep))
        writer.writerow(_metric_row("mean", mean_rep))


def _write_trace_csv(path: Path, log) -> None:
    """Per-tick trace: queue lengths per approach and total wait."""
    events = list(log.phase_events)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_CSV_HEADER)
        ev = 0
        phase = events[0][1] if events else 1
        for tick, (queues, awt) in enumerate(zip(log.tick_queues, log.tick_awt)):
            while ev < len(events) and events[ev][0] <= tick:
                phase = events[ev][1]
                ev += 1
            writer.writerow([tick, phase, queues[0], queues[1], queues[2],
                             queues[3], awt])


def _load_agent_params(config: RunConfig):
    if not config.model:
        raise ConfigError(f"--model is required for agent {config.agent!r}")
    path = Path(config.model)
    if not path.exists():
        raise ConfigError(f"model file not found: {path}")
    dims = read_model_dims(path)
    expected = NetworkSpec.for_agent(config.agent).input_dim
    if dims[0] != expected:
        raise ConfigError(
            f"model input width {dims[0]} does not match agent "
            f"{config.agent!r} (expected {expected})")
    return load_model(path)


def _controller(config: RunConfig, params, collect_tick_awt: bool = False):
    if config.agent == "fixed":
        return fixed_controller(base_green=config.base_green, yellow=config.yellow,
                                collect_tick_awt=collect_tick_awt)
    return greedy_controller(params, config.agent, enc_weights=config.enc_weights(),
                             base_green=config.base_green, yellow=config.yellow,
                             collect_tick_awt=collect_tick_awt)


# -- subcommands -------------------------------------------------------------


def cmd_gen_traffic(config: RunConfig) -> int:
    out_dir = config.out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    schedules = []
    for name in config.scenario_names():
        scen = config.scenario_cfg(name)
        schedule = generate_schedule(scen, config.seed)
        path = out_dir / f"schedule_{name}_seed{config.seed}.csv"
        write_schedule_csv(schedule, path)
        schedules.append(schedule)
        print(f"wrote {path} ({len(schedule)} vehicles)")
    _write_run_manifest(config, "gen-traffic", out_dir, "",
                        _schedules_digest(schedules))
    return 0


def cmd_train(config: RunConfig) -> int:
    if config.agent not in ("turn", "time"):
        raise ConfigError("train needs --agent turn or time")
    out_dir = config.out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    tc = config.training_config()
    enc = config.enc_weights()

    rows: list[list[str]] = []

    def progress(record: EpisodeRecord) -> None:
        rep = metrics.report(record.log)
        rows.append([str(record.episode), repr(record.epsilon),
                     repr(record.log.total_reward)] + [repr(v) for v in rep.values()])
        print(f"episode {record.episode:4d}  eps {record.epsilon:.3f}  "
              f"scenario {record.scenario:<4s}  reward {record.log.total_reward:.1f}")

    params, _ = train(tc, enc_weights=enc, progress=progress)

    model_path = Path(config.model) if config.model else out_dir / "model.bin"
    save_model(model_path, params)
    sidecar = {
        "agent": config.agent,
        "seed": str(config.seed),
        "artifact_version": ARTIFACT_VERSION,
        "input_dim": str(params.spec.input_dim),
        "output_dim": str(params.spec.output_dim),
        "hidden_dims": ",".join(str(d) for d in params.spec.hidden_dims),
        "episodes": str(config.episodes),
        "episode_length": str(config.episode_length),
        "gamma": str(config.gamma),
        "lr": str(config.lr),
        "batch": str(config.batch),
        "buffer_capacity": str(config.buffer_capacity),
        "base_green": str(config.base_green),
        "yellow": str(config.yellow),
        "epsilon_breakpoints": f"{config.eps_high_until},{config.eps_decay_until},"
                               f"{config.eps_final_episode}",
        "encoding_weights": config.encoding_weights,
    }
    write_manifest(str(model_path) + ".manifest", sidecar)

    log_path = out_dir / "training_log.csv"
    with open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAIN_CSV_HEADER)
        writer.writerows(rows)

    schedules = (generate_schedule(tc.rotation()[(e - 1) % 4],
                                   derive_seed(config.seed, "traffic", e))
                 for e in range(1, config.episodes + 1))
    _write_run_manifest(config, "train", out_dir,
                        file_checksum(model_path), _schedules_digest(schedules))
    print(f"wrote {model_path} and {log_path}")
    return 0


def cmd_eval(config: RunConfig) -> int:
    out_dir = config.out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    params = None if config.agent == "fixed" else _load_agent_params(config)
    controller = _controller(config, params, collect_tick_awt=config.trace)
    seeds = _eval_seeds(config)
    all_schedules = []
    for name in config.scenario_names():
        scen = config.scenario_cfg(name)
        per_episode = []
        for s in seeds:
            schedule = generate_schedule(scen, s)
            all_schedules.append(schedule)
            log = controller(schedule, s)
            per_episode.append(metrics.report(log))
            if config.trace:
                _write_trace_csv(out_dir / f"trace_{config.agent}_{name}_seed{s}.csv", log)
        mean_rep = metrics.mean_report(per_episode)
        path = out_dir / f"eval_{config.agent}_{name}.csv"
        _write_eval_csv(path, seeds, per_episode, mean_rep)
        print(f"wrote {path}")
    _write_run_manifest(config, "eval", out_dir,
                        file_checksum(config.model) if config.model else "",
                        _schedules_digest(all_schedules))
    return 0


def cmd_compare(config: RunConfig) -> int:
    out_dir = config.out_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    params = None if config.agent == "fixed" else _load_agent_params(config)
    agent_ctrl = _controller(config, params)
    base_ctrl = fixed_controller(base_green=config.base_green, yellow=config.yellow)
    seeds = _eval_seeds(config)
    per_scenario: dict[str, metrics.ComparisonReport] = {}
    all_schedules = []
    for name in config.scenario_names():
        scen = config.scenario_cfg(name)
        agent_mean, _ = metrics.evaluate(agent_ctrl, scen,
                                         episodes=len(seeds), seeds=seeds)
        base_mean, _ = metrics.evaluate(base_ctrl, scen,
                                        episodes=len(seeds), seeds=seeds)
        per_scenario[name] = metrics.percent_improvement(agent_mean, base_mean)
        all_schedules.extend(generate_schedule(scen, s) for s in seeds)

    with open(out_dir / "comparison.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(metrics.comparison_csv_rows(per_scenario))
    (out_dir / "comparison.txt").write_text(metrics.comparison_table(per_scenario))

    with open(out_dir / "scenario_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scenario", "mean_improvement_pct"])
        for name, comp in per_scenario.items():
            writer.writerow([name, "" if comp.mean_improvement is None
                             else repr(comp.mean_improvement)])

    defined = [c.mean_improvement for c in per_scenario.values()
               if c.mean_improvement is not None]
    aggregate = sum(defined) / len(defined) if defined else None
    with open(out_dir / "aggregate_summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent", "mean_improvement_pct"])
        writer.writerow([config.agent, "" if aggregate is None else repr(aggregate)])

    _write_run_manifest(config, "compare", out_dir,
                        file_checksum(config.model) if config.model else "",
                        _schedules_digest(all_schedules))
    print((out_dir / "comparison.txt").read_text())
    return 0


# -- argument plumbing ---------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key = value config file")
    sub.add_argument("--agent", choices=["turn", "time", "fixed"])
    sub.add_argument("--scenario", choices=["low", "high", "ew", "ns", "all"])
    sub.add_argument("--episodes", type=int)
    sub.add_argument("--episode-length", dest="episode_length", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--model")
    sub.add_argument("--out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tscrl",
        description="Adaptive traffic-signal control lab: train and evaluate "
                    "deep-Q signal controllers against a fixed-time baseline.")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, fn in (("gen-traffic", cmd_gen_traffic), ("train", cmd_train),
                     ("eval", cmd_eval), ("compare", cmd_compare)):
        sub = subs.add_parser(name)
        _add_common(sub)
        sub.set_defaults(func=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for key in
                 ("agent", "scenario", "episodes", "episode_length", "seed",
                  "model", "out")}
    try:
        config = parse_config(args.config, overrides)
        return args.func(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
