"""Desk-scale training-and-comparison protocol.

A scaled-down counterpart of the full programme that finishes on a
workstation: 1800 s episodes, one third of the traffic volumes
(200/1000/500/500), 80 training episodes with proportionally scaled
exploration breakpoints (24/56/80). Each trained agent is evaluated on
four scenarios x five paired eval seeds against the fixed-time baseline.

Used by the acceptance suite and runnable standalone via
``scripts/desk_scale.py``. Independent training seeds can run in parallel
processes (each job re-derives everything from its seed).
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from . import metrics
from .agents import TrainingConfig, fixed_controller, greedy_controller, train
from .metrics import ComparisonReport, MetricsReport
from .traffic import SCENARIO_NAMES

DESK_EPISODE_LENGTH = 1800
DESK_VOLUMES = {"low": 200, "high": 1000, "ew": 500, "ns": 500}
DESK_EPISODES = 80
DESK_BREAKPOINTS = (24, 56, 80)
DESK_TRAIN_SEEDS = (1, 2, 3, 4, 5)
DESK_EVAL_SEEDS = (101, 102, 103, 104, 105)


def desk_training_config(agent_kind: str, seed: int) -> TrainingConfig:
    return TrainingConfig(
        agent_kind=agent_kind,
        episodes=DESK_EPISODES,
        episode_length=DESK_EPISODE_LENGTH,
        epsilon_breakpoints=DESK_BREAKPOINTS,
        seed=seed,
        volumes=dict(DESK_VOLUMES),
    )


def _desk_scenarios(config: TrainingConfig) -> dict[str, object]:
    return {name: config.scenario(name) for name in SCENARIO_NAMES}


def baseline_reports(eval_seeds=DESK_EVAL_SEEDS) -> dict[str, MetricsReport]:
    """Fixed-time mean report per scenario on the shared eval schedules."""
    config = desk_training_config("time", 0)  # only scenario knobs are used
    controller = fixed_controller()
    out = {}
    for name, scen in _desk_scenarios(config).items():
        mean, _ = metrics.evaluate(controller, scen,
                                   episodes=len(eval_seeds), seeds=list(eval_seeds))
        out[name] = mean
    return out


@dataclass(frozen=True)
class DeskResult:
    """Outcome of one (agent kind, training seed) protocol run."""

    agent_kind: str
    train_seed: int
    comparisons: dict[str, ComparisonReport]  # per scenario

    def mean_metric_improvement(self, metric: str) -> float:
        vals = [c.improvement(metric) for c in self.comparisons.values()]
        if any(v is None for v in vals):
            raise ValueError(f"improvement for {metric} undefined in some scenario")
        return sum(vals) / len(vals)


def run_desk_protocol(agent_kind: str, train_seed: int,
                      baselines: dict[str, MetricsReport] | None = None,
                      eval_seeds=DESK_EVAL_SEEDS) -> DeskResult:
    """Train one agent at desk scale and compare it to the baseline."""
    config = desk_training_config(agent_kind, train_seed)
    params, _ = train(config)
    controller = greedy_controller(params, agent_kind)
    if baselines is None:
        baselines = baseline_reports(eval_seeds)
    comparisons = {}
    for name, scen in _desk_scenarios(config).items():
        agent_mean, _ = metrics.evaluate(controller, scen,
                                         episodes=len(eval_seeds),
                                         seeds=list(eval_seeds))
        comparisons[name] = metrics.percent_improvement(agent_mean, baselines[name])
    return DeskResult(agent_kind, train_seed, comparisons)


def _job(args: tuple[str, int, dict[str, MetricsReport], tuple[int, ...]]) -> DeskResult:
    kind, seed, baselines, eval_seeds = args
    return run_desk_protocol(kind, seed, baselines, eval_seeds)


def run_desk_suite(agent_kind: str, train_seeds=DESK_TRAIN_SEEDS,
                   eval_seeds=DESK_EVAL_SEEDS, jobs: int = 1,
                   baselines: dict[str, MetricsReport] | None = None) -> list[DeskResult]:
    """Run the protocol for several training seeds, optionally in parallel."""
    if baselines is None:
        baselines = baseline_reports(eval_seeds)
    work = [(agent_kind, s, baselines, tuple(eval_seeds)) for s in train_seeds]
    if jobs <= 1 or len(work) <= 1:
        return [_job(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_job, work))
