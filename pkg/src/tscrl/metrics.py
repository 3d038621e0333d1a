"""Seven-metric evaluation of episode logs and baseline comparisons.

Metrics per episode: total negative reward (tnr, sum of negative rewards),
total accumulative wait (tawt, sum of the wait totals observed at each
decision instant), expected wait per vehicle (ewpv, final accumulated wait
averaged over every generated vehicle), and the time-averaged queue
length of each approach (aql E/W/N/S, sampled every simulated second).
Sums use math.fsum, so every metric is independent of episode ordering.

Improvement sign convention: positive always means better than the
baseline -- for tnr (negative-valued) that is 100*(|base|-|agent|)/|base|,
for the positive-valued metrics 100*(base-agent)/base.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence

from .agents import EpisodeLog
from .simulation import Direction
from .traffic import ArrivalSchedule, ScenarioConfig, generate_schedule

METRIC_NAMES = ("tnr", "tawt", "ewpv", "aql_E", "aql_W", "aql_N", "aql_S")

# Directions behind the aql_* columns, in report order.
_AQL_ORDER = (Direction.EAST, Direction.WEST, Direction.NORTH, Direction.SOUTH)


@dataclass(frozen=True)
class MetricsReport:
    tnr: float
    tawt: float
    ewpv: float
    aql_e: float
    aql_w: float
    aql_n: float
    aql_s: float

    def values(self) -> tuple[float, ...]:
        """Metric values in METRIC_NAMES order."""
        return (self.tnr, self.tawt, self.ewpv,
                self.aql_e, self.aql_w, self.aql_n, self.aql_s)


def tnr(log: EpisodeLog) -> float:
    """Sum of the negative rewards received over the episode."""
    return math.fsum(min(0.0, r) for r in log.rewards)


def tawt(log: EpisodeLog) -> float:
    """Sum of the accumulated-wait observations at every decision instant."""
    return math.fsum(log.awt_series)


def ewpv(log: EpisodeLog) -> float:
    """Final accumulated wait averaged over all generated vehicles.

    Vehicles that already left keep their final wait; vehicles never
    inserted count their queued-outside delay; vehicles that never waited
    contribute zero.
    """
    if log.n_vehicles == 0:
        raise ValueError("ewpv is undefined for an episode with no vehicles")
    return math.fsum(log.final_waits) / log.n_vehicles


def aql(log: EpisodeLog, direction: Direction) -> float:
    """Mean of the per-second stationary-vehicle counts for one approach."""
    if not log.tick_queues:
        return 0.0
    return math.fsum(q[direction] for q in log.tick_queues) / len(log.tick_queues)


def report(log: EpisodeLog) -> MetricsReport:
    return MetricsReport(tnr(log), tawt(log),
                         0.0 if log.n_vehicles == 0 else ewpv(log),
                         *(aql(log, d) for d in _AQL_ORDER))


def mean_report(reports: Sequence[MetricsReport]) -> MetricsReport:
    if not reports:
        raise ValueError("need at least one report")
    cols = list(zip(*(r.values() for r in reports)))
    return MetricsReport(*(math.fsum(c) / len(reports) for c in cols))


@dataclass(frozen=True)
class ComparisonReport:
    """Per-metric (agent, baseline, improvement %) plus the mean over the
    metrics whose improvement is defined."""

    rows: dict[str, tuple[float, float, float | None]]
    mean_improvement: float | None

    def improvement(self, metric: str) -> float | None:
        return self.rows[metric][2]


def _improvement(name: str, agent: float, base: float) -> float | None:
    if base == 0.0:
        return None
    if name == "tnr":
        return 100.0 * (abs(base) - abs(agent)) / abs(base)
    return 100.0 * (base - agent) / base


def percent_improvement(agent: MetricsReport, base: MetricsReport) -> ComparisonReport:
    rows: dict[str, tuple[float, float, float | None]] = {}
    defined: list[float] = []
    for name, a, b in zip(METRIC_NAMES, agent.values(), base.values()):
        pct = _improvement(name, a, b)
        rows[name] = (a, b, pct)
        if pct is None:
            warnings.warn(f"baseline {name} is zero; improvement undefined "
                          "and excluded from the aggregate", stacklevel=2)
        else:
            defined.append(pct)
    mean = math.fsum(defined) / len(defined) if defined else None
    return ComparisonReport(rows, mean)


Controller = Callable[[ArrivalSchedule, int], EpisodeLog]


def evaluate(controller: Controller, scenario: ScenarioConfig,
             episodes: int = 5, seeds: Sequence[int] | None = None
             ) -> tuple[MetricsReport, list[MetricsReport]]:
    """Run a controller on freshly generated traffic and average per metric.

    ``seeds`` defaults to 1..episodes; the same seeds against two
    controllers give a paired comparison on identical schedules.
    """
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    chosen = list(seeds) if seeds is not None else list(range(1, episodes + 1))
    if len(chosen) != episodes:
        raise ValueError("need exactly one seed per episode")
    per_episode = []
    for s in chosen:
        schedule = generate_schedule(scenario, s)
        log = controller(schedule, s)
        per_episode.append(report(log))
    return mean_report(per_episode), per_episode


# -- rendering ---------------------------------------------------------------


def comparison_csv_rows(per_scenario: dict[str, ComparisonReport]) -> list[list[str]]:
    """Rows for the comparison CSV: metric rows, then scenario means."""
    scenarios = list(per_scenario)
    header = ["metric"]
    for s in scenarios:
        header += [f"{s}_agent", f"{s}_baseline", f"{s}_improvement_pct"]
    rows = [header]
    for name in METRIC_NAMES:
        row = [name]
        for s in scenarios:
            a, b, pct = per_scenario[s].rows[name]
            row += [repr(a), repr(b), "" if pct is None else repr(pct)]
        rows.append(row)
    mean_row = ["mean_improvement"]
    for s in scenarios:
        m = per_scenario[s].mean_improvement
        mean_row += ["", "", "" if m is None else repr(m)]
    rows.append(mean_row)
    return rows


def comparison_table(per_scenario: dict[str, ComparisonReport]) -> str:
    """Aligned text table: one metric per row, value and % per scenario."""
    scenarios = list(per_scenario)
    headers = ["Performance Measure"]
    for s in scenarios:
        headers += [s, "%"]
    body: list[list[str]] = []
    for name in METRIC_NAMES:
        row = [name]
        for s in scenarios:
            a, _, pct = per_scenario[s].rows[name]
            row += [f"{a:.4f}", "n/a" if pct is None else f"{pct:+.1f}"]
        body.append(row)
    mean_row = ["mean improvement"]
    for s in scenarios:
        m = per_scenario[s].mean_improvement
        mean_row += ["", "n/a" if m is None else f"{m:+.1f}"]
    body.append(mean_row)
    widths = [max(len(r[i]) for r in [headers] + body) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"
