"""Seeded traffic scenario generation and routing.

Departure times are Weibull draws (shape 2 by default: demand rises fast
and decays slowly) with the scale set so the 99th percentile lands at the
episode end; draws past the end are resampled. Origins follow per-scenario
directional quotas exactly (largest-remainder rounding, then a seeded
shuffle); 60% of vehicles go straight and the rest split evenly between
left and right turns. Routes run entry -> intersection -> exit and are
planned with A* over a nine-node road graph.
"""

from __future__ import annotations

import csv
import heapq
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .rng import substream
from .simulation import BOX_WIDTH, Direction, Movement, ROAD_LENGTH

EPISODE_LENGTH_DEFAULT = 5400
STRAIGHT_FRACTION_DEFAULT = 0.6
WEIBULL_SHAPE_DEFAULT = 2.0
FAVORED_FRACTION_DEFAULT = 0.75

SCENARIO_NAMES = ("low", "high", "ew", "ns")
DEFAULT_VOLUMES = {"low": 600, "high": 3000, "ew": 1500, "ns": 1500}

# Exit road reached from each (origin, movement) under left-hand driving.
_DESTINATION = {
    (Direction.NORTH, Movement.THROUGH): Direction.SOUTH,
    (Direction.NORTH, Movement.LEFT): Direction.EAST,
    (Direction.NORTH, Movement.RIGHT): Direction.WEST,
    (Direction.WEST, Movement.THROUGH): Direction.EAST,
    (Direction.WEST, Movement.LEFT): Direction.NORTH,
    (Direction.WEST, Movement.RIGHT): Direction.SOUTH,
    (Direction.EAST, Movement.THROUGH): Direction.WEST,
    (Direction.EAST, Movement.LEFT): Direction.SOUTH,
    (Direction.EAST, Movement.RIGHT): Direction.NORTH,
    (Direction.SOUTH, Movement.THROUGH): Direction.NORTH,
    (Direction.SOUTH, Movement.LEFT): Direction.WEST,
    (Direction.SOUTH, Movement.RIGHT): Direction.EAST,
}


def turn_destination(origin: Direction, movement: Movement) -> Direction:
    return _DESTINATION[(Direction(origin), Movement(movement))]


@dataclass(frozen=True)
class ScenarioConfig:
    """One traffic scenario: volume, directional mix and demand horizon."""

    name: str
    total_vehicles: int
    directional_weights: tuple[float, float, float, float]  # N, W, E, S
    straight_fraction: float = STRAIGHT_FRACTION_DEFAULT
    episode_length: int = EPISODE_LENGTH_DEFAULT
    weibull_shape: float = WEIBULL_SHAPE_DEFAULT

    def __post_init__(self) -> None:
        if self.total_vehicles < 0:
            raise ValueError("total_vehicles must be non-negative")
        if abs(sum(self.directional_weights) - 1.0) > 1e-9:
            raise ValueError("directional weights must sum to 1")
        if any(w < 0 for w in self.directional_weights):
            raise ValueError("directional weights must be non-negative")
        if not 0.0 <= self.straight_fraction <= 1.0:
            raise ValueError("straight_fraction must be in [0, 1]")
        if self.episode_length <= 0:
            raise ValueError("episode_length must be positive")
        if self.weibull_shape <= 0:
            raise ValueError("weibull_shape must be positive")


def scenario_config(name: str, total_vehicles: int | None = None,
                    episode_length: int = EPISODE_LENGTH_DEFAULT,
                    straight_fraction: float = STRAIGHT_FRACTION_DEFAULT,
                    favored_fraction: float = FAVORED_FRACTION_DEFAULT,
                    weibull_shape: float = WEIBULL_SHAPE_DEFAULT) -> ScenarioConfig:
    """Build a named scenario. low/high are uniform across approaches; ew
    and ns give ``favored_fraction`` of the volume to the named pair."""
    key = name.lower()
    if key not in SCENARIO_NAMES:
        raise ValueError(f"unknown scenario {name!r}; expected one of {SCENARIO_NAMES}")
    total = DEFAULT_VOLUMES[key] if total_vehicles is None else total_vehicles
    minor = (1.0 - favored_fraction) / 2.0
    major = favored_fraction / 2.0
    if key in ("low", "high"):
        weights = (0.25, 0.25, 0.25, 0.25)
    elif key == "ew":
        weights = (minor, major, major, minor)
    else:  # ns
        weights = (major, minor, minor, major)
    return ScenarioConfig(key, total, weights,
                          straight_fraction=straight_fraction,
                          episode_length=episode_length,
                          weibull_shape=weibull_shape)


@dataclass(frozen=True)
class TripEntry:
    depart_time: float
    origin: Direction
    movement: Movement
    destination: Direction


@dataclass(frozen=True)
class ArrivalSchedule:
    """Departure plan for one episode, sorted by departure time."""

    entries: tuple[TripEntry, ...]
    episode_length: int

    def __post_init__(self) -> None:
        prev = -math.inf
        for e in self.entries:
            if not 0.0 <= e.depart_time < self.episode_length:
                raise ValueError(f"departure {e.depart_time} outside episode")
            if e.depart_time < prev:
                raise ValueError("entries must be sorted by departure time")
            if turn_destination(e.origin, e.movement) != e.destination:
                raise ValueError(f"destination inconsistent with route for {e}")
            prev = e.depart_time

    def __len__(self) -> int:
        return len(self.entries)


def _quota_counts(weights: Sequence[float], total: int) -> list[int]:
    """Largest-remainder apportionment of ``total`` across ``weights``."""
    raw = [w * total for w in weights]
    counts = [int(math.floor(r)) for r in raw]
    short = total - sum(counts)
    order = sorted(range(len(weights)), key=lambda i: (raw[i] - counts[i]), reverse=True)
    for i in order[:short]:
        counts[i] += 1
    return counts


def generate_schedule(config: ScenarioConfig, seed: int) -> ArrivalSchedule:
    """Draw one seeded arrival schedule for a scenario.

    Deterministic given (config, seed). Origin counts match the
    directional weights exactly (quota + shuffle); movements are i.i.d.
    straight/left/right draws.
    """
    rng = substream(seed, "traffic")
    n = config.total_vehicles
    horizon = float(config.episode_length)
    shape = config.weibull_shape
    scale = horizon / math.log(100.0) ** (1.0 / shape)  # 99th pct at the horizon

    # Inverse-CDF sampling with resampling of draws past the horizon.
    times = scale * (-np.log1p(-rng.random(n))) ** (1.0 / shape)
    while True:
        over = times >= horizon
        k = int(over.sum())
        if k == 0:
            break
        times[over] = scale * (-np.log1p(-rng.random(k))) ** (1.0 / shape)

    origins: list[int] = []
    for d, count in enumerate(_quota_counts(config.directional_weights, n)):
        origins.extend([d] * count)
    origins = list(rng.permutation(origins)) if origins else []

    u_move = rng.random(n)
    u_turn = rng.random(n)
    entries = []
    graph = default_road_graph()
    for i in range(n):
        origin = Direction(int(origins[i]))
        if u_move[i] < config.straight_fraction:
            movement = Movement.THROUGH
        else:
            movement = Movement.LEFT if u_turn[i] < 0.5 else Movement.RIGHT
        destination = turn_destination(origin, movement)
        plan_route(graph, origin, destination)  # guards reachability
        entries.append(TripEntry(float(times[i]), origin, movement, destination))
    entries.sort(key=lambda e: (e.depart_time, e.origin, e.movement))
    return ArrivalSchedule(tuple(entries), config.episode_length)


# -- routing ---------------------------------------------------------------


class RouteError(ValueError):
    pass


@dataclass(frozen=True)
class RoadGraph:
    """Directed road graph: node -> (x, y), node -> ((neighbor, length), ...)."""

    coords: dict[str, tuple[float, float]]
    edges: dict[str, tuple[tuple[str, float], ...]]


def entry_node(d: Direction) -> str:
    return f"{Direction(d).name[0]}_in"


def exit_node(d: Direction) -> str:
    return f"{Direction(d).name[0]}_out"


def default_road_graph(road_length: float = ROAD_LENGTH,
                       box_width: float = BOX_WIDTH) -> RoadGraph:
    """Nine nodes: four entries, four exits, one intersection center.

    Each leg is the road length plus half the intersection box, so any
    entry-to-exit route costs road + box + road.
    """
    leg = road_length + box_width / 2.0
    offsets = {
        Direction.NORTH: (0.0, leg),
        Direction.WEST: (-leg, 0.0),
        Direction.EAST: (leg, 0.0),
        Direction.SOUTH: (0.0, -leg),
    }
    coords = {"X": (0.0, 0.0)}
    edges: dict[str, list[tuple[str, float]]] = {"X": []}
    for d, xy in offsets.items():
        coords[entry_node(d)] = xy
        coords[exit_node(d)] = xy
        edges[entry_node(d)] = [("X", leg)]
        edges["X"].append((exit_node(d), leg))
        edges.setdefault(exit_node(d), [])
    return RoadGraph(coords, {k: tuple(v) for k, v in edges.items()})


def astar(graph: RoadGraph, start: str, goal: str) -> tuple[list[str], float]:
    """A* with the straight-line-distance heuristic; returns (path, cost)."""
    if start not in graph.coords or goal not in graph.coords:
        raise RouteError(f"unknown node: {start if start not in graph.coords else goal}")
    gx, gy = graph.coords[goal]

    def h(node: str) -> float:
        x, y = graph.coords[node]
        return math.hypot(x - gx, y - gy)

    frontier: list[tuple[float, int, str]] = [(h(start), 0, start)]
    best_g = {start: 0.0}
    parent: dict[str, str] = {}
    counter = 1
    closed: set[str] = set()
    while frontier:
        _, _, node = heapq.heappop(frontier)
        if node in closed:
            continue
        if node == goal:
            path = [node]
            while node in parent:
                node = parent[node]
                path.append(node)
            path.reverse()
            return path, best_g[goal]
        closed.add(node)
        for nbr, w in graph.edges.get(node, ()):
            cand = best_g[node] + w
            if cand < best_g.get(nbr, math.inf):
                best_g[nbr] = cand
                parent[nbr] = node
                heapq.heappush(frontier, (cand + h(nbr), counter, nbr))
                counter += 1
    raise RouteError(f"no route from {start} to {goal}")


def plan_route(graph: RoadGraph, origin: Direction, destination: Direction) -> list[str]:
    """Shortest entry-to-exit node path; U-turns have no route."""
    if Direction(origin) == Direction(destination):
        raise RouteError("no route: U-turns are not part of the layout")
    path, _ = astar(graph, entry_node(origin), exit_node(destination))
    return path


def route_cost(graph: RoadGraph, origin: Direction, destination: Direction) -> float:
    if Direction(origin) == Direction(destination):
        raise RouteError("no route: U-turns are not part of the layout")
    _, cost = astar(graph, entry_node(origin), exit_node(destination))
    return cost


# -- lane choice -------------------------------------------------------------


def assign_lane(movement: Movement, through_occupancy: tuple[int, int] = (0, 0)) -> int:
    """Lane discipline: left -> 0, right -> 3, through -> the less occupied
    of lanes 1 and 2 (ties to lane 1)."""
    movement = Movement(movement)
    if movement == Movement.LEFT:
        return 0
    if movement == Movement.RIGHT:
        return 3
    return 1 if through_occupancy[0] <= through_occupancy[1] else 2


# -- schedule persistence -----------------------------------------------------

_SCHEDULE_HEADER = ["depart_time", "origin", "movement", "destination"]
_DIR_NAMES = {d: d.name.lower() for d in Direction}
_DIR_FROM = {v: k for k, v in _DIR_NAMES.items()}
_MOVE_NAMES = {Movement.LEFT: "left", Movement.THROUGH: "through", Movement.RIGHT: "right"}
_MOVE_FROM = {v: k for k, v in _MOVE_NAMES.items()}


def write_schedule_csv(schedule: ArrivalSchedule, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_SCHEDULE_HEADER)
        for e in schedule.entries:
            writer.writerow([repr(e.depart_time), _DIR_NAMES[e.origin],
                             _MOVE_NAMES[e.movement], _DIR_NAMES[e.destination]])


def read_schedule_csv(path: str | Path, episode_length: int) -> ArrivalSchedule:
    entries = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != _SCHEDULE_HEADER:
            raise ValueError(f"unexpected schedule header: {header}")
        for row in reader:
            entries.append(TripEntry(float(row[0]), _DIR_FROM[row[1]],
                                     _MOVE_FROM[row[2]], _DIR_FROM[row[3]]))
    return ArrivalSchedule(tuple(entries), episode_length)
