"""Microscopic simulation of one signalized four-way intersection.

Fixed 1 s timestep. Four approaches (N/W/E/S), each with four incoming
and four outgoing lanes of 750 m; left-hand driving, so lane 0 (leftmost)
carries left turns, lanes 1-2 through traffic, lane 3 right turns. The
signal program has eight entries -- a 15 s green followed by a 4 s yellow
for each approach in N, W, E, S order -- and exactly one approach is ever
non-red.

Vehicles follow a simplified Krauss rule: each tick the new speed is the
minimum of (current speed + max accel), the speed limit, and the largest
speed that keeps the vehicle stoppable behind its constraint (queue
leader or stop line, less the minimum gap) braking max_decel per tick
after a driver reaction headway of REACTION_TIME seconds. That cap makes
the update collision-free by construction, keeps required decelerations
within the braking limit, and yields a realistic saturation flow of
roughly 1000 vehicles per hour per lane through the stop line.

A head vehicle may pass the stop line on green, or on yellow when it can
no longer stop in time. Crossing teleports the vehicle into the
intersection box for ceil(box_width / crossing speed) ticks, after which
it re-enters at the start of its departure road (same lane index).

Wait accounting: every tick, each vehicle on an incoming road moving
slower than 1 m/s accrues 1 s of accumulated wait, as does every vehicle
still queued for insertion; waits never reset.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Iterable


class Direction(IntEnum):
    NORTH = 0
    WEST = 1
    EAST = 2
    SOUTH = 3


class Movement(IntEnum):
    LEFT = 0
    THROUGH = 1
    RIGHT = 2


GREEN = "g"
YELLOW = "y"
RED = "r"

# Vehicle location codes (``Vehicle.loc``).
PENDING = 0
INCOMING = 1
BOX = 2
OUTGOING = 3
ARRIVED = 4

LANES_PER_ROAD = 4
ROAD_LENGTH = 750.0
BOX_WIDTH = 30.0
REACTION_TIME = 1.5


@dataclass(frozen=True)
class VehicleSpec:
    """Shared physical attributes of every simulated vehicle."""

    length: float = 5.0
    width: float = 1.8
    min_gap: float = 2.5
    max_speed: float = 25.0
    max_accel: float = 1.0
    max_decel: float = 4.5

    def __post_init__(self) -> None:
        for name in ("length", "width", "min_gap", "max_speed", "max_accel", "max_decel"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.max_decel < self.max_accel:
            raise ValueError("max_decel must be at least max_accel")


class Vehicle:
    """One vehicle: route, lane, kinematic state and wait accounting.

    ``position`` is the front bumper's distance from the road entry; the
    stop line sits at the road length. ``accumulated_wait`` is in whole
    seconds and never decreases.
    """

    __slots__ = (
        "id", "origin", "movement", "destination", "lane_index",
        "position", "speed", "accumulated_wait", "spawn_time",
        "crossed", "loc", "box_ticks",
    )

    def __init__(self, vid: int, origin: Direction, movement: Movement,
                 destination: Direction, lane_index: int, spawn_time: int = 0):
        self.id = vid
        self.origin = origin
        self.movement = movement
        self.destination = destination
        self.lane_index = lane_index
        self.position = 0.0
        self.speed = 0.0
        self.accumulated_wait = 0
        self.spawn_time = spawn_time
        self.crossed = False
        self.loc = PENDING
        self.box_ticks = 0

    def __repr__(self) -> str:  # debugging aid
        return (f"Vehicle({self.id}, {Direction(self.origin).name}->"
                f"{Direction(self.destination).name}, lane {self.lane_index}, "
                f"pos {self.position:.1f}, v {self.speed:.1f})")


@dataclass(frozen=True)
class PhaseProgram:
    """Eight-entry signal table: per-approach lights and durations.

    Odd phases are 15 s greens, even phases the matching 4 s yellows;
    phase 2k follows the approach that was green in phase 2k-1.
    """

    phases: tuple[tuple[tuple[str, str, str, str], int], ...]

    def __post_init__(self) -> None:
        if len(self.phases) != 8:
            raise ValueError("program must have exactly 8 phases")
        prev_active = None
        for idx, (lights, duration) in enumerate(self.phases, start=1):
            if len(lights) != 4:
                raise ValueError("each phase needs one light per approach")
            non_red = [d for d, s in enumerate(lights) if s != RED]
            if len(non_red) != 1:
                raise ValueError(f"phase {idx}: exactly one approach may be non-red")
            active = non_red[0]
            state = lights[active]
            if idx % 2 == 1:
                if state != GREEN or duration != 15:
                    raise ValueError(f"phase {idx}: odd phases are 15 s greens")
            else:
                if state != YELLOW or duration != 4:
                    raise ValueError(f"phase {idx}: even phases are 4 s yellows")
                if active != prev_active:
                    raise ValueError(f"phase {idx}: yellow must follow its own green")
            prev_active = active

    @classmethod
    def default(cls) -> "PhaseProgram":
        phases = []
        for d in range(4):
            for state, dur in ((GREEN, 15), (YELLOW, 4)):
                lights = [RED] * 4
                lights[d] = state
                phases.append((tuple(lights), dur))
        return cls(tuple(phases))

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    def lights(self, phase_id: int) -> tuple[str, str, str, str]:
        self._check(phase_id)
        return self.phases[phase_id - 1][0]

    def light(self, phase_id: int, direction: Direction) -> str:
        return self.lights(phase_id)[direction]

    def duration(self, phase_id: int) -> int:
        self._check(phase_id)
        return self.phases[phase_id - 1][1]

    def _check(self, phase_id: int) -> None:
        if not isinstance(phase_id, int) or not 1 <= phase_id <= len(self.phases):
            raise ValueError(f"phase id must be in 1..{len(self.phases)}, got {phase_id!r}")

    @staticmethod
    def green_phase(direction: Direction) -> int:
        return 2 * int(direction) + 1

    @staticmethod
    def yellow_phase(direction: Direction) -> int:
        return 2 * int(direction) + 2


@dataclass
class Approach:
    """One compass road pair: four incoming and four outgoing lanes."""

    direction: Direction
    road_length: float = ROAD_LENGTH
    incoming: list[list[Vehicle]] = field(default_factory=lambda: [[] for _ in range(LANES_PER_ROAD)])
    outgoing: list[list[Vehicle]] = field(default_factory=lambda: [[] for _ in range(LANES_PER_ROAD)])


def max_safe_speed(gap: float, decel: float, reaction: float = REACTION_TIME) -> float:
    """Largest speed ``u`` whose travel plus stopping tail fits in ``gap``.

    Covers u this tick, a further u * reaction during the driver's
    reaction headway, and then the braking run shedding ``decel`` per
    tick -- all within ``gap``. Zero gap means standing still.
    """
    if gap <= 0.0:
        return 0.0
    n = 0
    while decel * ((n + 1) * (n + 2) / 2.0 + reaction * (n + 1)) <= gap:
        n += 1
    return (gap + decel * n * (n + 1) / 2.0) / (n + 1 + reaction)


def braking_distance(speed: float, decel: float) -> float:
    """Distance covered when braking from ``speed`` starting next tick."""
    m = int(math.ceil(speed / decel)) - 1
    if m <= 0:
        return 0.0
    return m * speed - decel * m * (m + 1) / 2.0


class World:
    """Mutable simulation state for one intersection.

    Single-owner semantics: ``step`` advances the world in place by one
    second. Distinct worlds are fully independent. Given the same seed
    metadata, injected vehicles and phase commands, trajectories are
    bit-identical.
    """

    def __init__(self, spec: VehicleSpec | None = None,
                 program: PhaseProgram | None = None,
                 road_length: float = ROAD_LENGTH,
                 box_width: float = BOX_WIDTH,
                 seed: int = 0):
        self.spec = spec if spec is not None else VehicleSpec()
        self.program = program if program is not None else PhaseProgram.default()
        self.road_length = float(road_length)
        self.box_width = float(box_width)
        self.rng_seed = seed  # provenance metadata; the world itself draws nothing
        self.clock = 0
        self.phase_id = 1
        self.phase_remaining = self.program.duration(1)
        self.approaches = [Approach(Direction(d), self.road_length) for d in range(4)]
        self.box: list[Vehicle] = []
        self.pending: deque[Vehicle] = deque()
        self.all_vehicles: list[Vehicle] = []
        self._ids: set[int] = set()
        self.spawned_count = 0
        self.departed_count = 0
        self.arrived_count = 0
        self.current_queues = (0, 0, 0, 0)

    # -- control surface --------------------------------------------------

    def set_phase(self, phase_id: int, duration: int | None = None) -> None:
        """Activate a phase; ``duration`` overrides the program default."""
        self.program._check(phase_id)
        if duration is not None:
            if not isinstance(duration, int) or duration <= 0:
                raise ValueError(f"duration must be a positive integer, got {duration!r}")
            remaining = duration
        else:
            remaining = self.program.duration(phase_id)
        self.phase_id = phase_id
        self.phase_remaining = remaining

    def spawn(self, vehicle: Vehicle) -> None:
        """Inject a vehicle: onto its lane at full speed if the entry is
        clear, otherwise onto the FIFO pending queue."""
        if vehicle.id in self._ids:
            raise ValueError(f"duplicate vehicle id {vehicle.id}")
        if vehicle.spawn_time > self.clock:
            raise ValueError("spawn_time is in the future")
        if not 0 <= vehicle.lane_index < LANES_PER_ROAD:
            raise ValueError(f"lane index out of range: {vehicle.lane_index}")
        self._ids.add(vehicle.id)
        self.all_vehicles.append(vehicle)
        self.spawned_count += 1
        lane = self.approaches[vehicle.origin].incoming[vehicle.lane_index]
        if self._entry_clear(lane):
            self._insert(vehicle, lane)
        else:
            vehicle.loc = PENDING
            self.pending.append(vehicle)

    # -- inspection -------------------------------------------------------

    def queue_length(self, direction: Direction) -> int:
        """Stationary vehicles (speed < 1 m/s) on the approach's incoming lanes."""
        return sum(1 for lane in self.approaches[direction].incoming
                   for v in lane if v.speed < 1.0)

    def accumulated_wait(self) -> int:
        """Total accumulated wait over vehicles currently on incoming roads."""
        return sum(v.accumulated_wait for a in self.approaches
                   for lane in a.incoming for v in lane)

    def active_count(self) -> int:
        return (sum(len(lane) for a in self.approaches for lane in a.incoming)
                + len(self.box)
                + sum(len(lane) for a in self.approaches for lane in a.outgoing))

    def state_hash(self) -> int:
        """Order-stable hash of the full dynamic state (determinism checks)."""
        items: list = [self.clock, self.phase_id, self.phase_remaining,
                       self.departed_count, self.arrived_count]
        for a in self.approaches:
            for lane in a.incoming + a.outgoing:
                for v in lane:
                    items.append((v.id, v.loc, v.position, v.speed, v.accumulated_wait))
        for v in self.box:
            items.append((v.id, v.loc, v.box_ticks, v.speed, v.accumulated_wait))
        for v in self.pending:
            items.append((v.id, v.loc, v.accumulated_wait))
        return hash(tuple(items))

    # -- dynamics ---------------------------------------------------------

    def step(self) -> None:
        """Advance the world by one second."""
        spec = self.spec
        length = spec.length
        min_gap = spec.min_gap
        accel = spec.max_accel
        vmax = spec.max_speed
        decel = spec.max_decel
        road_len = self.road_length
        lights = self.program.lights(self.phase_id)

        # Departure roads first: free flow behind a leader, exit at the end.
        for appr in self.approaches:
            for lane in appr.outgoing:
                if not lane:
                    continue
                prev_pos = None
                for veh in lane:
                    v = veh.speed + accel
                    if v > vmax:
                        v = vmax
                    if prev_pos is not None:
                        gap = prev_pos - length - min_gap - veh.position
                        safe = max_safe_speed(gap, decel)
                        if v > safe:
                            v = safe
                    prev_pos = veh.position
                    veh.speed = v
                    veh.position += v
                while lane and lane[0].position > road_len:
                    done = lane.pop(0)
                    done.loc = ARRIVED
                    self.arrived_count += 1

        # Intersection box: count down, then drop onto the departure road.
        if self.box:
            still: list[Vehicle] = []
            for veh in self.box:
                veh.box_ticks -= 1
                if veh.box_ticks <= 0 and self._exit_box(veh):
                    continue
                still.append(veh)
            self.box = still

        # Approach roads: car following, stop line, crossings; count queues
        # and accrue waits in the same pass.
        queues = [0, 0, 0, 0]
        for d, appr in enumerate(self.approaches):
            light = lights[d]
            qcount = 0
            for lane in appr.incoming:
                if not lane:
                    continue
                prev_pos = None
                for veh in lane:
                    if prev_pos is None:
                        if light == GREEN:
                            limit = None
                        else:
                            gap_line = road_len - min_gap - veh.position
                            if light == YELLOW and braking_distance(veh.speed, decel) > gap_line:
                                limit = None  # cannot stop in time: proceed
                            else:
                                limit = gap_line
                    else:
                        limit = prev_pos - length - min_gap - veh.position
                    prev_pos = veh.position
                    v = veh.speed + accel
                    if v > vmax:
                        v = vmax
                    if limit is not None:
                        safe = max_safe_speed(limit, decel)
                        if v > safe:
                            v = safe
                    veh.speed = v
                    veh.position += v
                while lane and lane[0].position > road_len:
                    head = lane.pop(0)
                    head.crossed = True
                    head.loc = BOX
                    head.position = 0.0
                    head.box_ticks = math.ceil(self.box_width / head.speed)
                    self.box.append(head)
                for veh in lane:
                    if veh.speed < 1.0:
                        veh.accumulated_wait += 1
                        qcount += 1
            queues[d] = qcount

        # Insert pending vehicles wherever this tick opened entry space.
        if self.pending:
            keep: deque[Vehicle] = deque()
            for veh in self.pending:
                lane = self.approaches[veh.origin].incoming[veh.lane_index]
                if self._entry_clear(lane):
                    self._insert(veh, lane)
                else:
                    veh.accumulated_wait += 1  # queued outside the network
                    keep.append(veh)
            self.pending = keep

        self.current_queues = tuple(queues)
        self.clock += 1
        if self.phase_remaining > 0:
            self.phase_remaining -= 1

    # -- internals --------------------------------------------------------

    def _entry_clear(self, lane: list[Vehicle]) -> bool:
        # Room at the entry for one vehicle body plus the minimum gap.
        if not lane:
            return True
        rear = lane[-1].position - self.spec.length
        return rear >= self.spec.length + self.spec.min_gap

    def _insert(self, vehicle: Vehicle, lane: list[Vehicle]) -> None:
        vehicle.position = 0.0
        vehicle.speed = self.spec.max_speed
        vehicle.loc = INCOMING
        lane.append(vehicle)
        self.departed_count += 1

    def _exit_box(self, veh: Vehicle) -> bool:
        lane = self.approaches[veh.destination].outgoing[veh.lane_index]
        speed = min(veh.speed, self.spec.max_speed)
        if lane:
            gap = lane[-1].position - self.spec.length - self.spec.min_gap
            if gap <= 0.0:
                return False
            safe = max_safe_speed(gap, self.spec.max_decel)
            if speed > safe:
                speed = safe
        veh.position = 0.0
        veh.speed = speed
        veh.loc = OUTGOING
        lane.append(veh)
        return True


def snapshot(world: World) -> list[tuple[int, int, int, float, int]]:
    """Flat per-vehicle record of (id, loc, approach, speed, wait).

    Covers every vehicle ever spawned, including pending and arrived ones;
    ``approach`` is the origin for non-crossed vehicles and -1 afterwards.
    Used by trace-based test oracles, not by the simulation itself.
    """
    rows = []
    for v in world.all_vehicles:
        approach = int(v.origin) if v.loc in (PENDING, INCOMING) else -1
        rows.append((v.id, v.loc, approach, v.speed, v.accumulated_wait))
    return rows
