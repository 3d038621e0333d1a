import numpy as np
import pytest

from tscrl.simulation import (Direction, INCOMING, Movement, Vehicle, World)
from tscrl.traffic import ArrivalSchedule, TripEntry, turn_destination


def place_vehicle(world: World, direction: Direction, lane: int, position: float,
                  speed: float = 0.0, vid: int | None = None,
                  movement: Movement = Movement.THROUGH,
                  outgoing: bool = False) -> Vehicle:
    """Drop a vehicle directly onto a lane (test setup bypassing spawn).

    Lanes are kept front-first; callers must place in decreasing position
    order per lane.
    """
    if vid is None:
        vid = len(world.all_vehicles)
    veh = Vehicle(vid, direction, movement, turn_destination(direction, movement),
                  lane, spawn_time=world.clock)
    veh.position = position
    veh.speed = speed
    veh.loc = INCOMING
    road = world.approaches[direction].outgoing if outgoing else world.approaches[direction].incoming
    lane_list = road[lane]
    assert not lane_list or lane_list[-1].position > position, "keep lanes front-first"
    lane_list.append(veh)
    world.all_vehicles.append(veh)
    world._ids.add(vid)
    world.spawned_count += 1
    world.departed_count += 1
    return veh


def make_schedule(entries: list[tuple[float, Direction, Movement]],
                  episode_length: int) -> ArrivalSchedule:
    trips = tuple(TripEntry(t, o, m, turn_destination(o, m))
                  for t, o, m in sorted(entries, key=lambda e: e[0]))
    return ArrivalSchedule(trips, episode_length)


@pytest.fixture
def empty_schedule():
    return ArrivalSchedule((), 200)
