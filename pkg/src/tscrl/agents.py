"""Deep-Q control of the intersection and the fixed-time baseline.

Two learning controllers share one training loop:

* turn agent -- each decision picks WHICH approach gets the next 15 s
  green (four actions over the concatenated 192-bit state). A 4 s yellow
  for the previous approach is inserted only when the choice changes.
* time agent -- the phase cycle is fixed (N, W, E, S) and each decision
  picks HOW LONG the upcoming green lasts: 15 + a seconds for a in 0..19,
  observing the 48-bit encoding of that approach's queue. Yellow follows
  every green.

The reward for a decision is the drop in total accumulated wait between
consecutive decision instants, so episode rewards telescope to
(first - last) observed wait. Experiences go into a FIFO ring buffer;
after every decision with at least one batch buffered, one Adam step is
taken on targets bootstrapped from the current network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import network
from .encoding import EncodingWeights, compose_turn_state, encode_queue, flatten_state
from .network import AdamState, NetworkParams, NetworkSpec
from .rng import derive_seed, substream
from .simulation import Direction, PhaseProgram, Vehicle, World, snapshot
from .traffic import (ArrivalSchedule, ScenarioConfig, assign_lane,
                      scenario_config, generate_schedule,
                      EPISODE_LENGTH_DEFAULT, FAVORED_FRACTION_DEFAULT,
                      STRAIGHT_FRACTION_DEFAULT, WEIBULL_SHAPE_DEFAULT,
                      DEFAULT_VOLUMES, SCENARIO_NAMES)

BASE_GREEN = 15
YELLOW_TIME = 4
REPLAY_CAPACITY = 50_000
BATCH_SIZE = 64
LEARNING_RATE = 0.001
GAMMA_DEFAULT = 0.7
EPISODES_DEFAULT = 300
EPSILON_BREAKPOINTS = (90, 210, 300)
AGENT_KINDS = ("turn", "time")


@dataclass(frozen=True)
class Experience:
    """One replayable transition."""

    state: np.ndarray  # uint8 bit vector
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity ring with strict FIFO eviction and uniform sampling."""

    def __init__(self, capacity: int = REPLAY_CAPACITY):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._ring: list[Experience | None] = [None] * capacity
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, exp: Experience) -> None:
        self._ring[self._next] = exp
        self._next = (self._next + 1) % self.capacity
        if self._size < self.capacity:
            self._size += 1

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Experience]:
        if self._size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = rng.integers(0, self._size, size=batch_size)
        if self._size < self.capacity:
            return [self._ring[i] for i in idx]
        # Full ring: index 0 of the logical order is the eviction cursor.
        return [self._ring[(self._next + i) % self.capacity] for i in idx]

    def contents(self) -> list[Experience]:
        """Live experiences, oldest first."""
        if self._size < self.capacity:
            return [e for e in self._ring[:self._size]]
        return [self._ring[(self._next + i) % self.capacity] for i in range(self.capacity)]


def epsilon_schedule(episode: int, breakpoints: tuple[int, int, int] = EPSILON_BREAKPOINTS) -> float:
    """Piecewise-linear exploration rate.

    Flat at 1 through the first breakpoint, down to 0.2 at the second,
    down to 0 at the third; clamped to [0, 1]. The defaults (90, 210, 300)
    give slopes 0.8/120 and 0.2/90.
    """
    b1, b2, b3 = breakpoints
    if not 0 < b1 < b2 < b3:
        raise ValueError(f"breakpoints must be increasing and positive: {breakpoints}")
    if episode < 1:
        raise ValueError("episode index starts at 1")
    if episode <= b1:
        value = 1.0
    elif episode <= b2:
        value = 1.0 - 0.8 * (episode - b1) / (b2 - b1)
    elif episode <= b3:
        value = 0.2 - 0.2 * (episode - b2) / (b3 - b2)
    else:
        value = 0.0
    return min(1.0, max(0.0, value))


def select_action(q_values: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy: explore uniformly with probability eps, otherwise
    argmax with lowest-index tie-break."""
    q = np.asarray(q_values)
    if q.size == 0:
        raise ValueError("q_values must be non-empty")
    if rng.random() < eps:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


def bellman_targets(batch: Sequence[Experience], params: NetworkParams,
                    gamma: float) -> np.ndarray:
    """y = r for terminal transitions, else r + gamma * max next-Q under
    the current parameters (no separate target network)."""
    if not batch:
        raise ValueError("batch must be non-empty")
    nxt = np.stack([e.next_state for e in batch]).astype(np.float64)
    qmax = network.forward(params, nxt).max(axis=1)
    rewards = np.array([e.reward for e in batch], dtype=np.float64)
    live = np.array([0.0 if e.terminal else 1.0 for e in batch])
    return rewards + gamma * qmax * live


# -- episode bookkeeping -----------------------------------------------------


@dataclass(frozen=True)
class DecisionRecord:
    index: int
    clock: int          # time at which the action was chosen
    action: int | None  # None for the fixed-time baseline
    green_duration: int
    reward: float
    awt: int            # accumulated wait observed when choosing
    queues: tuple[int, int, int, int]  # N, W, E, S at the decision instant


@dataclass
class EpisodeLog:
    """Everything the metric suite needs from one episode."""

    agent_kind: str
    episode_length: int
    decisions: list[DecisionRecord] = field(default_factory=list)
    awt_series: list[int] = field(default_factory=list)  # one per observation
    tick_queues: list[tuple[int, int, int, int]] = field(default_factory=list)
    phase_events: list[tuple[int, int]] = field(default_factory=list)  # (clock, phase)
    final_queues: tuple[int, int, int, int] = (0, 0, 0, 0)
    final_waits: list[int] = field(default_factory=list)
    n_vehicles: int = 0
    tick_awt: list[int] | None = None
    trace: list[tuple[int, int, list]] | None = None  # (clock, phase, snapshot)

    @property
    def rewards(self) -> list[float]:
        return [d.reward for d in self.decisions]

    @property
    def total_reward(self) -> float:
        return float(sum(d.reward for d in self.decisions))


class _EpisodeEngine:
    """Tick loop shared by the three controllers: schedule injection,
    phase execution, per-tick queue sampling, optional tracing."""

    def __init__(self, world: World, schedule: ArrivalSchedule, episode_length: int,
                 log: EpisodeLog, collect_trace: bool = False,
                 collect_tick_awt: bool = False):
        self.world = world
        self.entries = schedule.entries
        self.episode_length = episode_length
        self.log = log
        self._next_entry = 0
        if collect_tick_awt:
            log.tick_awt = []
        if collect_trace:
            log.trace = [(world.clock, world.phase_id, snapshot(world))]

    def done(self) -> bool:
        return self.world.clock >= self.episode_length

    def inject_due(self) -> None:
        world = self.world
        entries = self.entries
        while self._next_entry < len(entries):
            entry = entries[self._next_entry]
            if int(entry.depart_time) > world.clock:
                break
            lane = self._pick_lane(entry.origin, entry.movement)
            veh = Vehicle(self._next_entry, entry.origin, entry.movement,
                          entry.destination, lane, spawn_time=world.clock)
            world.spawn(veh)
            self._next_entry += 1

    def _pick_lane(self, origin: Direction, movement) -> int:
        world = self.world
        lanes = world.approaches[origin].incoming
        occ1 = len(lanes[1])
        occ2 = len(lanes[2])
        for p in world.pending:
            if p.origin == origin:
                if p.lane_index == 1:
                    occ1 += 1
                elif p.lane_index == 2:
                    occ2 += 1
        return assign_lane(movement, (occ1, occ2))

    def run_phase(self, phase_id: int, duration: int) -> int:
        """Activate a phase and run it, truncated at the episode end."""
        world = self.world
        ticks = min(duration, self.episode_length - world.clock)
        if ticks <= 0:
            return 0
        world.set_phase(phase_id, duration)
        self.log.phase_events.append((world.clock, phase_id))
        for _ in range(ticks):
            self.inject_due()
            world.step()
            self.log.tick_queues.append(world.current_queues)
            if self.log.tick_awt is not None:
                self.log.tick_awt.append(world.accumulated_wait())
            if self.log.trace is not None:
                self.log.trace.append((world.clock, world.phase_id, snapshot(world)))
        return ticks

    def observe_queues(self) -> tuple[int, int, int, int]:
        return tuple(self.world.queue_length(Direction(d)) for d in range(4))

    def finalize(self) -> None:
        world = self.world
        self.log.final_queues = self.observe_queues()
        self.log.final_waits = [v.accumulated_wait for v in world.all_vehicles]
        self.log.n_vehicles = len(world.all_vehicles)


PolicyFn = Callable[[np.ndarray], int]
ExperienceHook = Callable[[Experience], None]


def _greedy_or_explore(params: NetworkParams, eps: float,
                       rng: np.random.Generator | None) -> PolicyFn:
    gen = rng if rng is not None else np.random.default_rng(0)

    def policy(state: np.ndarray) -> int:
        q = network.forward(params, state.astype(np.float64))
        return select_action(q, eps, gen)

    return policy


def run_turn_episode(world: World, params: NetworkParams | None, eps: float,
                     schedule: ArrivalSchedule, *,
                     rng: np.random.Generator | None = None,
                     policy: PolicyFn | None = None,
                     on_experience: ExperienceHook | None = None,
                     episode_length: int | None = None,
                     enc_weights: EncodingWeights | None = None,
                     base_green: int = BASE_GREEN,
                     yellow: int = YELLOW_TIME,
                     collect_trace: bool = False,
                     collect_tick_awt: bool = False) -> tuple[EpisodeLog, list[Experience]]:
    """Drive one episode with green-approach selection.

    The previous green starts as North (the first program phase), so an
    initial North choice needs no transition.
    """
    length = episode_length if episode_length is not None else schedule.episode_length
    weights = enc_weights if enc_weights is not None else EncodingWeights.default()
    log = EpisodeLog("turn", length)
    eng = _EpisodeEngine(world, schedule, length, log,
                         collect_trace=collect_trace, collect_tick_awt=collect_tick_awt)
    if policy is None:
        if params is None:
            raise ValueError("need params or an explicit policy")
        policy = _greedy_or_explore(params, eps, rng)

    def observe() -> tuple[np.ndarray, tuple[int, int, int, int], int]:
        queues = eng.observe_queues()
        state = compose_turn_state([encode_queue(q, weights) for q in queues])
        return state, queues, world.accumulated_wait()

    prev_green = Direction.NORTH
    state, queues, awt = observe()
    log.awt_series.append(awt)
    experiences: list[Experience] = []
    idx = 0
    while not eng.done():
        action = int(policy(state))
        if not 0 <= action < 4:
            raise ValueError(f"turn action out of range: {action}")
        chosen = Direction(action)
        clock_at_choice = world.clock
        if chosen != prev_green:
            eng.run_phase(PhaseProgram.yellow_phase(prev_green), yellow)
        eng.run_phase(PhaseProgram.green_phase(chosen), base_green)
        prev_green = chosen
        next_state, next_queues, next_awt = observe()
        reward = float(awt - next_awt)
        terminal = eng.done()
        exp = Experience(state, action, reward, next_state, terminal)
        experiences.append(exp)
        if on_experience is not None:
            on_experience(exp)
        log.decisions.append(DecisionRecord(idx, clock_at_choice, action,
                                            base_green, reward, awt, queues))
        log.awt_series.append(next_awt)
        state, queues, awt = next_state, next_queues, next_awt
        idx += 1
    eng.finalize()
    return log, experiences


_TIME_CYCLE = (Direction.NORTH, Direction.WEST, Direction.EAST, Direction.SOUTH)


def run_time_episode(world: World, params: NetworkParams | None, eps: float,
                     schedule: ArrivalSchedule, *,
                     rng: np.random.Generator | None = None,
                     policy: PolicyFn | None = None,
                     on_experience: ExperienceHook | None = None,
                     episode_length: int | None = None,
                     enc_weights: EncodingWeights | None = None,
                     base_green: int = BASE_GREEN,
                     yellow: int = YELLOW_TIME,
                     collect_trace: bool = False,
                     collect_tick_awt: bool = False) -> tuple[EpisodeLog, list[Experience]]:
    """Drive one episode with green-duration selection on a fixed cycle.

    Before each green the agent observes the queue encoding of the
    approach about to be served and picks a duration offset 0..19; the
    green then runs base + offset seconds and is always followed by the
    4 s yellow.
    """
    length = episode_length if episode_length is not None else schedule.episode_length
    weights = enc_weights if enc_weights is not None else EncodingWeights.default()
    log = EpisodeLog("time", length)
    eng = _EpisodeEngine(world, schedule, length, log,
                         collect_trace=collect_trace, collect_tick_awt=collect_tick_awt)
    if policy is None:
        if params is None:
            raise ValueError("need params or an explicit policy")
        policy = _greedy_or_explore(params, eps, rng)

    def observe(upcoming: Direction) -> tuple[np.ndarray, tuple[int, int, int, int], int]:
        queues = eng.observe_queues()
        state = flatten_state(encode_queue(queues[upcoming], weights))
        return state, queues, world.accumulated_wait()

    pos = 0
    state, queues, awt = observe(_TIME_CYCLE[0])
    log.awt_series.append(awt)
    experiences: list[Experience] = []
    idx = 0
    while not eng.done():
        served = _TIME_CYCLE[pos % 4]
        action = int(policy(state))
        if not 0 <= action < 20:
            raise ValueError(f"duration action out of range: {action}")
        duration = base_green + action
        clock_at_choice = world.clock
        eng.run_phase(PhaseProgram.green_phase(served), duration)
        eng.run_phase(PhaseProgram.yellow_phase(served), yellow)
        pos += 1
        next_state, next_queues, next_awt = observe(_TIME_CYCLE[pos % 4])
        reward = float(awt - next_awt)
        terminal = eng.done()
        exp = Experience(state, action, reward, next_state, terminal)
        experiences.append(exp)
        if on_experience is not None:
            on_experience(exp)
        log.decisions.append(DecisionRecord(idx, clock_at_choice, action,
                                            duration, reward, awt, queues))
        log.awt_series.append(next_awt)
        state, queues, awt = next_state, next_queues, next_awt
        idx += 1
    eng.finalize()
    return log, experiences


def run_fixed_baseline(world: World, schedule: ArrivalSchedule, *,
                       episode_length: int | None = None,
                       base_green: int = BASE_GREEN,
                       yellow: int = YELLOW_TIME,
                       collect_trace: bool = False,
                       collect_tick_awt: bool = False) -> EpisodeLog:
    """Cycle the eight program phases with their fixed durations, logging
    an observation before each green so the same metric suite applies."""
    length = episode_length if episode_length is not None else schedule.episode_length
    log = EpisodeLog("fixed", length)
    eng = _EpisodeEngine(world, schedule, length, log,
                         collect_trace=collect_trace, collect_tick_awt=collect_tick_awt)
    pos = 0
    queues = eng.observe_queues()
    awt = world.accumulated_wait()
    log.awt_series.append(awt)
    idx = 0
    while not eng.done():
        served = _TIME_CYCLE[pos % 4]
        clock_at_choice = world.clock
        eng.run_phase(PhaseProgram.green_phase(served), base_green)
        eng.run_phase(PhaseProgram.yellow_phase(served), yellow)
        pos += 1
        next_queues = eng.observe_queues()
        next_awt = world.accumulated_wait()
        reward = float(awt - next_awt)
        log.decisions.append(DecisionRecord(idx, clock_at_choice, None,
                                            base_green, reward, awt, queues))
        log.awt_series.append(next_awt)
        queues, awt = next_queues, next_awt
        idx += 1
    eng.finalize()
    return log


# -- training ----------------------------------------------------------------


@dataclass(frozen=True)
class TrainingConfig:
    agent_kind: str
    episodes: int = EPISODES_DEFAULT
    episode_length: int = EPISODE_LENGTH_DEFAULT
    gamma: float = GAMMA_DEFAULT
    lr: float = LEARNING_RATE
    batch_size: int = BATCH_SIZE
    buffer_capacity: int = REPLAY_CAPACITY
    base_green: int = BASE_GREEN
    yellow: int = YELLOW_TIME
    epsilon_breakpoints: tuple[int, int, int] = EPSILON_BREAKPOINTS
    seed: int = 0
    volumes: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_VOLUMES))
    straight_fraction: float = STRAIGHT_FRACTION_DEFAULT
    favored_fraction: float = FAVORED_FRACTION_DEFAULT
    weibull_shape: float = WEIBULL_SHAPE_DEFAULT

    def __post_init__(self) -> None:
        if self.agent_kind not in AGENT_KINDS:
            raise ValueError(f"agent_kind must be one of {AGENT_KINDS}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.episodes < 0:
            raise ValueError("episodes must be non-negative")
        if not 0 < self.batch_size <= self.buffer_capacity:
            raise ValueError("need 0 < batch_size <= buffer_capacity")
        if self.base_green <= 0 or self.yellow < 0:
            raise ValueError("invalid phase durations")
        b1, b2, b3 = self.epsilon_breakpoints
        if not 0 < b1 < b2 < b3:
            raise ValueError("epsilon breakpoints must be increasing")

    def scenario(self, name: str) -> ScenarioConfig:
        return scenario_config(name, self.volumes[name],
                               episode_length=self.episode_length,
                               straight_fraction=self.straight_fraction,
                               favored_fraction=self.favored_fraction,
                               weibull_shape=self.weibull_shape)

    def rotation(self) -> list[ScenarioConfig]:
        return [self.scenario(name) for name in SCENARIO_NAMES]


@dataclass(frozen=True)
class EpisodeRecord:
    episode: int
    epsilon: float
    scenario: str
    log: EpisodeLog


def train(config: TrainingConfig,
          enc_weights: EncodingWeights | None = None,
          progress: Callable[[EpisodeRecord], None] | None = None
          ) -> tuple[NetworkParams, list[EpisodeRecord]]:
    """Run the full training programme and return the learned parameters.

    Per episode: pick the next scenario in the low/high/ew/ns rotation,
    generate its seeded traffic, run the episode driver pushing each
    experience into the replay buffer, and after every decision with at
    least one batch buffered take one Adam step on bootstrapped targets.
    The exploration rate moves along the piecewise schedule per episode.
    """
    spec = NetworkSpec.for_agent(config.agent_kind)
    params = network.init_params(spec, substream(config.seed, "init"))
    adam = AdamState.for_params(params)
    buffer = ReplayBuffer(config.buffer_capacity)
    rng_explore = substream(config.seed, "exploration")
    rng_sample = substream(config.seed, "sampling")
    driver = run_turn_episode if config.agent_kind == "turn" else run_time_episode
    rotation = config.rotation()
    records: list[EpisodeRecord] = []

    def learn(exp: Experience) -> None:
        buffer.push(exp)
        if len(buffer) < config.batch_size:
            return
        batch = buffer.sample(config.batch_size, rng_sample)
        targets = bellman_targets(batch, params, config.gamma)
        states = np.stack([e.state for e in batch]).astype(np.float64)
        actions = np.array([e.action for e in batch], dtype=np.int64)
        _, grads = network.loss_and_grad(params, states, actions, targets)
        network.adam_step(params, grads, adam, config.lr)

    for episode in range(1, config.episodes + 1):
        eps = epsilon_schedule(episode, config.epsilon_breakpoints)
        scen = rotation[(episode - 1) % len(rotation)]
        schedule_seed = derive_seed(config.seed, "traffic", episode)
        schedule = generate_schedule(scen, schedule_seed)
        world = World(seed=schedule_seed)
        log, _ = driver(world, params, eps, schedule,
                        rng=rng_explore, on_experience=learn,
                        episode_length=config.episode_length,
                        enc_weights=enc_weights,
                        base_green=config.base_green, yellow=config.yellow)
        record = EpisodeRecord(episode, eps, scen.name, log)
        records.append(record)
        if progress is not None:
            progress(record)
    return params, records


# -- evaluation controllers ---------------------------------------------------


def fixed_controller(*, base_green: int = BASE_GREEN, yellow: int = YELLOW_TIME,
                     collect_trace: bool = False,
                     collect_tick_awt: bool = False) -> Callable[[ArrivalSchedule, int], EpisodeLog]:
    def run(schedule: ArrivalSchedule, seed: int = 0) -> EpisodeLog:
        world = World(seed=seed)
        return run_fixed_baseline(world, schedule, base_green=base_green,
                                  yellow=yellow, collect_trace=collect_trace,
                                  collect_tick_awt=collect_tick_awt)

    return run


def greedy_controller(params: NetworkParams, kind: str, *,
                      enc_weights: EncodingWeights | None = None,
                      base_green: int = BASE_GREEN, yellow: int = YELLOW_TIME,
                      collect_trace: bool = False,
                      collect_tick_awt: bool = False) -> Callable[[ArrivalSchedule, int], EpisodeLog]:
    """Frozen-parameter controller (no exploration) for evaluation runs."""
    if kind not in AGENT_KINDS:
        raise ValueError(f"kind must be one of {AGENT_KINDS}")
    driver = run_turn_episode if kind == "turn" else run_time_episode
    expected = NetworkSpec.for_agent(kind).input_dim
    if params.spec.input_dim != expected:
        raise ValueError(f"{kind} agent needs input_dim {expected}, "
                         f"model has {params.spec.input_dim}")

    def run(schedule: ArrivalSchedule, seed: int = 0) -> EpisodeLog:
        world = World(seed=seed)
        log, _ = driver(world, params, 0.0, schedule,
                        rng=np.random.default_rng(0),
                        enc_weights=enc_weights,
                        base_green=base_green, yellow=yellow,
                        collect_trace=collect_trace,
                        collect_tick_awt=collect_tick_awt)
        return log

    return run
