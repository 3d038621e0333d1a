"""Adaptive traffic-signal control lab.

A microscopic four-way-intersection simulator, two deep-Q signal
controllers (green-approach selection and green-duration selection), a
fixed-time baseline, and a seven-metric evaluation harness -- all
self-contained and deterministic given a seed.
"""

from .agents import (Experience, ReplayBuffer, TrainingConfig, bellman_targets,
                     epsilon_schedule, run_fixed_baseline, run_time_episode,
                     run_turn_episode, select_action, train)
from .encoding import EncodingWeights, compose_turn_state, decode, encode_queue
from .metrics import MetricsReport, evaluate, percent_improvement, report
from .network import NetworkParams, NetworkSpec, adam_step, forward, gradient_check, init_params, loss_and_grad
from .simulation import Direction, Movement, PhaseProgram, Vehicle, VehicleSpec, World
from .traffic import ArrivalSchedule, ScenarioConfig, assign_lane, generate_schedule, plan_route, scenario_config

__version__ = "0.1.0"
