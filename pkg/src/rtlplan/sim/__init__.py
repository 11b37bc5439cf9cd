"""Deterministic event-driven simulation and stimulus execution."""

from .engine import (
    DEFAULT_DELTA_LIMIT, OscillationError, SimInstance, SimulationError,
    compile_design, elaborate_sim, settle, tick,
)
from .program import InterfaceMismatch, Step, StimulusProgram, Verdict, check_interface, run_stimulus
