"""Guarded-event machines, the WhatsApp model and a bounded checker."""

from .checker import (
    CheckConfig,
    CheckReport,
    Verdict,
    bfs_check,
    deadlock_probe,
    refine_check,
)
from .machine import (
    EventDescriptor,
    GuardNotSatisfied,
    InvariantViolation,
    MachineDefinition,
    Trace,
    check_invariants,
    enabled,
    parse_trace,
    random_walk,
    replay,
    step,
    walk,
)
from .whatsapp_abstract import AbstractState, ModelConfig, build_machine0
from .whatsapp_concrete import ConcreteState, MissingCell, build_machine2, read_chat

__all__ = [
    "AbstractState",
    "CheckConfig",
    "CheckReport",
    "ConcreteState",
    "EventDescriptor",
    "GuardNotSatisfied",
    "InvariantViolation",
    "MachineDefinition",
    "MissingCell",
    "ModelConfig",
    "Trace",
    "Verdict",
    "bfs_check",
    "build_machine0",
    "build_machine2",
    "check_invariants",
    "deadlock_probe",
    "enabled",
    "parse_trace",
    "random_walk",
    "read_chat",
    "refine_check",
    "replay",
    "step",
    "walk",
]
