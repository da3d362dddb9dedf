"""Populations-level simulator of an autonomous Maxwell demon in cavity QED.

A three-level Rydberg atom encodes a qubit and a demon memory; a microwave
cavity is the hot body. The package prepares thermal states, runs the
read-out / exchange / relaxation / detection steps, and does the entropy and
heat bookkeeping of the feedback step.
"""
__version__ = "0.1.0"

from .dynamics import ImperfectionSpec, StageTrace, run_stages  # noqa: E402
from .statespace import JointState, LogicalState, ThermalSpec, compose_initial, logical_map  # noqa: E402
from .thermo import ThermoReport, slt_report  # noqa: E402

__all__ = [
    "ImperfectionSpec",
    "JointState",
    "LogicalState",
    "StageTrace",
    "ThermalSpec",
    "ThermoReport",
    "compose_initial",
    "logical_map",
    "run_stages",
    "slt_report",
]
