"""Approximation-aware RV32I(E)M simulator with error-configurable arithmetic circuits."""
from .circuits import (
    AdderErrorMask,
    CircuitModel,
    CircuitRegistry,
    approx_add32,
    approx_mul8,
    div_skipped_bits,
    mul32,
    mul_error_level,
    nonrestoring_div,
)
from .csr import ApproxConfig, decode_csr_fields
from .isa import CoreConfig, ExitReport, Machine, MachineState, SimulatorFault, TraceEvent

__version__ = "0.1.0"

__all__ = [
    "AdderErrorMask", "ApproxConfig", "CircuitModel", "CircuitRegistry", "CoreConfig",
    "ExitReport", "Machine", "MachineState", "SimulatorFault", "TraceEvent",
    "approx_add32", "approx_mul8", "decode_csr_fields", "div_skipped_bits", "mul32",
    "mul_error_level", "nonrestoring_div",
]
