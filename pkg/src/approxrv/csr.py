"""Field layout of the approximation-control CSRs (alucsr, mulcsr, divcsr)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

ALUCSR = 0x800
MULCSR = 0x801
DIVCSR = 0x802
CYCLE = 0xC00
INSTRET = 0xC02

APPROX_CSRS = (ALUCSR, MULCSR, DIVCSR)
READ_ONLY_CSRS = (CYCLE, INSTRET)
CSR_NAMES = {ALUCSR: "alucsr", MULCSR: "mulcsr", DIVCSR: "divcsr", CYCLE: "cycle", INSTRET: "instret"}


@dataclass(frozen=True)
class ApproxConfig:
    """Decoded execution-unit CSR.

    bit 0 enable, bits 2:1 circuit select, 7:3 custom field 1, 11:8 custom
    field 2, 15:12 truncation level, 31:16 error field. The custom fields are
    kept but have no effect.
    """

    approx_enable: int = 0
    circuit_select: int = 0
    custom1: int = 0
    custom2: int = 0
    truncation: int = 0
    error_field: int = 0

    def encode(self) -> int:
        return ((self.approx_enable & 1)
                | (self.circuit_select & 0x3) << 1
                | (self.custom1 & 0x1F) << 3
                | (self.custom2 & 0xF) << 8
                | (self.truncation & 0xF) << 12
                | (self.error_field & 0xFFFF) << 16)

    @property
    def active_slot(self) -> int:
        return self.circuit_select if self.approx_enable else 0


@lru_cache(maxsize=4096)
def decode_csr_fields(raw: int) -> ApproxConfig:
    raw &= 0xFFFFFFFF
    return ApproxConfig(
        approx_enable=raw & 1,
        circuit_select=(raw >> 1) & 0x3,
        custom1=(raw >> 3) & 0x1F,
        custom2=(raw >> 8) & 0xF,
        truncation=(raw >> 12) & 0xF,
        error_field=(raw >> 16) & 0xFFFF,
    )
