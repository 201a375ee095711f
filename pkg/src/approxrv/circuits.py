"""Bit-level models of the execution-unit circuits and the slot registry.

Every unit (adder, multiplier, divider) owns four circuit slots. Slot 0 holds
an accurate reference circuit, slot 1 the error-configurable demo circuit and
slots 2-3 are free for user circuits.

Each circuit has a scalar ``evaluate`` used by the simulator and an optional
numpy ``evaluate_batch`` used by the metric and imaging code. Call signatures
depend on the unit:

* adder:      ``evaluate(a, b, subtract, error_field, truncation) -> int``
* multiplier: ``evaluate(a, b, signedness, error_field, truncation) -> int``
  (full 64-bit product, ``signedness`` one of ``"uu"``, ``"ss"``, ``"su"``)
* divider:    ``evaluate(a, b, signed, error_field, truncation) -> (q, r)``
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

MASK32 = 0xFFFFFFFF
MASK64 = 0xFFFFFFFFFFFFFFFF

ADDER = "adder"
MULTIPLIER = "multiplier"
DIVIDER = "divider"
UNITS = (ADDER, MULTIPLIER, DIVIDER)
NUM_SLOTS = 4

SIGNEDNESS = ("uu", "ss", "su")
MAX_DIV_SKIP = 24


# ---------------------------------------------------------------------------
# error-field encodings

@dataclass(frozen=True)
class AdderErrorMask:
    """Per-block accuracy mask of the carry-select adder.

    Bit i set means block i (bits 4i..4i+3) adds exactly. Only the low
    ``approximable_blocks`` bits matter; higher blocks are always exact.
    """

    mask: int
    approximable_blocks: int = 4

    def __post_init__(self):
        if not 0 <= self.approximable_blocks <= 8:
            raise ValueError("approximable_blocks must be in [0, 8]")
        object.__setattr__(self, "mask", self.mask & 0xFF)

    @classmethod
    def from_error_field(cls, error_field: int, approximable_blocks: int = 4) -> "AdderErrorMask":
        return cls(error_field & 0xFF, approximable_blocks)

    def approximated(self, block: int) -> bool:
        return block < self.approximable_blocks and not (self.mask >> block) & 1

    @property
    def approximated_blocks(self) -> int:
        significant = self.mask & ((1 << self.approximable_blocks) - 1)
        return self.approximable_blocks - bin(significant).count("1")

    @property
    def is_exact(self) -> bool:
        return self.approximated_blocks == 0


def mul_error_level(raw: int) -> int:
    """Multiplier error level in [0, 6]: popcount of bits 6..1 of the low byte.

    Level 6 (0x7E) is the most accurate setting, level 0 (0x00) the least.
    """
    return bin((raw >> 1) & 0x3F).count("1")


def div_skipped_bits(raw: int) -> int:
    """Number of low quotient bits left to speculation (0 means exact)."""
    return min(raw & 0xFF, MAX_DIV_SKIP)


def _truncate(value: int, truncation: int) -> int:
    return value & ~((1 << (truncation & 0xF)) - 1)


# ---------------------------------------------------------------------------
# adder

def add32_kernel(a: int, b: int, subtract: bool, approx_blocks: int) -> int:
    """Block adder on plain ints; bit i of ``approx_blocks`` marks block i approximated.

    Self-contained integer code so it can also be JIT-compiled for large scans.
    """
    a &= 0xFFFFFFFF
    b &= 0xFFFFFFFF
    carry = 0
    if subtract:
        b ^= 0xFFFFFFFF
        carry = 1
    result = 0
    for blk in range(8):
        shift = 4 * blk
        x = (a >> shift) & 0xF
        y = (b >> shift) & 0xF
        if (approx_blocks >> blk) & 1:
            s = x | y
            carry = (x >> 3) & (y >> 3)
        else:
            t = x + y + carry
            s = t & 0xF
            carry = t >> 4
        result |= s << shift
    return result


def _approx_block_bits(mask: AdderErrorMask) -> int:
    return sum(1 << blk for blk in range(8) if mask.approximated(blk))


def approx_add32(a: int, b: int, subtract: bool = False, mask: AdderErrorMask | int = 0x0F) -> int:
    """32-bit add/sub built from eight 4-bit blocks with lower-part-OR approximation.

    An approximated block outputs ``a | b``, ignores its carry-in and passes
    ``a[msb] & b[msb]`` to the next block. Exact blocks ripple normally.
    Subtraction is ``a + ~b + 1`` with the +1 entering block 0 as carry-in.
    """
    if not isinstance(mask, AdderErrorMask):
        mask = AdderErrorMask(mask)
    return add32_kernel(a, b, subtract, _approx_block_bits(mask))


def approx_add32_batch(a, b, subtract: bool = False, mask: AdderErrorMask | int = 0x0F) -> np.ndarray:
    if not isinstance(mask, AdderErrorMask):
        mask = AdderErrorMask(mask)
    a = np.asarray(a, dtype=np.uint64) & MASK32
    b = np.asarray(b, dtype=np.uint64) & MASK32
    a, b = np.broadcast_arrays(a, b)
    carry = np.zeros(a.shape, dtype=np.uint64)
    if subtract:
        b = b ^ np.uint64(MASK32)
        carry += np.uint64(1)
    result = np.zeros(a.shape, dtype=np.uint64)
    for blk in range(8):
        shift = np.uint64(4 * blk)
        x = (a >> shift) & np.uint64(0xF)
        y = (b >> shift) & np.uint64(0xF)
        if mask.approximated(blk):
            s = x | y
            carry = (x >> np.uint64(3)) & (y >> np.uint64(3))
        else:
            t = x + y + carry
            s = t & np.uint64(0xF)
            carry = t >> np.uint64(4)
        result |= s << shift
    return result


# ---------------------------------------------------------------------------
# multiplier

def approx_mul8(a: int, b: int, raw: int = 0x7E) -> int:
    """8x8 multiplier with OR-compressed low columns.

    With ``L = 8 - mul_error_level(raw)``, partial-product columns below L are
    reduced by OR and produce no carries; the remaining columns are summed
    exactly. Row i of the partial-product matrix is ``b << i`` when ``a_i`` is
    set, so OR-ing the rows yields the per-column OR directly.
    """
    low = (1 << (8 - mul_error_level(raw))) - 1
    a &= 0xFF
    b &= 0xFF
    ored = 0
    exact = 0
    for i in range(8):
        if (a >> i) & 1:
            row = b << i
            ored |= row & low
            exact += row & ~low
    return ored | exact


def approx_mul8_batch(a, b, raw: int = 0x7E) -> np.ndarray:
    low = np.uint64((1 << (8 - mul_error_level(raw))) - 1)
    high = np.uint64(~int(low) & 0xFFFF)
    a = np.asarray(a, dtype=np.uint64) & np.uint64(0xFF)
    b = np.asarray(b, dtype=np.uint64) & np.uint64(0xFF)
    a, b = np.broadcast_arrays(a, b)
    ored = np.zeros(a.shape, dtype=np.uint64)
    exact = np.zeros(a.shape, dtype=np.uint64)
    for i in range(8):
        sh = np.uint64(i)
        row = ((a >> sh) & np.uint64(1)) * (b << sh)
        ored |= row & low
        exact += row & high
    return ored | exact


def _exact_mul8(a, b):
    return (a & 0xFF) * (b & 0xFF)


def _mul16(a: int, b: int, tile: Callable[[int, int], int]) -> int:
    a_lo, a_hi = a & 0xFF, (a >> 8) & 0xFF
    b_lo, b_hi = b & 0xFF, (b >> 8) & 0xFF
    return (tile(a_lo, b_lo)
            + ((tile(a_hi, b_lo) + tile(a_lo, b_hi)) << 8)
            + (tile(a_hi, b_hi) << 16))


def _mul32_unsigned(a: int, b: int, tile: Callable[[int, int], int]) -> int:
    a_lo, a_hi = a & 0xFFFF, (a >> 16) & 0xFFFF
    b_lo, b_hi = b & 0xFFFF, (b >> 16) & 0xFFFF
    return (_mul16(a_lo, b_lo, tile)
            + ((_mul16(a_hi, b_lo, tile) + _mul16(a_lo, b_hi, tile)) << 16)
            + (_mul16(a_hi, b_hi, tile) << 32))


def _to_signed32(x: int) -> int:
    x &= MASK32
    return x - (1 << 32) if x & 0x80000000 else x


def _split_sign(a: int, b: int, signedness: str) -> tuple[int, int, bool]:
    if signedness not in SIGNEDNESS:
        raise ValueError(f"signedness must be one of {SIGNEDNESS}, got {signedness!r}")
    sa = _to_signed32(a) if signedness in ("ss", "su") else a & MASK32
    sb = _to_signed32(b) if signedness == "ss" else b & MASK32
    return abs(sa), abs(sb), (sa < 0) != (sb < 0)


def mul32(a: int, b: int, signedness: str = "uu", raw: Optional[int] = None) -> int:
    """64-bit product from sixteen 8x8 tiles arranged as four 16-bit multipliers.

    ``raw=None`` uses exact tiles; otherwise every tile is ``approx_mul8`` at
    that error setting. Recombination is exact. Signed modes multiply
    magnitudes and negate the 64-bit result.
    """
    ma, mb, negative = _split_sign(a, b, signedness)
    if raw is None:
        tile = _exact_mul8
    else:
        def tile(x, y):
            return approx_mul8(x, y, raw)
    product = _mul32_unsigned(ma, mb, tile)
    if negative:
        product = -product
    return product & MASK64


def _mul16_batch(a, b, tile):
    m8 = np.uint64(0xFF)
    a_lo, a_hi = a & m8, (a >> np.uint64(8)) & m8
    b_lo, b_hi = b & m8, (b >> np.uint64(8)) & m8
    return (tile(a_lo, b_lo)
            + ((tile(a_hi, b_lo) + tile(a_lo, b_hi)) << np.uint64(8))
            + (tile(a_hi, b_hi) << np.uint64(16)))


def _signed_operand(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    return np.where(x >= 1 << 31, x - (1 << 32), x)


def mul32_batch(a, b, signedness: str = "uu", raw: Optional[int] = None) -> np.ndarray:
    if signedness not in SIGNEDNESS:
        raise ValueError(f"signedness must be one of {SIGNEDNESS}, got {signedness!r}")
    a = np.asarray(a, dtype=np.uint64) & np.uint64(MASK32)
    b = np.asarray(b, dtype=np.uint64) & np.uint64(MASK32)
    a, b = np.broadcast_arrays(a, b)
    sa = _signed_operand(a) if signedness in ("ss", "su") else a.astype(np.int64)
    sb = _signed_operand(b) if signedness == "ss" else b.astype(np.int64)
    negative = (sa < 0) != (sb < 0)
    ma = np.abs(sa).astype(np.uint64)
    mb = np.abs(sb).astype(np.uint64)

    def tile(x, y):
        # an all-zero operand byte contributes nothing in either mode
        if not x.any() or not y.any():
            return np.zeros(x.shape, dtype=np.uint64)
        return x * y if raw is None else approx_mul8_batch(x, y, raw)

    m16 = np.uint64(0xFFFF)
    a_lo, a_hi = ma & m16, ma >> np.uint64(16)
    b_lo, b_hi = mb & m16, mb >> np.uint64(16)
    product = (_mul16_batch(a_lo, b_lo, tile)
               + ((_mul16_batch(a_hi, b_lo, tile) + _mul16_batch(a_lo, b_hi, tile)) << np.uint64(16))
               + (_mul16_batch(a_hi, b_hi, tile) << np.uint64(32)))
    # uint64 negation wraps modulo 2**64
    with np.errstate(over="ignore"):
        return np.where(negative, ~product + np.uint64(1), product)


# ---------------------------------------------------------------------------
# divider

def div32_kernel(n: int, d: int, signed: bool, skipped: int) -> tuple[int, int]:
    """Non-restoring division of 32-bit words computing only the top ``32 - skipped`` quotient bits.

    Self-contained integer code so it can also be JIT-compiled for large scans.
    """
    n &= 0xFFFFFFFF
    d &= 0xFFFFFFFF
    if d == 0:
        return 0xFFFFFFFF, n
    sn, sd = n, d
    if signed:
        if n >= 0x80000000:
            sn = n - 0x100000000
        if d >= 0x80000000:
            sd = d - 0x100000000
    un = -sn if sn < 0 else sn
    ud = -sd if sd < 0 else sd
    p = 0
    q = 0
    for i in range(31, skipped - 1, -1):
        bit = (un >> i) & 1
        if p >= 0:
            p = 2 * p + bit - ud
        else:
            p = 2 * p + bit + ud
        q = (q << 1) | (1 if p >= 0 else 0)
    if p < 0:
        p += ud
    low = (1 << skipped) - 1
    q = (q << skipped) | low
    r = (p << skipped) | (un & low)
    if (sn < 0) != (sd < 0):
        q = -q
    if sn < 0:
        r = -r
    return q & 0xFFFFFFFF, r & 0xFFFFFFFF


def nonrestoring_div(dividend: int, divisor: int, signed: bool = False, raw: int = 0) -> tuple[int, int]:
    """Non-restoring division with truncated iteration.

    Only the top ``32 - div_skipped_bits(raw)`` quotient bits are computed; the
    skipped low bits are forced to 1. The remainder is the partial remainder
    aligned back to bit 0, i.e. ``dividend - (computed high quotient) * divisor``.
    Division by zero yields ``(0xFFFFFFFF, dividend)``.
    """
    return div32_kernel(dividend, divisor, signed, div_skipped_bits(raw))


def nonrestoring_div_batch(dividend, divisor, signed: bool = False, raw: int = 0):
    n = np.asarray(dividend, dtype=np.int64) & MASK32
    d = np.asarray(divisor, dtype=np.int64) & MASK32
    n, d = np.broadcast_arrays(n, d)
    skipped = div_skipped_bits(raw)
    if signed:
        sn = np.where(n >= 1 << 31, n - (1 << 32), n)
        sd = np.where(d >= 1 << 31, d - (1 << 32), d)
        un, ud = np.abs(sn), np.abs(sd)
    else:
        un, ud = n, d
    p = np.zeros(n.shape, dtype=np.int64)
    q = np.zeros(n.shape, dtype=np.int64)
    for i in range(31, skipped - 1, -1):
        bit = (un >> i) & 1
        p = np.where(p >= 0, 2 * p + bit - ud, 2 * p + bit + ud)
        q = (q << 1) | (p >= 0)
    p = np.where(p < 0, p + ud, p)
    low = (1 << skipped) - 1
    q = (q << skipped) | low
    r = (p << skipped) | (un & low)
    if signed:
        q = np.where((sn < 0) != (sd < 0), -q, q)
        r = np.where(sn < 0, -r, r)
    q = np.where(d == 0, MASK32, q & MASK32)
    r = np.where(d == 0, n, r & MASK32)
    return q.astype(np.uint64), r.astype(np.uint64)


def _exact_div(dividend: int, divisor: int, signed: bool) -> tuple[int, int]:
    dividend &= MASK32
    divisor &= MASK32
    if divisor == 0:
        return MASK32, dividend
    if not signed:
        return dividend // divisor, dividend % divisor
    sn, sd = _to_signed32(dividend), _to_signed32(divisor)
    q = abs(sn) // abs(sd)
    if (sn < 0) != (sd < 0):
        q = -q
    return q & MASK32, (sn - q * sd) & MASK32


def div_latency(error_field: int) -> int:
    return 2 + math.ceil((32 - div_skipped_bits(error_field)) / 2)


# ---------------------------------------------------------------------------
# circuit models

@dataclass(frozen=True)
class CircuitModel:
    """A pluggable arithmetic circuit that can occupy an execution-unit slot."""

    name: str
    unit: str
    evaluate: Callable
    latency: Callable[[int], int] = field(default=lambda error_field: 1)
    level: Callable[[int], int] = field(default=lambda error_field: 0)
    evaluate_batch: Optional[Callable] = None

    def __post_init__(self):
        if self.unit not in UNITS:
            raise ValueError(f"unknown unit {self.unit!r}; expected one of {UNITS}")

    def latency_cycles(self, error_field: int) -> int:
        cycles = int(self.latency(error_field))
        if cycles < 1:
            raise ValueError(f"circuit {self.name!r} reported latency {cycles} < 1")
        return cycles


def accurate_adder() -> CircuitModel:
    def evaluate(a, b, subtract, error_field=0, truncation=0):
        return (a - b if subtract else a + b) & MASK32

    def evaluate_batch(a, b, subtract, error_field=0, truncation=0):
        a = np.asarray(a, dtype=np.uint64)
        b = np.asarray(b, dtype=np.uint64)
        out = a + (~b + np.uint64(1)) if subtract else a + b
        return out & np.uint64(MASK32)

    return CircuitModel("accurate-adder", ADDER, evaluate, evaluate_batch=evaluate_batch)


def demo_adder(approximable_blocks: int = 4) -> CircuitModel:
    """Error-configurable carry-select adder; error field low byte is the block mask."""

    def evaluate(a, b, subtract, error_field=0, truncation=0):
        mask = AdderErrorMask.from_error_field(error_field, approximable_blocks)
        return _truncate(approx_add32(a, b, subtract, mask), truncation)

    def evaluate_batch(a, b, subtract, error_field=0, truncation=0):
        mask = AdderErrorMask.from_error_field(error_field, approximable_blocks)
        keep = np.uint64(~((1 << (truncation & 0xF)) - 1) & MASK32)
        return approx_add32_batch(a, b, subtract, mask) & keep

    def level(error_field):
        return AdderErrorMask.from_error_field(error_field, approximable_blocks).approximated_blocks

    return CircuitModel("demo-csa-adder", ADDER, evaluate, level=level, evaluate_batch=evaluate_batch)


def accurate_multiplier() -> CircuitModel:
    def evaluate(a, b, signedness="uu", error_field=0, truncation=0):
        ma, mb, negative = _split_sign(a, b, signedness)
        p = ma * mb
        return (-p if negative else p) & MASK64

    def evaluate_batch(a, b, signedness="uu", error_field=0, truncation=0):
        return mul32_batch(a, b, signedness, raw=None)

    return CircuitModel("accurate-multiplier", MULTIPLIER, evaluate,
                        latency=lambda ef: 4, evaluate_batch=evaluate_batch)


def demo_multiplier() -> CircuitModel:
    """Hierarchical 32-bit multiplier over the error-configurable 8-bit tile."""

    def evaluate(a, b, signedness="uu", error_field=0, truncation=0):
        return _truncate(mul32(a, b, signedness, raw=error_field & 0xFF), truncation)

    def evaluate_batch(a, b, signedness="uu", error_field=0, truncation=0):
        keep = np.uint64(~((1 << (truncation & 0xF)) - 1) & MASK64)
        return mul32_batch(a, b, signedness, raw=error_field & 0xFF) & keep

    return CircuitModel("demo-approx-multiplier", MULTIPLIER, evaluate,
                        latency=lambda ef: 4, level=lambda ef: mul_error_level(ef & 0xFF),
                        evaluate_batch=evaluate_batch)


def accurate_divider() -> CircuitModel:
    def evaluate(a, b, signed=False, error_field=0, truncation=0):
        return _exact_div(a, b, signed)

    def evaluate_batch(a, b, signed=False, error_field=0, truncation=0):
        return nonrestoring_div_batch(a, b, signed, raw=0)

    return CircuitModel("accurate-divider", DIVIDER, evaluate,
                        latency=lambda ef: div_latency(0), evaluate_batch=evaluate_batch)


def demo_divider() -> CircuitModel:
    """Non-restoring divider; the error field's low byte sets the skipped quotient bits."""

    def evaluate(a, b, signed=False, error_field=0, truncation=0):
        q, r = nonrestoring_div(a, b, signed, raw=error_field & 0xFF)
        return _truncate(q, truncation), r

    def evaluate_batch(a, b, signed=False, error_field=0, truncation=0):
        q, r = nonrestoring_div_batch(a, b, signed, raw=error_field & 0xFF)
        keep = np.uint64(~((1 << (truncation & 0xF)) - 1) & MASK32)
        return q & keep, r

    return CircuitModel("demo-nonrestoring-divider", DIVIDER, evaluate,
                        latency=div_latency, level=lambda ef: div_skipped_bits(ef & 0xFF),
                        evaluate_batch=evaluate_batch)


# ---------------------------------------------------------------------------
# registry

class SlotOccupiedError(ValueError):
    pass


class UnpopulatedSlotError(LookupError):
    def __init__(self, unit: str, slot: int):
        super().__init__(f"unpopulated circuit slot: {unit} slot {slot}")
        self.unit = unit
        self.slot = slot


class CircuitRegistry:
    """Four circuit slots per execution unit.

    Populated by default with the accurate circuits in slot 0 and the demo
    circuits in slot 1. Mutate only before simulation starts.
    """

    def __init__(self, populate: bool = True):
        self._slots: dict[str, list[Optional[CircuitModel]]] = {u: [None] * NUM_SLOTS for u in UNITS}
        if populate:
            self.register(ADDER, 0, accurate_adder())
            self.register(ADDER, 1, demo_adder())
            self.register(MULTIPLIER, 0, accurate_multiplier())
            self.register(MULTIPLIER, 1, demo_multiplier())
            self.register(DIVIDER, 0, accurate_divider())
            self.register(DIVIDER, 1, demo_divider())

    @staticmethod
    def _check(unit: str, slot: int) -> None:
        if unit not in UNITS:
            raise ValueError(f"unknown unit {unit!r}; expected one of {UNITS}")
        if not isinstance(slot, int) or not 0 <= slot < NUM_SLOTS:
            raise ValueError(f"slot {slot!r} out of range: each unit has slots 0..{NUM_SLOTS - 1}")

    def register(self, unit: str, slot: int, model: CircuitModel, replace: bool = False) -> tuple[str, int]:
        self._check(unit, slot)
        if model.unit != unit:
            raise ValueError(f"circuit {model.name!r} is a {model.unit}, cannot go in the {unit} unit")
        current = self._slots[unit][slot]
        if current is not None and not replace:
            raise SlotOccupiedError(
                f"{unit} slot {slot} already holds {current.name!r}; pass replace=True to overwrite")
        self._slots[unit][slot] = model
        return unit, slot

    def unregister(self, unit: str, slot: int) -> None:
        self._check(unit, slot)
        self._slots[unit][slot] = None

    def get(self, unit: str, slot: int) -> CircuitModel:
        self._check(unit, slot)
        model = self._slots[unit][slot]
        if model is None:
            raise UnpopulatedSlotError(unit, slot)
        return model

    def occupied(self, unit: str) -> list[int]:
        return [i for i, m in enumerate(self._slots[unit]) if m is not None]

    def select(self, unit: str, config) -> tuple[int, CircuitModel]:
        """Slot and circuit chosen by a decoded CSR (slot 0 when approximation is off)."""
        slot = config.circuit_select if config.approx_enable else 0
        return slot, self.get(unit, slot)
