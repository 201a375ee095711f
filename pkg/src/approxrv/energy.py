"""Trace-driven energy estimate from a per-operation cost table.

Every retired instruction pays ``base_energy_per_instr_pj``; instructions
that used an execution unit additionally pay the table entry for their
(unit, slot, level). Entries with ``level: null`` match any level of that
unit and slot.

Cost table document (JSON)::

    {
      "base_energy_per_instr_pj": 7.0,
      "voltage_v": 1.1,
      "frequency_mhz": 620,
      "fallback_pj": null,
      "entries": [
        {"unit": "multiplier", "slot": 0, "level": null, "energy_pj": 0.2960892,
         "source": "..."}
      ]
    }
"""
from __future__ import annotations

import json
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from json.decoder import JSONObject
from json.scanner import py_make_scanner
from typing import Iterable, Optional, Union

from .circuits import ADDER, DIVIDER, MAX_DIV_SKIP, MULTIPLIER, UNITS
from .isa import TraceEvent

# circuit figures: (power uW, delay ns); energy per op = power x delay
ADDER_ACCURATE = (183.62, 2.02)
ADDER_APPROX_POWER = (152.0, 136.1)  # no block approximated .. all four approximated
ADDER_APPROX_DELAY = 1.33
MUL_ACCURATE = (224.31, 1.32)
MUL_APPROX_POWER = (67.43, 81.05)  # level 0 .. level 6
MUL_APPROX_DELAY = 0.64
DIV_ACCURATE_ADDS = 32  # one full-width add/sub per quotient bit
BASE_ENERGY_PJ = 7.0  # calibration constant, not a measurement
VOLTAGE_V = 1.1
FREQUENCY_MHZ = 620.0

DEFAULT_TABLE = "default_cost_table.json"
_TOP_KEYS = {"base_energy_per_instr_pj", "voltage_v", "frequency_mhz", "fallback_pj", "entries"}
_ENTRY_KEYS = {"unit", "slot", "level", "energy_pj", "source"}


class CostTableError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None, source: Optional[str] = None):
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


class MissingCostError(KeyError):
    def __init__(self, key: tuple):
        unit, slot, level = key
        super().__init__(f"no cost entry for unit={unit} slot={slot} level={level} and no fallback configured")
        self.key = key

    def __str__(self):
        return self.args[0]


def pj(power_uw: float, delay_ns: float) -> float:
    """Energy of one operation in pJ (uW x ns = fJ)."""
    return power_uw * delay_ns / 1000


@dataclass(frozen=True)
class CostEntry:
    unit: str
    slot: int
    level: Optional[int]
    energy_pj: float
    source: str = ""


@dataclass
class CostTable:
    entries: dict = field(default_factory=dict)  # (unit, slot, level or None) -> CostEntry
    base_energy_per_instr_pj: float = BASE_ENERGY_PJ
    voltage_v: Optional[float] = VOLTAGE_V
    frequency_mhz: Optional[float] = FREQUENCY_MHZ
    fallback_pj: Optional[float] = None

    def add(self, entry: CostEntry) -> None:
        key = (entry.unit, entry.slot, entry.level)
        if key in self.entries:
            raise CostTableError(f"duplicate entry for {key}")
        self.entries[key] = entry

    def lookup(self, unit: str, slot: int, level: Optional[int]) -> float:
        entry = self.entries.get((unit, slot, level)) or self.entries.get((unit, slot, None))
        if entry is not None:
            return entry.energy_pj
        if self.fallback_pj is not None:
            return self.fallback_pj
        raise MissingCostError((unit, slot, level))

    def covers(self, unit: str, slot: int) -> bool:
        return any(k[0] == unit and k[1] == slot for k in self.entries)

    def to_document(self) -> dict:
        return {
            "base_energy_per_instr_pj": self.base_energy_per_instr_pj,
            "voltage_v": self.voltage_v,
            "frequency_mhz": self.frequency_mhz,
            "fallback_pj": self.fallback_pj,
            "entries": [{"unit": e.unit, "slot": e.slot, "level": e.level,
                         "energy_pj": e.energy_pj, "source": e.source} for e in self.entries.values()],
        }


def default_cost_table() -> CostTable:
    """Table built from the circuit power and delay figures (what the shipped JSON holds)."""
    table = CostTable()
    add = pj(*ADDER_ACCURATE)
    table.add(CostEntry(ADDER, 0, None, add, "accurate carry-select adder: 183.62 uW x 2.02 ns"))
    lo, hi = ADDER_APPROX_POWER
    for level in range(5):
        power = lo + (hi - lo) * level / 4
        table.add(CostEntry(ADDER, 1, level, pj(power, ADDER_APPROX_DELAY),
                            f"demo adder, {level} blocks approximated: {power:.4g} uW (linear between "
                            f"152.0 and 136.1 uW) x 1.33 ns"))
    table.add(CostEntry(MULTIPLIER, 0, None, pj(*MUL_ACCURATE), "accurate Wallace multiplier: 224.31 uW x 1.32 ns"))
    lo, hi = MUL_APPROX_POWER
    for level in range(7):
        power = lo + (hi - lo) * level / 6
        table.add(CostEntry(MULTIPLIER, 1, level, pj(power, MUL_APPROX_DELAY),
                            f"demo multiplier level {level}: {power:.4g} uW (linear between 67.43 and "
                            f"81.05 uW) x 0.64 ns"))
    div = DIV_ACCURATE_ADDS * add
    table.add(CostEntry(DIVIDER, 0, None, div, "calibration: 32 accurate adder operations per division"))
    for skipped in range(MAX_DIV_SKIP + 1):
        table.add(CostEntry(DIVIDER, 1, skipped, div * (32 - skipped) / 32,
                            f"calibration: accurate divider scaled by {32 - skipped}/32 iterations"))
    return table


# ---------------------------------------------------------------------------
# loading

class _LineDict(dict):
    line = None


def _located_decoder() -> json.JSONDecoder:
    """Decoder whose objects remember the line of their opening brace."""
    decoder = json.JSONDecoder()

    def parse_object(s_and_end, *args):
        s, end = s_and_end
        obj, new_end = JSONObject(s_and_end, *args)
        located = _LineDict(obj)
        located.line = s.count("\n", 0, end) + 1
        return located, new_end

    decoder.parse_object = parse_object
    decoder.scan_once = py_make_scanner(decoder)
    return decoder


def _number(value, what: str, line, source, allow_none: bool = False):
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise CostTableError(f"{what} must be a finite number, got {value!r}", line, source)
    return float(value)


def parse_cost_table(text: str, source: Optional[str] = None) -> CostTable:
    try:
        doc = _located_decoder().decode(text)
    except json.JSONDecodeError as exc:
        raise CostTableError(f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno, source) from None
    if not isinstance(doc, dict):
        raise CostTableError("top level must be an object", 1, source)
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise CostTableError(f"unknown top-level key(s): {', '.join(sorted(unknown))}", doc.line, source)
    if "entries" not in doc or not isinstance(doc["entries"], list):
        raise CostTableError("'entries' must be a list", doc.line, source)
    base = _number(doc.get("base_energy_per_instr_pj", BASE_ENERGY_PJ), "base_energy_per_instr_pj", doc.line, source)
    fallback = _number(doc.get("fallback_pj"), "fallback_pj", doc.line, source, allow_none=True)
    for name, value in (("base_energy_per_instr_pj", base), ("fallback_pj", fallback)):
        if value is not None and value < 0:
            raise CostTableError(f"{name} must be >= 0, got {value}", doc.line, source)
    table = CostTable(
        base_energy_per_instr_pj=base,
        voltage_v=_number(doc.get("voltage_v"), "voltage_v", doc.line, source, allow_none=True),
        frequency_mhz=_number(doc.get("frequency_mhz"), "frequency_mhz", doc.line, source, allow_none=True),
        fallback_pj=fallback,
    )
    for index, item in enumerate(doc["entries"]):
        line = getattr(item, "line", doc.line)
        if not isinstance(item, dict):
            raise CostTableError(f"entry {index} must be an object", line, source)
        unknown = set(item) - _ENTRY_KEYS
        if unknown:
            raise CostTableError(f"entry {index}: unknown key(s): {', '.join(sorted(unknown))}", line, source)
        for key in ("unit", "slot", "energy_pj"):
            if key not in item:
                raise CostTableError(f"entry {index}: missing '{key}'", line, source)
        unit = item["unit"]
        if unit not in UNITS:
            raise CostTableError(f"entry {index}: unknown unit {unit!r}; expected one of {', '.join(UNITS)}",
                                 line, source)
        slot = item["slot"]
        if isinstance(slot, bool) or not isinstance(slot, int) or not 0 <= slot <= 3:
            raise CostTableError(f"entry {index}: slot must be an integer in 0..3, got {slot!r}", line, source)
        level = item.get("level")
        if level is not None and (isinstance(level, bool) or not isinstance(level, int) or level < 0):
            raise CostTableError(f"entry {index}: level must be a non-negative integer or null, got {level!r}",
                                 line, source)
        energy = _number(item["energy_pj"], f"entry {index}: energy_pj", line, source)
        if energy < 0:
            raise CostTableError(f"entry {index}: negative energy_pj {energy}", line, source)
        try:
            table.add(CostEntry(unit, slot, level, energy, str(item.get("source", ""))))
        except CostTableError as exc:
            raise CostTableError(f"entry {index}: {exc}", line, source) from None
    return table


def load_cost_table(path: Union[str, os.PathLike, None] = None) -> CostTable:
    """Load a cost table; ``None`` loads the shipped default."""
    if path is None:
        text = resources.files("approxrv").joinpath("data", DEFAULT_TABLE).read_text(encoding="utf-8")
        return parse_cost_table(text, DEFAULT_TABLE)
    with open(path, encoding="utf-8") as fh:
        return parse_cost_table(fh.read(), os.fspath(path))


# ---------------------------------------------------------------------------
# estimation

def load_trace(path: Union[str, os.PathLike]) -> list[TraceEvent]:
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                events.append(TraceEvent(**json.loads(line)))
            except (json.JSONDecodeError, TypeError) as exc:
                raise ValueError(f"{os.fspath(path)}:{lineno}: malformed trace event: {exc}") from None
    return events


@dataclass
class EnergyReport:
    total_pj: float
    instret: int
    base_pj: float
    arithmetic_pj: float
    breakdown: dict  # (unit, slot, level) -> (count, energy_pj)
    cycles: Optional[int] = None
    frequency_mhz: Optional[float] = None

    @property
    def pj_per_op(self) -> float:
        return self.total_pj / self.instret if self.instret else 0.0

    @property
    def average_power_mw(self) -> Optional[float]:
        if not self.cycles or not self.frequency_mhz:
            return None
        seconds = self.cycles / (self.frequency_mhz * 1e6)
        return self.total_pj * 1e-12 / seconds * 1e3

    def to_dict(self) -> dict:
        return {
            "total_pj": self.total_pj,
            "pj_per_op": self.pj_per_op,
            "instret": self.instret,
            "base_pj": self.base_pj,
            "arithmetic_pj": self.arithmetic_pj,
            "average_power_mw": self.average_power_mw,
            "breakdown": [{"unit": u, "slot": s, "level": lv, "count": c, "energy_pj": e}
                          for (u, s, lv), (c, e) in sorted(self.breakdown.items(), key=_sort_key)],
        }

    def to_text(self) -> str:
        lines = [f"instructions    {self.instret}",
                 f"total           {self.total_pj:.4f} pJ",
                 f"per instruction {self.pj_per_op:.4f} pJ",
                 f"base            {self.base_pj:.4f} pJ",
                 f"arithmetic      {self.arithmetic_pj:.4f} pJ"]
        if self.average_power_mw is not None:
            lines.append(f"average power   {self.average_power_mw:.4f} mW")
        if self.breakdown:
            lines.append(f"{'unit':<11} {'slot':>4} {'level':>5} {'count':>9} {'energy (pJ)':>12}")
            for (u, s, lv), (c, e) in sorted(self.breakdown.items(), key=_sort_key):
                lines.append(f"{u:<11} {s:>4} {'-' if lv is None else lv:>5} {c:>9} {e:>12.4f}")
        return "\n".join(lines)


def _sort_key(item):
    (unit, slot, level), _ = item
    return UNITS.index(unit), slot, -1 if level is None else level


def estimate(trace: Iterable[TraceEvent], table: Optional[CostTable] = None,
             cycles: Optional[int] = None) -> EnergyReport:
    """Fold a trace into total energy, energy per instruction and a per-(unit, slot, level) breakdown."""
    table = table or load_cost_table()
    counts: dict = defaultdict(int)
    instret = 0
    for event in trace:
        instret += 1
        if event.unit is not None:
            counts[(event.unit, event.slot, event.level)] += 1
    breakdown = {key: (n, n * table.lookup(*key)) for key, n in counts.items()}
    arithmetic = math.fsum(e for _, e in breakdown.values())
    base = instret * table.base_energy_per_instr_pj
    return EnergyReport(base + arithmetic, instret, base, arithmetic, breakdown, cycles, table.frequency_mhz)


def multiplier_energy_pj(table: CostTable, slot: int, level: Optional[int]) -> float:
    return table.lookup(MULTIPLIER, slot, level)
