"""ER / MRED / NMED of a circuit configuration against host arithmetic.

For an operand width ``w`` the exhaustive mode covers all ``2**(2w)`` operand
pairs (divisor 0 excluded for dividers). Exact results always come from
numpy's native integer arithmetic, never from a circuit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .circuits import ADDER, DIVIDER, MULTIPLIER, CircuitModel

LEVEL_ENCODINGS = (0x00, 0x40, 0x60, 0x70, 0x78, 0x7C, 0x7E)
MAX_EXHAUSTIVE_WIDTH = 16
_CHUNK = 1 << 20


@dataclass(frozen=True)
class RandomSampling:
    n: int
    seed: int = 0

    def __post_init__(self):
        if self.n <= 0:
            raise ValueError("sample count must be positive")

    def __str__(self):
        return f"random(n={self.n}, seed={self.seed})"


SampleMode = Union[str, RandomSampling]


@dataclass(frozen=True)
class ErrorReport:
    er: float
    mred: float
    nmed: float
    config_id: tuple  # (unit, slot, error_field, truncation)
    sample_mode: str
    pairs: int
    level: Optional[int] = None

    @property
    def error_field(self) -> int:
        return self.config_id[2]

    def percent(self) -> dict:
        return {"er": 100 * self.er, "mred": 100 * self.mred, "nmed": 100 * self.nmed}


def max_exact_result(unit: str, width: int) -> int:
    """NMED normaliser: the largest exact result over ``width``-bit operands."""
    top = (1 << width) - 1
    if unit == MULTIPLIER:
        return top * top
    if unit == ADDER:
        return 2 * top
    if unit == DIVIDER:
        return top
    raise ValueError(f"unknown unit {unit!r}")


def exact_results(unit: str, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if unit == MULTIPLIER:
        return a * b
    if unit == ADDER:
        return a + b
    if unit == DIVIDER:
        return a // b
    raise ValueError(f"unknown unit {unit!r}")


def _approx_results(circuit: CircuitModel, a, b, error_field: int, truncation: int) -> np.ndarray:
    flag = "uu" if circuit.unit == MULTIPLIER else False
    if circuit.evaluate_batch is not None:
        out = circuit.evaluate_batch(a, b, flag, error_field, truncation)
        if circuit.unit == DIVIDER:
            out = out[0]
    else:
        out = [circuit.evaluate(int(x), int(y), flag, error_field, truncation) for x, y in zip(a, b)]
        if circuit.unit == DIVIDER:
            out = [q for q, _ in out]
    return np.asarray(out, dtype=np.uint64).astype(np.int64)


def _pair_chunks(unit: str, width: int, mode: SampleMode):
    span = 1 << width
    if isinstance(mode, RandomSampling):
        rng = np.random.default_rng(mode.seed)
        remaining = mode.n
        while remaining:
            k = min(remaining, _CHUNK)
            a = rng.integers(0, span, size=k, dtype=np.int64)
            low = 1 if unit == DIVIDER else 0
            b = rng.integers(low, span, size=k, dtype=np.int64)
            yield a, b
            remaining -= k
        return
    total = span * span
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        a, b = idx >> width, idx & (span - 1)
        if unit == DIVIDER:
            keep = b != 0
            a, b = a[keep], b[keep]
        yield a, b


def evaluate_metrics(circuit: CircuitModel, width: int = 8, mode: SampleMode = "exhaustive",
                     error_field: int = 0, truncation: int = 0, slot: Optional[int] = None) -> ErrorReport:
    """Compare ``circuit`` at one configuration with exact host arithmetic.

    Zero exact results contribute a relative error of 0 when the circuit also
    returns 0 and 1 otherwise.
    """
    if width < 1:
        raise ValueError("width must be at least 1")
    if mode == "exhaustive":
        if width > MAX_EXHAUSTIVE_WIDTH:
            raise ValueError(
                f"exhaustive evaluation needs 2**{2 * width} pairs; width {width} exceeds "
                f"{MAX_EXHAUSTIVE_WIDTH}. Use random sampling (RandomSampling(n, seed)) instead.")
    elif not isinstance(mode, RandomSampling):
        raise ValueError(f"mode must be 'exhaustive' or RandomSampling, got {mode!r}")
    if width > 32:
        raise ValueError("operands are at most 32 bits wide")

    unit = circuit.unit
    n = 0
    mismatches = 0
    ed_sum = 0
    red_parts = []
    for a, b in _pair_chunks(unit, width, mode):
        exact = exact_results(unit, a, b)
        approx = _approx_results(circuit, a, b, error_field, truncation)
        ed = np.abs(exact - approx)
        wrong = ed != 0
        zero = exact == 0
        red = np.where(zero, wrong.astype(np.float64), ed / np.where(zero, 1, exact))
        n += a.size
        mismatches += int(np.count_nonzero(wrong))
        ed_sum += int(ed.sum())
        red_parts.append(float(np.sum(red)))
    red_sum = math.fsum(red_parts)
    return ErrorReport(
        er=mismatches / n,
        mred=red_sum / n,
        nmed=(ed_sum / n) / max_exact_result(unit, width),
        config_id=(unit, slot, error_field, truncation),
        sample_mode=str(mode),
        pairs=n,
        level=circuit.level(error_field),
    )


def sweep_levels(registry, unit: str, slot: int, error_fields: Iterable[int], width: int = 8,
                 mode: SampleMode = "exhaustive", truncation: int = 0) -> list[ErrorReport]:
    """One report per error field, in the order given."""
    circuit = registry.get(unit, slot)
    return [evaluate_metrics(circuit, width, mode, ef, truncation, slot) for ef in error_fields]


def format_table(reports: list[ErrorReport]) -> str:
    lines = [f"{'level':>5}  {'raw':>6}  {'NMED (%)':>9}  {'MRED (%)':>9}  {'ER (%)':>8}"]
    for r in reports:
        pct = r.percent()
        lines.append(f"{r.level:>5}  0x{r.error_field:04X}  {pct['nmed']:>9.4f}  {pct['mred']:>9.4f}  {pct['er']:>8.4f}")
    return "\n".join(lines)


def format_csv(reports: list[ErrorReport]) -> str:
    lines = ["level,raw,er,mred,nmed"]
    for r in reports:
        lines.append(f"{r.level},0x{r.error_field:04X},{r.er!r},{r.mred!r},{r.nmed!r}")
    return "\n".join(lines)

