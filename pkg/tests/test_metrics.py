import math
import time

import pytest

from approxrv.circuits import ADDER, DIVIDER, MULTIPLIER, CircuitRegistry, UnpopulatedSlotError
from approxrv.metrics import (
    LEVEL_ENCODINGS, RandomSampling, evaluate_metrics, format_csv, format_table, max_exact_result, sweep_levels,
)
from oracles import adder_oracle, collapse, div_oracle, pp_columns

# (raw, ER, MRED, NMED) of the demo multiplier, 8-bit operands, all 65536 pairs
MUL8_GOLDEN = [
    (0x00, 0.7995758056640625, 0.02925702331227047, 0.003540074730872741),
    (0x40, 0.71148681640625, 0.014702883063238279, 0.0013745314302191466),
    (0x60, 0.598876953125, 0.006791072273319616, 0.0005049740484429065),
    (0x70, 0.4638671875, 0.002826240598827866, 0.0001713283352556709),
    (0x78, 0.31640625, 0.001019552735502667, 5.142252979623222e-05),
    (0x7C, 0.171875, 0.0002928608400603546, 1.249519415609381e-05),
    (0x7E, 0.0625, 5.2544317493544486e-05, 1.922337562475971e-06),
]

# demo adder, 8-bit operands: only blocks 0 and 1 see operand bits
ADD8_GOLDEN = [
    (0x0, 0.8998870849609375, 0.21160847926453308, 0.125),
    (0x8, 0.8998870849609375, 0.21160847926453308, 0.125),
    (0xC, 0.8998870849609375, 0.17387075655251819, 0.09387254901960784),
    (0xE, 0.68359375, 0.014885988214599456, 0.005637254901960784),
    (0xF, 0.0, 0.0, 0.0),
]


def oracle_metrics(pairs, exact_fn, approx_fn, norm):
    n = wrong = ed_sum = 0
    red = []
    for a, b in pairs:
        e, x = exact_fn(a, b), approx_fn(a, b)
        ed = abs(e - x)
        n += 1
        wrong += ed != 0
        ed_sum += ed
        red.append((ed != 0) if e == 0 else ed / e)
    return wrong / n, math.fsum(red) / n, ed_sum / n / norm


@pytest.fixture(scope="module")
def registry():
    return CircuitRegistry()


@pytest.fixture(scope="module")
def mul_reports(registry):
    return sweep_levels(registry, MULTIPLIER, 1, LEVEL_ENCODINGS, 8)


def test_multiplier_goldens(mul_reports):
    for report, (raw, er, mred, nmed) in zip(mul_reports, MUL8_GOLDEN):
        assert report.error_field == raw
        assert report.er == er
        assert report.mred == pytest.approx(mred, rel=1e-12)
        assert report.nmed == pytest.approx(nmed, rel=1e-12)
        assert report.pairs == 65536


def test_multiplier_goldens_match_partial_product_oracle():
    pairs = [(a, b) for a in range(256) for b in range(256)]
    columns = {p: pp_columns(*p) for p in pairs}
    for raw, er, mred, nmed in MUL8_GOLDEN:
        level = bin((raw >> 1) & 0x3F).count("1")
        got = oracle_metrics(pairs, lambda a, b: a * b, lambda a, b: collapse(columns[(a, b)], level), 255 * 255)
        assert got[0] == er
        assert got[1] == pytest.approx(mred, rel=1e-12)
        assert got[2] == pytest.approx(nmed, rel=1e-12)


def test_adder_goldens_match_bit_oracle(registry):
    reports = sweep_levels(registry, ADDER, 1, [g[0] for g in ADD8_GOLDEN], 8)
    pairs = [(a, b) for a in range(0, 256, 3) for b in range(256)]
    for report, (mask, er, mred, nmed) in zip(reports, ADD8_GOLDEN):
        assert (report.er, report.mred, report.nmed) == pytest.approx((er, mred, nmed), rel=1e-12)
        sub = evaluate_metrics(registry.get(ADDER, 1), 8, "exhaustive", mask, slot=1)
        assert sub == report
        # oracle on a subsample must agree with the circuit on the same subsample
        o = oracle_metrics(pairs, lambda a, b: a + b, lambda a, b: adder_oracle(a, b, False, mask), 510)
        c = oracle_metrics(pairs, lambda a, b: a + b,
                           lambda a, b: registry.get(ADDER, 1).evaluate(a, b, False, mask, 0), 510)
        assert o == c


def test_divider_metrics_exclude_zero_divisor_and_match_oracle(registry):
    report = evaluate_metrics(registry.get(DIVIDER, 1), 8, "exhaustive", 4)
    assert report.pairs == 256 * 255
    pairs = [(a, b) for a in range(256) for b in range(1, 256)]
    o = oracle_metrics(pairs, lambda a, b: a // b, lambda a, b: div_oracle(a, b, 4)[0], 255)
    assert (report.er, report.mred, report.nmed) == pytest.approx(o, rel=1e-12)
    exact = evaluate_metrics(registry.get(DIVIDER, 1), 8, "exhaustive", 0)
    assert (exact.er, exact.mred, exact.nmed) == (0.0, 0.0, 0.0)


def test_metric_properties(mul_reports):
    for metric in ("er", "mred", "nmed"):
        values = [getattr(r, metric) for r in mul_reports]
        assert all(0 <= v <= 1 for v in values)
        assert all(x >= y for x, y in zip(values, values[1:])), metric
    assert mul_reports[0].mred > mul_reports[-1].mred
    assert [r.level for r in mul_reports] == list(range(7))


def test_accurate_slot_has_zero_error(registry):
    for unit in (ADDER, MULTIPLIER, DIVIDER):
        r = evaluate_metrics(registry.get(unit, 0), 6)
        assert (r.er, r.mred, r.nmed) == (0.0, 0.0, 0.0)


def test_random_sampling_is_seeded_and_close_to_exhaustive(registry, mul_reports):
    circuit = registry.get(MULTIPLIER, 1)
    a = evaluate_metrics(circuit, 8, RandomSampling(100_000, seed=1), 0x00)
    b = evaluate_metrics(circuit, 8, RandomSampling(100_000, seed=1), 0x00)
    assert a == b
    assert a.er == pytest.approx(mul_reports[0].er, rel=0.05)
    assert a.mred == pytest.approx(mul_reports[0].mred, rel=0.05)
    assert "seed=1" in a.sample_mode


def test_wide_sampling_runs(registry):
    r = evaluate_metrics(registry.get(MULTIPLIER, 1), 32, RandomSampling(20_000, seed=3), 0x00)
    assert 0 < r.mred < 1


def test_exhaustive_width_limit_suggests_sampling(registry):
    with pytest.raises(ValueError, match="random sampling"):
        evaluate_metrics(registry.get(MULTIPLIER, 1), 20, "exhaustive")
    with pytest.raises(ValueError):
        evaluate_metrics(registry.get(MULTIPLIER, 1), 0)
    with pytest.raises(ValueError):
        RandomSampling(0)


def test_empty_slot(registry):
    with pytest.raises(UnpopulatedSlotError, match="unpopulated circuit slot"):
        sweep_levels(registry, MULTIPLIER, 3, LEVEL_ENCODINGS)


def test_zero_exact_result_convention():
    from approxrv.circuits import CircuitModel
    always_one = CircuitModel("one", MULTIPLIER, lambda a, b, s, ef, t: 1)
    r = evaluate_metrics(always_one, 2)
    # products 0 (7 of 16 pairs) count as relative error 1; 1*1 is exact
    exact = [a * b for a in range(4) for b in range(4)]
    expected = sum(1 if e == 0 else abs(e - 1) / e for e in exact) / 16
    assert r.mred == pytest.approx(expected, rel=1e-15)


def test_normalisers():
    assert max_exact_result(MULTIPLIER, 8) == 65025
    assert max_exact_result(ADDER, 8) == 510
    assert max_exact_result(DIVIDER, 8) == 255


def test_formatting(mul_reports):
    csv_text = format_csv(mul_reports)
    assert csv_text.splitlines()[0] == "level,raw,er,mred,nmed"
    assert csv_text.splitlines()[1].startswith("0,0x0000,0.7995758056640625,")
    assert len(format_table(mul_reports).splitlines()) == 8


def test_sweep_speed(registry):
    start = time.perf_counter()
    sweep_levels(registry, MULTIPLIER, 1, LEVEL_ENCODINGS, 8)
    assert time.perf_counter() - start < 1.0
