"""``approxrv`` command line: run, metrics, sharpen, energy."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Optional, Sequence

from .circuits import ADDER, DIVIDER, MULTIPLIER, CircuitRegistry, UnpopulatedSlotError
from .csr import ALUCSR, DIVCSR, MULCSR
from .energy import CostTableError, MissingCostError, estimate, load_cost_table, load_trace
from .imaging import PgmError, load_pgm, save_pgm, sweep_sharpen, synthetic_image
from .isa import CoreConfig, Machine, SimulatorFault
from .loader import ElfError, load_program
from .metrics import MAX_EXHAUSTIVE_WIDTH, LEVEL_ENCODINGS, RandomSampling, format_csv, format_table, sweep_levels

EXIT_FAULT = 2
EXIT_MAX_STEPS = 3

UNIT_NAMES = {"add": ADDER, "adder": ADDER, "mul": MULTIPLIER, "multiplier": MULTIPLIER,
              "div": DIVIDER, "divider": DIVIDER}
DEFAULT_LEVELS = {
    MULTIPLIER: LEVEL_ENCODINGS,
    ADDER: (0x00, 0x08, 0x0C, 0x0E, 0x0F),
    DIVIDER: (16, 12, 8, 4, 0),
}


class CliError(Exception):
    pass


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _word(text: str) -> int:
    value = _int(text)
    if not 0 <= value <= 0xFFFFFFFF:
        raise argparse.ArgumentTypeError(f"{text} does not fit in 32 bits")
    return value


def _levels(text: str, unit: str) -> tuple[int, ...]:
    if text is None:
        return DEFAULT_LEVELS[unit]
    if text == "table4":
        if unit != MULTIPLIER:
            raise CliError("--levels table4 applies to the multiplier only")
        return LEVEL_ENCODINGS
    try:
        return tuple(int(part, 0) for part in text.split(",") if part.strip())
    except ValueError:
        raise CliError(f"--levels expects 'table4' or a comma-separated list of integers, got {text!r}") from None


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# run

def cmd_run(args) -> int:
    config = CoreConfig(extension=args.ext, m_enabled=not args.no_m, memory_size=args.mem_size,
                        pipeline_model=args.pipeline)
    state = load_program(args.program, fmt="flat" if args.flat else "elf32", entry=args.entry,
                         config=config, load_address=args.load_addr)
    state.csrs[ALUCSR] = args.alucsr
    state.csrs[MULCSR] = args.mulcsr
    state.csrs[DIVCSR] = args.divcsr
    machine = Machine(config, CircuitRegistry(), state, console=sys.stdout.buffer,
                      record_trace=args.trace is not None)
    fault = None
    try:
        report = machine.run(args.max_steps)
    except SimulatorFault as exc:
        fault = exc
        report = None
    sys.stdout.flush()
    if args.trace is not None:
        with open(args.trace, "w", encoding="utf-8") as fh:
            for event in machine.trace:
                fh.write(event.to_json() + "\n")
    if fault is not None:
        where = "" if fault.pc is None else f" at pc=0x{fault.pc:08x}"
        print(f"fault: {fault.reason}{where} after {state.instret} instructions", file=sys.stderr)
        return EXIT_FAULT
    if args.format == "json":
        print(json.dumps(report.to_dict()), file=sys.stderr)
    elif args.format == "csv":
        d = report.to_dict()
        print(_csv([list(d.values())], list(d)), end="", file=sys.stderr)
    else:
        print(report.to_text(), file=sys.stderr)
    if report.status == "max_steps":
        print(f"stopped: step limit {args.max_steps} reached", file=sys.stderr)
        return EXIT_MAX_STEPS
    return report.exit_code & 0xFF


# ---------------------------------------------------------------------------
# metrics

def cmd_metrics(args) -> int:
    unit = UNIT_NAMES[args.unit]
    levels = _levels(args.levels, unit)
    if args.samples is not None:
        mode = RandomSampling(args.samples, args.seed)
    else:
        mode = "exhaustive"
        if args.width > MAX_EXHAUSTIVE_WIDTH:
            raise CliError(f"--width {args.width} --exhaustive would need 2**{2 * args.width} pairs "
                           f"(limit is width {MAX_EXHAUSTIVE_WIDTH}); use --samples N instead")
    reports = sweep_levels(CircuitRegistry(), unit, args.slot, levels, args.width, mode)
    if args.format == "csv":
        _emit(format_csv(reports))
    elif args.format == "json":
        _emit(json.dumps([{"level": r.level, "raw": r.error_field, "er": r.er, "mred": r.mred,
                           "nmed": r.nmed, "pairs": r.pairs, "mode": r.sample_mode} for r in reports], indent=2))
    else:
        _emit(f"{unit} slot {args.slot}, width {args.width}, {reports[0].sample_mode if reports else mode}")
        _emit(format_table(reports))
    return 0


# ---------------------------------------------------------------------------
# sharpen

def _format_db(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:.4f}"


def cmd_sharpen(args) -> int:
    if args.image is None:
        width, _, height = args.synthetic.partition("x")
        try:
            img = synthetic_image(int(width), int(height or width))
        except ValueError as exc:
            raise CliError(f"--synthetic expects WxH, got {args.synthetic!r}: {exc}") from None
    else:
        img = load_pgm(args.image)
    registry = CircuitRegistry()
    levels = _levels(args.levels, MULTIPLIER)
    results = sweep_sharpen(img, levels, registry, slot=args.slot, include_exact=not args.no_exact)

    energy = None
    if args.with_energy:
        table = load_cost_table(args.cost_table)
        products = 25 * img.width * img.height
        energy = [products * (table.lookup(MULTIPLIER, 0, None) if r.raw is None
                              else table.lookup(MULTIPLIER, args.slot, r.level)) for r in results]

    if args.save_dir:
        os.makedirs(args.save_dir, exist_ok=True)
        for r in results:
            name = "exact" if r.raw is None else f"level{r.level}_0x{r.raw:02x}"
            save_pgm(r.image, os.path.join(args.save_dir, f"sharpened_{name}.pgm"))

    header = ["level", "raw", "psnr_db", "mse"] + (["mul_energy_pj"] if energy else [])
    rows = []
    for i, r in enumerate(results):
        row = [r.label, "-" if r.raw is None else f"0x{r.raw:02X}", _format_db(r.psnr_db), repr(r.mse)]
        if energy:
            row.append(f"{energy[i]:.4f}")
        rows.append(row)
    if args.format == "csv":
        _emit(_csv(rows, header))
    elif args.format == "json":
        _emit(json.dumps([dict(zip(header, row)) for row in rows], indent=2))
    else:
        # one column per configuration, one row per quantity
        labels = ["Error level", "Error field", "PSNR (dB)", "MSE"] + (["Mul. energy (pJ)"] if energy else [])
        cols = [[row[0], row[1], row[2], f"{results[i].mse:.4f}"] + row[4:] for i, row in enumerate(rows)]
        widths = [max(len(c) for c in col) for col in cols]
        lead = max(len(label) for label in labels)
        for j, label in enumerate(labels):
            _emit(f"{label:<{lead}}  " + "  ".join(f"{col[j]:>{w}}" for col, w in zip(cols, widths)))
    return 0


# ---------------------------------------------------------------------------
# energy

def cmd_energy(args) -> int:
    table = load_cost_table(args.cost_table)
    report = estimate(load_trace(args.trace), table, cycles=args.cycles)
    if args.format == "json":
        _emit(json.dumps(report.to_dict(), indent=2))
    elif args.format == "csv":
        d = report.to_dict()
        rows = [[b["unit"], b["slot"], "" if b["level"] is None else b["level"], b["count"], repr(b["energy_pj"])]
                for b in d["breakdown"]]
        rows.append(["base", "", "", d["instret"], repr(d["base_pj"])])
        rows.append(["total", "", "", d["instret"], repr(d["total_pj"])])
        _emit(_csv(rows, ["unit", "slot", "level", "count", "energy_pj"]))
    else:
        _emit(report.to_text())
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "csv", "json"), default=argparse.SUPPRESS,
                        help="output format (default: text)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed for random sampling (default: 0)")

    parser = argparse.ArgumentParser(prog="approxrv", parents=[common],
                                     description="Approximation-aware RV32I(E)M simulator and benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run a guest program")
    run.add_argument("program")
    run.add_argument("--flat", action="store_true", help="treat the program as a raw binary image")
    run.add_argument("--entry", type=_word, help="entry point (default: ELF entry, or 0 for flat images)")
    run.add_argument("--load-addr", type=_word, help="load address of a flat image (default: entry)")
    run.add_argument("--ext", choices=("I", "E"), default="I", help="base ISA: 32 or 16 registers")
    run.add_argument("--no-m", action="store_true", help="disable the M extension")
    run.add_argument("--mem-size", type=_int, default=16 << 20, help="RAM size in bytes (default 16 MiB)")
    run.add_argument("--pipeline", choices=("off", "three_stage"), default="off", help="cycle model")
    for name in ("alucsr", "mulcsr", "divcsr"):
        run.add_argument(f"--{name}", type=_word, default=0, help=f"initial {name} value")
    run.add_argument("--max-steps", type=_int, default=10_000_000)
    run.add_argument("--trace", help="write the execution trace as JSON lines")
    run.set_defaults(func=cmd_run)

    met = sub.add_parser("metrics", parents=[common], help="ER/MRED/NMED sweep over error fields")
    met.add_argument("--unit", choices=sorted(UNIT_NAMES), default="mul")
    met.add_argument("--slot", type=int, default=1)
    met.add_argument("--levels", help="'table4' or comma-separated error fields")
    met.add_argument("--width", type=int, default=8, help="operand width in bits")
    how = met.add_mutually_exclusive_group()
    how.add_argument("--exhaustive", action="store_true", help="all operand pairs (default)")
    how.add_argument("--samples", type=int, help="random operand pairs instead of exhaustive")
    met.set_defaults(func=cmd_metrics)

    sh = sub.add_parser("sharpen", parents=[common], help="image sharpening PSNR sweep")
    sh.add_argument("image", nargs="?", help="8-bit binary PGM (default: synthetic image)")
    sh.add_argument("--synthetic", default="64x64", help="size of the synthetic image when no file is given")
    sh.add_argument("--levels", help="'table4' or comma-separated multiplier error fields")
    sh.add_argument("--slot", type=int, default=1)
    sh.add_argument("--no-exact", action="store_true", help="omit the accurate-multiplier row")
    sh.add_argument("--with-energy", action="store_true", help="add a multiplier energy column")
    sh.add_argument("--cost-table", help="cost table JSON (default: shipped table)")
    sh.add_argument("--save-dir", help="write each sharpened image as PGM here")
    sh.set_defaults(func=cmd_sharpen)

    en = sub.add_parser("energy", parents=[common], help="energy estimate from a run trace")
    en.add_argument("trace", help="JSON-lines trace written by 'run --trace'")
    en.add_argument("--cost-table", help="cost table JSON (default: shipped table)")
    en.add_argument("--cycles", type=_int, help="cycle count, enables the average power figure")
    en.set_defaults(func=cmd_energy)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.format = getattr(args, "format", "text")
    args.seed = getattr(args, "seed", 0)
    try:
        return args.func(args)
    except (CliError, UnpopulatedSlotError, ElfError, PgmError, CostTableError, MissingCostError,
            FileNotFoundError, IsADirectoryError, PermissionError, ValueError) as exc:
        message = exc.args[0] if isinstance(exc, KeyError) else str(exc)
        if isinstance(exc, OSError) and exc.filename and "no such file" not in message:
            message = f"{exc.strerror}: {exc.filename}"
        print(f"error: {message}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
