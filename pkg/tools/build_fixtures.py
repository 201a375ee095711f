"""Regenerate the binaries and listings under fixtures/.

    python tools/build_fixtures.py [outdir]
"""
import pathlib
import sys

from approxrv import programs
from approxrv.loader import build_elf32

ELF_BASE = 0x0

FIXTURES = {
    "factorial": programs.factorial(10),
    "factorial_approx": programs.factorial(10, mulcsr=0x007E0003),
    "alu_straight": programs.alu_straight_line(1000),
    "load_use": programs.load_use_pairs(100),
}


def main(outdir="fixtures"):
    out = pathlib.Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, prog in FIXTURES.items():
        code = prog.build()
        (out / f"{name}.bin").write_bytes(code)
        (out / f"{name}.elf").write_bytes(build_elf32(code, entry=ELF_BASE))
        (out / f"{name}.lst").write_text(prog.listing(ELF_BASE))
        print(f"{name}: {len(code)} bytes")


if __name__ == "__main__":
    main(*sys.argv[1:])
