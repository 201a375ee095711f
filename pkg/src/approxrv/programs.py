"""Guest programs shipped as fixtures: factorial and CPI microbenchmarks."""
from __future__ import annotations

from .csr import MULCSR
from .encoding import ProgramBuilder

STACK_TOP = 0x10000
DATA_BASE = 0x7F0  # reachable from x0 with a 12-bit offset


def _exit(p: ProgramBuilder, code_reg="zero") -> None:
    p.emit("addi", rd="a0", rs1=code_reg, imm=0)
    p.li("a7", 93)
    p.emit("ecall")


def _print_unsigned(p: ProgramBuilder, src: str) -> None:
    """Print register ``src`` in decimal plus newline via write(1, buf, len)."""
    p.emit("addi", rd="t2", rs1="sp", imm=-16)
    p.li("t3", ord("\n"))
    p.emit("sb", rs1="t2", rs2="t3", imm=0)
    p.li("t4", 10)
    p.emit("addi", rd="t5", rs1=src, imm=0)
    p.li("t6", 1)
    p.label("print_digit")
    p.emit("remu", rd="t3", rs1="t5", rs2="t4")
    p.emit("addi", rd="t3", rs1="t3", imm=ord("0"))
    p.emit("addi", rd="t2", rs1="t2", imm=-1)
    p.emit("sb", rs1="t2", rs2="t3", imm=0)
    p.emit("addi", rd="t6", rs1="t6", imm=1)
    p.emit("divu", rd="t5", rs1="t5", rs2="t4")
    p.emit("bne", rs1="t5", rs2="zero", imm="print_digit")
    p.li("a0", 1)
    p.emit("addi", rd="a1", rs1="t2", imm=0)
    p.emit("addi", rd="a2", rs1="t6", imm=0)
    p.li("a7", 64)
    p.emit("ecall")


def factorial(n: int = 10, mulcsr: int | None = None) -> ProgramBuilder:
    """Iterative n!; the result is printed, left in s0, and the guest exits 0.

    With ``mulcsr`` set, the program writes that value to the multiplier CSR
    before the loop, so every multiply in the loop runs on the selected circuit.
    """
    p = ProgramBuilder()
    p.li("sp", STACK_TOP)
    p.li("a0", n)
    p.emit("jal", rd="ra", imm="factorial")
    p.emit("addi", rd="s0", rs1="a0", imm=0)
    _print_unsigned(p, "s0")
    _exit(p)

    p.label("factorial")
    if mulcsr is not None:
        p.li("t1", mulcsr)
        p.csrw(MULCSR, "t1")
    p.li("t0", 1)
    p.label("fact_loop")
    p.emit("beq", rs1="a0", rs2="zero", imm="fact_done")
    p.emit("mul", rd="t0", rs1="t0", rs2="a0")
    p.emit("addi", rd="a0", rs1="a0", imm=-1)
    p.emit("jal", rd="zero", imm="fact_loop")
    p.label("fact_done")
    p.emit("addi", rd="a0", rs1="t0", imm=0)
    p.emit("jalr", rd="zero", rs1="ra", imm=0)
    return p


def alu_straight_line(count: int = 1000) -> ProgramBuilder:
    """``count`` independent ALU ops followed by the exit sequence; no hazards."""
    p = ProgramBuilder()
    ops = ("addi", "xori", "ori", "andi", "slti")
    for k in range(count):
        rd = 5 + k % 3
        p.emit(ops[k % len(ops)], rd=rd, rs1=rd, imm=k % 7 + 1)
    _exit(p)
    return p


def load_use_pairs(count: int = 100) -> ProgramBuilder:
    """``count`` back-to-back ``lw``/dependent ``add`` pairs; one stall each."""
    p = ProgramBuilder()
    for _ in range(count):
        p.emit("lw", rd="t0", rs1="zero", imm=DATA_BASE)
        p.emit("add", rd="t1", rs1="t0", rs2="t0")
    _exit(p)
    return p
