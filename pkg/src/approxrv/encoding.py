"""RV32IM instruction encoders and a small label-resolving program builder.

Used to generate the shipped fixtures and randomized test programs. There is
no text assembler; programs are built from Python calls::

    p = ProgramBuilder()
    p.emit("addi", rd=10, rs1=0, imm=5)
    p.label("loop")
    p.emit("bne", rs1=10, rs2=0, imm="loop")
    code = p.build()
"""
from __future__ import annotations

import struct
from typing import Union

ABI_NAMES = ("zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 a6 a7 "
             "s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6").split()
REG = {name: i for i, name in enumerate(ABI_NAMES)}
REG["fp"] = 8
REG.update({f"x{i}": i for i in range(32)})

# name -> (format, opcode, funct3, funct7)
INSTRUCTIONS = {
    "lui": ("U", 0x37, None, None),
    "auipc": ("U", 0x17, None, None),
    "jal": ("J", 0x6F, None, None),
    "jalr": ("I", 0x67, 0, None),
    "beq": ("B", 0x63, 0, None),
    "bne": ("B", 0x63, 1, None),
    "blt": ("B", 0x63, 4, None),
    "bge": ("B", 0x63, 5, None),
    "bltu": ("B", 0x63, 6, None),
    "bgeu": ("B", 0x63, 7, None),
    "lb": ("I", 0x03, 0, None),
    "lh": ("I", 0x03, 1, None),
    "lw": ("I", 0x03, 2, None),
    "lbu": ("I", 0x03, 4, None),
    "lhu": ("I", 0x03, 5, None),
    "sb": ("S", 0x23, 0, None),
    "sh": ("S", 0x23, 1, None),
    "sw": ("S", 0x23, 2, None),
    "addi": ("I", 0x13, 0, None),
    "slti": ("I", 0x13, 2, None),
    "sltiu": ("I", 0x13, 3, None),
    "xori": ("I", 0x13, 4, None),
    "ori": ("I", 0x13, 6, None),
    "andi": ("I", 0x13, 7, None),
    "slli": ("SH", 0x13, 1, 0x00),
    "srli": ("SH", 0x13, 5, 0x00),
    "srai": ("SH", 0x13, 5, 0x20),
    "add": ("R", 0x33, 0, 0x00),
    "sub": ("R", 0x33, 0, 0x20),
    "sll": ("R", 0x33, 1, 0x00),
    "slt": ("R", 0x33, 2, 0x00),
    "sltu": ("R", 0x33, 3, 0x00),
    "xor": ("R", 0x33, 4, 0x00),
    "srl": ("R", 0x33, 5, 0x00),
    "sra": ("R", 0x33, 5, 0x20),
    "or": ("R", 0x33, 6, 0x00),
    "and": ("R", 0x33, 7, 0x00),
    "mul": ("R", 0x33, 0, 0x01),
    "mulh": ("R", 0x33, 1, 0x01),
    "mulhsu": ("R", 0x33, 2, 0x01),
    "mulhu": ("R", 0x33, 3, 0x01),
    "div": ("R", 0x33, 4, 0x01),
    "divu": ("R", 0x33, 5, 0x01),
    "rem": ("R", 0x33, 6, 0x01),
    "remu": ("R", 0x33, 7, 0x01),
    "fence": ("I", 0x0F, 0, None),
    "ecall": ("SYS", 0x73, 0, 0x000),
    "ebreak": ("SYS", 0x73, 0, 0x001),
    "csrrw": ("CSR", 0x73, 1, None),
    "csrrs": ("CSR", 0x73, 2, None),
    "csrrc": ("CSR", 0x73, 3, None),
    "csrrwi": ("CSRI", 0x73, 5, None),
    "csrrsi": ("CSRI", 0x73, 6, None),
    "csrrci": ("CSRI", 0x73, 7, None),
}


def _reg(r: Union[int, str]) -> int:
    r = REG[r] if isinstance(r, str) else r
    if not 0 <= r < 32:
        raise ValueError(f"register index {r} out of range")
    return r


def _check_imm(imm: int, bits: int, name: str, align: int = 1) -> None:
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    if not lo <= imm <= hi:
        raise ValueError(f"{name}: immediate {imm} outside [{lo}, {hi}]")
    if imm % align:
        raise ValueError(f"{name}: immediate {imm} not a multiple of {align}")


def encode(name: str, rd=0, rs1=0, rs2=0, imm: int = 0, csr: int = 0) -> int:
    """Encode one instruction to its 32-bit word."""
    fmt, opcode, f3, f7 = INSTRUCTIONS[name]
    rd, rs1, rs2 = _reg(rd), _reg(rs1), _reg(rs2)
    if fmt == "R":
        return (f7 << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode
    if fmt == "I":
        _check_imm(imm, 12, name)
        return ((imm & 0xFFF) << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode
    if fmt == "SH":
        if not 0 <= imm < 32:
            raise ValueError(f"{name}: shift amount {imm} outside [0, 31]")
        return (f7 << 25) | (imm << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode
    if fmt == "S":
        _check_imm(imm, 12, name)
        imm &= 0xFFF
        return ((imm >> 5) << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | ((imm & 0x1F) << 7) | opcode
    if fmt == "B":
        _check_imm(imm, 13, name, align=2)
        imm &= 0x1FFF
        return (((imm >> 12) & 1) << 31 | ((imm >> 5) & 0x3F) << 25 | rs2 << 20 | rs1 << 15
                | f3 << 12 | ((imm >> 1) & 0xF) << 8 | ((imm >> 11) & 1) << 7 | opcode)
    if fmt == "U":
        if not -(1 << 19) <= imm < (1 << 20):
            raise ValueError(f"{name}: upper immediate {imm} outside 20 bits")
        return ((imm & 0xFFFFF) << 12) | (rd << 7) | opcode
    if fmt == "J":
        _check_imm(imm, 21, name, align=2)
        imm &= 0x1FFFFF
        return (((imm >> 20) & 1) << 31 | ((imm >> 1) & 0x3FF) << 21 | ((imm >> 11) & 1) << 20
                | ((imm >> 12) & 0xFF) << 12 | rd << 7 | opcode)
    if fmt == "SYS":
        return (f7 << 20) | opcode
    if fmt == "CSR":
        return ((csr & 0xFFF) << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode
    if fmt == "CSRI":
        # rs1 carries the 5-bit zero-extended immediate
        if not 0 <= imm < 32:
            raise ValueError(f"{name}: zimm {imm} outside [0, 31]")
        return ((csr & 0xFFF) << 20) | (imm << 15) | (f3 << 12) | (rd << 7) | opcode
    raise AssertionError(fmt)


def split_const(value: int) -> tuple[int, int]:
    """(upper, lower) such that ``lui upper; addi lower`` loads ``value``."""
    value &= 0xFFFFFFFF
    lower = value & 0xFFF
    if lower >= 0x800:
        lower -= 0x1000
    upper = ((value - lower) >> 12) & 0xFFFFF
    return upper, lower


def _fmt_field(key: str, value) -> str:
    if key in ("rd", "rs1", "rs2") and isinstance(value, int):
        return ABI_NAMES[value]
    if key == "csr":
        return f"0x{value:03x}"
    return str(value)


class ProgramBuilder:
    """Accumulates instructions; branch/jump immediates may name labels."""

    def __init__(self):
        self._items: list[tuple] = []
        self._labels: dict[str, int] = {}

    def __len__(self):
        return len(self._items)

    @property
    def here(self) -> int:
        return 4 * len(self._items)

    def label(self, name: str) -> "ProgramBuilder":
        if name in self._labels:
            raise ValueError(f"duplicate label {name!r}")
        self._labels[name] = self.here
        return self

    def emit(self, name: str, **fields) -> "ProgramBuilder":
        self._items.append((name, fields))
        return self

    def word(self, value: int) -> "ProgramBuilder":
        self._items.append((None, {"value": value & 0xFFFFFFFF}))
        return self

    def li(self, rd, value: int) -> "ProgramBuilder":
        upper, lower = split_const(value)
        if upper == 0:
            return self.emit("addi", rd=rd, rs1=0, imm=lower)
        self.emit("lui", rd=rd, imm=upper)
        if lower:
            self.emit("addi", rd=rd, rs1=rd, imm=lower)
        return self

    def csrw(self, csr: int, rs1) -> "ProgramBuilder":
        return self.emit("csrrw", rd=0, rs1=rs1, csr=csr)

    def words(self) -> list[int]:
        out = []
        for index, (name, fields) in enumerate(self._items):
            if name is None:
                out.append(fields["value"])
                continue
            fields = dict(fields)
            imm = fields.get("imm")
            if isinstance(imm, str):
                if imm not in self._labels:
                    raise ValueError(f"undefined label {imm!r}")
                fields["imm"] = self._labels[imm] - 4 * index
            out.append(encode(name, **fields))
        return out

    def listing(self, base: int = 0) -> str:
        """Source-style listing: address, encoded word and mnemonic per line."""
        by_addr: dict[int, list[str]] = {}
        for name, addr in self._labels.items():
            by_addr.setdefault(addr, []).append(name)
        lines = []
        for index, (word, (name, fields)) in enumerate(zip(self.words(), self._items)):
            addr = 4 * index
            for lab in by_addr.get(addr, []):
                lines.append(f"{lab}:")
            if name is None:
                text = f".word 0x{word:08x}"
            else:
                args = ", ".join(f"{k}={_fmt_field(k, v)}" for k, v in fields.items())
                text = f"{name} {args}".rstrip()
            lines.append(f"    {base + addr:08x}:  {word:08x}    {text}")
        return "\n".join(lines) + "\n"

    def build(self) -> bytes:
        words = self.words()
        return struct.pack(f"<{len(words)}I", *words)
