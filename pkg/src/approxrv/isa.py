"""RV32I(E)M instruction-accurate simulator with CSR-controlled execution units.

ADD/ADDI/SUB go through the adder slot chosen by ``alucsr``, the MUL family
through ``mulcsr`` and the DIV/REM family through ``divcsr``. Everything else
(address generation, comparisons, branches, shifts, logic) is exact.

A three-stage cycle-accounting overlay can be enabled with
``CoreConfig(pipeline_model="three_stage")``; it charges the circuit's extra
latency, a flush penalty for taken branches and jumps, and a load-use stall.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from typing import BinaryIO, NamedTuple, Optional

from .circuits import ADDER, DIVIDER, MULTIPLIER, CircuitRegistry, UnpopulatedSlotError
from .csr import ALUCSR, CSR_NAMES, CYCLE, DIVCSR, INSTRET, MULCSR, decode_csr_fields

MASK32 = 0xFFFFFFFF
DEFAULT_MEMORY_SIZE = 16 * 1024 * 1024

SYS_WRITE = 64
SYS_EXIT = 93


class SimulatorFault(Exception):
    """Terminates a run; carries the faulting pc and instruction word."""

    def __init__(self, message: str, pc: Optional[int] = None, word: Optional[int] = None):
        self.reason = message
        self.pc = pc
        self.word = word
        where = []
        if pc is not None:
            where.append(f"pc=0x{pc:08x}")
        if word is not None:
            where.append(f"word=0x{word:08x}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class IllegalInstruction(SimulatorFault):
    pass


class MisalignedAccess(SimulatorFault):
    pass


class MemoryAccessFault(SimulatorFault):
    pass


class UnpopulatedSlotFault(SimulatorFault):
    pass


@dataclass
class CoreConfig:
    extension: str = "I"
    m_enabled: bool = True
    memory_size: int = DEFAULT_MEMORY_SIZE
    pipeline_model: str = "off"
    branch_flush_penalty: int = 2
    load_use_penalty: int = 1

    def __post_init__(self):
        if self.extension not in ("I", "E"):
            raise ValueError(f"extension must be 'I' or 'E', got {self.extension!r}")
        if self.pipeline_model not in ("off", "three_stage"):
            raise ValueError(f"pipeline_model must be 'off' or 'three_stage', got {self.pipeline_model!r}")
        if self.memory_size <= 0 or self.memory_size > 1 << 32:
            raise ValueError("memory_size must be in (0, 4 GiB]")

    @property
    def num_regs(self) -> int:
        return 16 if self.extension == "E" else 32


@dataclass
class MachineState:
    pc: int = 0
    regs: list = field(default_factory=lambda: [0] * 32)
    mem: bytearray = field(default_factory=lambda: bytearray(DEFAULT_MEMORY_SIZE))
    csrs: dict = field(default_factory=lambda: {ALUCSR: 0, MULCSR: 0, DIVCSR: 0})
    cycle: int = 0
    instret: int = 0
    halted: bool = False
    exit_code: Optional[int] = None

    @classmethod
    def for_config(cls, config: CoreConfig) -> "MachineState":
        return cls(regs=[0] * config.num_regs, mem=bytearray(config.memory_size))


class TraceEvent(NamedTuple):
    instr_index: int
    pc: int
    opclass: str
    mnemonic: str
    unit: Optional[str]
    slot: Optional[int]
    error_field: Optional[int]
    level: Optional[int]
    latency: int

    def to_json(self) -> str:
        return json.dumps(self._asdict())


@dataclass
class ExitReport:
    status: str  # "exit" or "max_steps"
    exit_code: Optional[int]
    instret: int
    cycle: int
    trace: list = field(default_factory=list)

    @property
    def cpi(self) -> float:
        return self.cycle / self.instret if self.instret else 0.0

    def to_dict(self) -> dict:
        return {"status": self.status, "exit_code": self.exit_code, "instret": self.instret,
                "cycle": self.cycle, "cpi": self.cpi}

    def to_text(self) -> str:
        code = "-" if self.exit_code is None else str(self.exit_code)
        return (f"status    {self.status}\nexit_code {code}\ninstret   {self.instret}\n"
                f"cycle     {self.cycle}\ncpi       {self.cpi:.4f}")


# ---------------------------------------------------------------------------
# decoding

class Instr(NamedTuple):
    name: str
    rd: int
    rs1: int
    rs2: int
    imm: int
    csr: int
    srcs: tuple  # nonzero registers read, for hazard detection
    regs: tuple  # every register field in use, for the RV32E range check


def _sext(value: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


_OP = {
    (0, 0x00): "add", (0, 0x20): "sub", (1, 0x00): "sll", (2, 0x00): "slt",
    (3, 0x00): "sltu", (4, 0x00): "xor", (5, 0x00): "srl", (5, 0x20): "sra",
    (6, 0x00): "or", (7, 0x00): "and",
    (0, 0x01): "mul", (1, 0x01): "mulh", (2, 0x01): "mulhsu", (3, 0x01): "mulhu",
    (4, 0x01): "div", (5, 0x01): "divu", (6, 0x01): "rem", (7, 0x01): "remu",
}
_OP_IMM = {0: "addi", 2: "slti", 3: "sltiu", 4: "xori", 6: "ori", 7: "andi"}
_BRANCH = {0: "beq", 1: "bne", 4: "blt", 5: "bge", 6: "bltu", 7: "bgeu"}
_LOAD = {0: "lb", 1: "lh", 2: "lw", 4: "lbu", 5: "lhu"}
_STORE = {0: "sb", 1: "sh", 2: "sw"}
_CSR = {1: "csrrw", 2: "csrrs", 3: "csrrc", 5: "csrrwi", 6: "csrrsi", 7: "csrrci"}
M_OPS = frozenset(["mul", "mulh", "mulhsu", "mulhu", "div", "divu", "rem", "remu"])


def decode(word: int) -> Instr:
    """Decode a 32-bit word; raises IllegalInstruction (without pc) when invalid."""
    opcode = word & 0x7F
    rd = (word >> 7) & 0x1F
    f3 = (word >> 12) & 0x7
    rs1 = (word >> 15) & 0x1F
    rs2 = (word >> 20) & 0x1F
    f7 = word >> 25
    name = None
    imm = 0
    csr = 0
    regs = ()  # (rd, rs1, rs2) as used, for register-range checks
    srcs = ()
    if opcode == 0x33:
        name = _OP.get((f3, f7))
        srcs = (rs1, rs2)
        regs = (rd, rs1, rs2)
    elif opcode == 0x13:
        if f3 == 1:
            name = "slli" if f7 == 0 else None
            imm = rs2
        elif f3 == 5:
            name = {0x00: "srli", 0x20: "srai"}.get(f7)
            imm = rs2
        else:
            name = _OP_IMM[f3]
            imm = _sext(word >> 20, 12)
        srcs = (rs1,)
        regs = (rd, rs1)
    elif opcode == 0x03:
        name = _LOAD.get(f3)
        imm = _sext(word >> 20, 12)
        srcs = (rs1,)
        regs = (rd, rs1)
    elif opcode == 0x23:
        name = _STORE.get(f3)
        imm = _sext(((word >> 25) << 5) | rd, 12)
        srcs = (rs1, rs2)
        regs = (rs1, rs2)
        rd = 0
    elif opcode == 0x63:
        name = _BRANCH.get(f3)
        imm = _sext(((word >> 31) & 1) << 12 | ((word >> 7) & 1) << 11
                    | ((word >> 25) & 0x3F) << 5 | ((word >> 8) & 0xF) << 1, 13)
        srcs = (rs1, rs2)
        regs = (rs1, rs2)
        rd = 0
    elif opcode == 0x37 or opcode == 0x17:
        name = "lui" if opcode == 0x37 else "auipc"
        imm = word & 0xFFFFF000
        regs = (rd,)
    elif opcode == 0x6F:
        name = "jal"
        imm = _sext(((word >> 31) & 1) << 20 | ((word >> 12) & 0xFF) << 12
                    | ((word >> 20) & 1) << 11 | ((word >> 21) & 0x3FF) << 1, 21)
        regs = (rd,)
    elif opcode == 0x67:
        name = "jalr" if f3 == 0 else None
        imm = _sext(word >> 20, 12)
        srcs = (rs1,)
        regs = (rd, rs1)
    elif opcode == 0x0F:
        name = "fence" if f3 in (0, 1) else None
    elif opcode == 0x73:
        if f3 == 0:
            name = {0x00000073: "ecall", 0x00100073: "ebreak"}.get(word)
        else:
            name = _CSR.get(f3)
            csr = word >> 20
            if f3 < 4:
                srcs = (rs1,)
                regs = (rd, rs1)
            else:
                imm = rs1
                regs = (rd,)
    if name is None:
        raise IllegalInstruction("illegal instruction", word=word)
    srcs = tuple(r for r in srcs if r)
    return Instr(name, rd, rs1, rs2, imm, csr, srcs, regs)


_OPCLASS = {}
for _n in ("add", "sub", "sll", "slt", "sltu", "xor", "srl", "sra", "or", "and",
           "addi", "slti", "sltiu", "xori", "ori", "andi", "slli", "srli", "srai"):
    _OPCLASS[_n] = "alu"
for _n in ("mul", "mulh", "mulhsu", "mulhu"):
    _OPCLASS[_n] = "mul"
for _n in ("div", "divu", "rem", "remu"):
    _OPCLASS[_n] = "div"
for _n in _LOAD.values():
    _OPCLASS[_n] = "load"
for _n in _STORE.values():
    _OPCLASS[_n] = "store"
for _n in _BRANCH.values():
    _OPCLASS[_n] = "branch"
for _n in _CSR.values():
    _OPCLASS[_n] = "csr"
_OPCLASS.update(lui="upper", auipc="upper", jal="jump", jalr="jump",
                fence="system", ecall="system", ebreak="system")


# ---------------------------------------------------------------------------
# machine

class Machine:
    """One simulator instance: architectural state, core config and circuit registry.

    Not thread-safe; use one instance per thread.
    """

    def __init__(self, config: Optional[CoreConfig] = None, registry: Optional[CircuitRegistry] = None,
                 state: Optional[MachineState] = None, console: Optional[BinaryIO] = None,
                 record_trace: bool = True):
        self.config = config or CoreConfig()
        self.registry = registry or CircuitRegistry()
        self.state = state or MachineState.for_config(self.config)
        if len(self.state.regs) != self.config.num_regs:
            raise ValueError(f"state has {len(self.state.regs)} registers, config expects {self.config.num_regs}")
        self.console = console
        self.record_trace = record_trace
        self.trace: list[TraceEvent] = []
        self._decoded: dict[int, tuple] = {}
        self._last_load_rd = 0
        self._unit_info = None
        self._three_stage = self.config.pipeline_model == "three_stage"
        self._handlers = {name: getattr(self, "_op_" + name) for name in _OPCLASS}

    # -- program loading ----------------------------------------------------

    def load_bytes(self, addr: int, data: bytes) -> None:
        if addr < 0 or addr + len(data) > len(self.state.mem):
            raise MemoryAccessFault(f"image [0x{addr:x}, 0x{addr + len(data):x}) outside RAM")
        self.state.mem[addr:addr + len(data)] = data

    # -- CSRs -----------------------------------------------------------------

    def csr_read(self, addr: int) -> int:
        st = self.state
        if addr in st.csrs:
            return st.csrs[addr]
        if addr == CYCLE:
            return st.cycle & MASK32
        if addr == INSTRET:
            return st.instret & MASK32
        raise IllegalInstruction(f"unimplemented CSR 0x{addr:03x}", pc=st.pc)

    def csr_write(self, addr: int, value: int) -> int:
        """Write a CSR and return the value now held."""
        st = self.state
        if addr in st.csrs:
            st.csrs[addr] = value & MASK32
            return st.csrs[addr]
        if addr in (CYCLE, INSTRET):
            raise IllegalInstruction(f"write to read-only CSR {CSR_NAMES[addr]}", pc=st.pc)
        raise IllegalInstruction(f"unimplemented CSR 0x{addr:03x}", pc=st.pc)

    # -- memory -----------------------------------------------------------------

    def _check(self, addr: int, size: int, what: str) -> None:
        if addr & (size - 1):
            raise MisalignedAccess(f"misaligned {what} at 0x{addr:08x}")
        if addr + size > len(self.state.mem):
            raise MemoryAccessFault(f"{what} at 0x{addr:08x} outside RAM")

    def read_mem(self, addr: int, size: int, signed: bool = False) -> int:
        self._check(addr, size, "load")
        return int.from_bytes(self.state.mem[addr:addr + size], "little", signed=signed) & MASK32

    def write_mem(self, addr: int, size: int, value: int) -> None:
        self._check(addr, size, "store")
        self.state.mem[addr:addr + size] = (value & ((1 << (8 * size)) - 1)).to_bytes(size, "little")

    # -- execution ----------------------------------------------------------------

    def _fetch_decode(self, pc: int) -> Instr:
        if pc & 3:
            raise MisalignedAccess("misaligned instruction fetch", pc=pc)
        if pc + 4 > len(self.state.mem):
            raise MemoryAccessFault("instruction fetch outside RAM", pc=pc)
        word = int.from_bytes(self.state.mem[pc:pc + 4], "little")
        instr = self._decoded.get(word)
        if instr is None:
            try:
                instr = decode(word)
            except IllegalInstruction:
                raise IllegalInstruction("illegal instruction", pc=pc, word=word) from None
            self._decoded[word] = instr
        if instr.name in M_OPS and not self.config.m_enabled:
            raise IllegalInstruction("M extension disabled", pc=pc, word=word)
        if self.config.extension == "E" and any(r >= 16 for r in instr.regs):
            raise IllegalInstruction("register x16-x31 used under RV32E", pc=pc, word=word)
        return instr

    def step(self) -> TraceEvent:
        st = self.state
        if st.halted:
            raise SimulatorFault("machine is halted", pc=st.pc)
        pc = st.pc
        instr = self._fetch_decode(pc)
        self._unit_info = None
        try:
            next_pc = self._handlers[instr.name](instr, pc)
        except SimulatorFault as fault:
            if fault.pc is None:
                fault.pc = pc
            raise
        st.regs[0] = 0
        if next_pc is None:
            next_pc = (pc + 4) & MASK32
        elif next_pc & 3:
            raise MisalignedAccess(f"jump target 0x{next_pc:08x} not 4-byte aligned", pc=pc)

        unit = self._unit_info
        latency = unit[4] if unit else 1
        if self._three_stage:
            cost = latency
            if self._last_load_rd and self._last_load_rd in instr.srcs:
                cost += self.config.load_use_penalty
            opclass = _OPCLASS[instr.name]
            if opclass == "jump" or (opclass == "branch" and next_pc != pc + 4):
                cost += self.config.branch_flush_penalty
            self._last_load_rd = instr.rd if opclass == "load" else 0
        else:
            cost = 1
        st.cycle += cost
        index = st.instret
        st.instret += 1
        st.pc = next_pc
        if unit:
            event = TraceEvent(index, pc, _OPCLASS[instr.name], instr.name, unit[0], unit[1], unit[2], unit[3], latency)
        else:
            event = TraceEvent(index, pc, _OPCLASS[instr.name], instr.name, None, None, None, None, latency)
        if self.record_trace:
            self.trace.append(event)
        return event

    def run(self, max_steps: int = 10_000_000) -> ExitReport:
        """Step until the guest exits or ``max_steps`` is reached; faults propagate."""
        st = self.state
        step = self.step
        steps = 0
        while not st.halted and steps < max_steps:
            step()
            steps += 1
        status = "exit" if st.halted else "max_steps"
        return ExitReport(status, st.exit_code, st.instret, st.cycle, self.trace)

    # -- execution-unit dispatch ------------------------------------------------------

    def _select(self, unit: str, csr_addr: int):
        cfg = decode_csr_fields(self.state.csrs[csr_addr])
        slot = cfg.circuit_select if cfg.approx_enable else 0
        try:
            model = self.registry.get(unit, slot)
        except UnpopulatedSlotError as exc:
            raise UnpopulatedSlotFault(str(exc)) from None
        if cfg.approx_enable:
            error_field, truncation = cfg.error_field, cfg.truncation
        else:
            error_field, truncation = 0, 0
        self._unit_info = (unit, slot, error_field, model.level(error_field), model.latency_cycles(error_field))
        return model, error_field, truncation

    def _add(self, a: int, b: int, subtract: bool) -> int:
        model, ef, trunc = self._select(ADDER, ALUCSR)
        return model.evaluate(a & MASK32, b & MASK32, subtract, ef, trunc) & MASK32

    def _mul(self, a: int, b: int, signedness: str) -> int:
        model, ef, trunc = self._select(MULTIPLIER, MULCSR)
        return model.evaluate(a, b, signedness, ef, trunc)

    def _div(self, a: int, b: int, signed: bool) -> tuple[int, int]:
        model, ef, trunc = self._select(DIVIDER, DIVCSR)
        q, r = model.evaluate(a, b, signed, ef, trunc)
        return q & MASK32, r & MASK32

    # -- instruction semantics (registers hold unsigned 32-bit values) ---------------

    def _op_lui(self, i, pc):
        self.state.regs[i.rd] = i.imm

    def _op_auipc(self, i, pc):
        self.state.regs[i.rd] = (pc + i.imm) & MASK32

    def _op_jal(self, i, pc):
        self.state.regs[i.rd] = (pc + 4) & MASK32
        return (pc + i.imm) & MASK32

    def _op_jalr(self, i, pc):
        regs = self.state.regs
        target = (regs[i.rs1] + i.imm) & MASK32 & ~1
        regs[i.rd] = (pc + 4) & MASK32
        return target

    def _branch(self, i, pc, taken):
        return (pc + i.imm) & MASK32 if taken else None

    def _op_beq(self, i, pc):
        r = self.state.regs
        return self._branch(i, pc, r[i.rs1] == r[i.rs2])

    def _op_bne(self, i, pc):
        r = self.state.regs
        return self._branch(i, pc, r[i.rs1] != r[i.rs2])

    def _op_blt(self, i, pc):
        r = self.state.regs
        return self._branch(i, pc, _sext(r[i.rs1], 32) < _sext(r[i.rs2], 32))

    def _op_bge(self, i, pc):
        r = self.state.regs
        return self._branch(i, pc, _sext(r[i.rs1], 32) >= _sext(r[i.rs2], 32))

    def _op_bltu(self, i, pc):
        r = self.state.regs
        return self._branch(i, pc, r[i.rs1] < r[i.rs2])

    def _op_bgeu(self, i, pc):
        r = self.state.regs
        return self._branch(i, pc, r[i.rs1] >= r[i.rs2])

    def _addr(self, i):
        return (self.state.regs[i.rs1] + i.imm) & MASK32

    def _op_lb(self, i, pc):
        self.state.regs[i.rd] = self.read_mem(self._addr(i), 1, signed=True)

    def _op_lh(self, i, pc):
        self.state.regs[i.rd] = self.read_mem(self._addr(i), 2, signed=True)

    def _op_lw(self, i, pc):
        self.state.regs[i.rd] = self.read_mem(self._addr(i), 4)

    def _op_lbu(self, i, pc):
        self.state.regs[i.rd] = self.read_mem(self._addr(i), 1)

    def _op_lhu(self, i, pc):
        self.state.regs[i.rd] = self.read_mem(self._addr(i), 2)

    def _op_sb(self, i, pc):
        self.write_mem(self._addr(i), 1, self.state.regs[i.rs2])

    def _op_sh(self, i, pc):
        self.write_mem(self._addr(i), 2, self.state.regs[i.rs2])

    def _op_sw(self, i, pc):
        self.write_mem(self._addr(i), 4, self.state.regs[i.rs2])

    def _op_addi(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._add(r[i.rs1], i.imm, False)

    def _op_slti(self, i, pc):
        r = self.state.regs
        r[i.rd] = int(_sext(r[i.rs1], 32) < i.imm)

    def _op_sltiu(self, i, pc):
        r = self.state.regs
        r[i.rd] = int(r[i.rs1] < (i.imm & MASK32))

    def _op_xori(self, i, pc):
        r = self.state.regs
        r[i.rd] = (r[i.rs1] ^ i.imm) & MASK32

    def _op_ori(self, i, pc):
        r = self.state.regs
        r[i.rd] = (r[i.rs1] | i.imm) & MASK32

    def _op_andi(self, i, pc):
        r = self.state.regs
        r[i.rd] = r[i.rs1] & i.imm & MASK32

    def _op_slli(self, i, pc):
        r = self.state.regs
        r[i.rd] = (r[i.rs1] << i.imm) & MASK32

    def _op_srli(self, i, pc):
        r = self.state.regs
        r[i.rd] = r[i.rs1] >> i.imm

    def _op_srai(self, i, pc):
        r = self.state.regs
        r[i.rd] = (_sext(r[i.rs1], 32) >> i.imm) & MASK32

    def _op_add(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._add(r[i.rs1], r[i.rs2], False)

    def _op_sub(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._add(r[i.rs1], r[i.rs2], True)

    def _op_sll(self, i, pc):
        r = self.state.regs
        r[i.rd] = (r[i.rs1] << (r[i.rs2] & 31)) & MASK32

    def _op_slt(self, i, pc):
        r = self.state.regs
        r[i.rd] = int(_sext(r[i.rs1], 32) < _sext(r[i.rs2], 32))

    def _op_sltu(self, i, pc):
        r = self.state.regs
        r[i.rd] = int(r[i.rs1] < r[i.rs2])

    def _op_xor(self, i, pc):
        r = self.state.regs
        r[i.rd] = r[i.rs1] ^ r[i.rs2]

    def _op_srl(self, i, pc):
        r = self.state.regs
        r[i.rd] = r[i.rs1] >> (r[i.rs2] & 31)

    def _op_sra(self, i, pc):
        r = self.state.regs
        r[i.rd] = (_sext(r[i.rs1], 32) >> (r[i.rs2] & 31)) & MASK32

    def _op_or(self, i, pc):
        r = self.state.regs
        r[i.rd] = r[i.rs1] | r[i.rs2]

    def _op_and(self, i, pc):
        r = self.state.regs
        r[i.rd] = r[i.rs1] & r[i.rs2]

    def _op_mul(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._mul(r[i.rs1], r[i.rs2], "ss") & MASK32

    def _op_mulh(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._mul(r[i.rs1], r[i.rs2], "ss") >> 32

    def _op_mulhsu(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._mul(r[i.rs1], r[i.rs2], "su") >> 32

    def _op_mulhu(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._mul(r[i.rs1], r[i.rs2], "uu") >> 32

    def _op_div(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._div(r[i.rs1], r[i.rs2], True)[0]

    def _op_divu(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._div(r[i.rs1], r[i.rs2], False)[0]

    def _op_rem(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._div(r[i.rs1], r[i.rs2], True)[1]

    def _op_remu(self, i, pc):
        r = self.state.regs
        r[i.rd] = self._div(r[i.rs1], r[i.rs2], False)[1]

    def _op_fence(self, i, pc):
        pass

    def _op_ebreak(self, i, pc):
        raise SimulatorFault("ebreak", pc=pc)

    def _op_ecall(self, i, pc):
        st = self.state
        r = st.regs
        number = r[5] if self.config.extension == "E" else r[17]
        if number == SYS_EXIT:
            st.halted = True
            st.exit_code = _sext(r[10], 32)
        elif number == SYS_WRITE:
            buf, length = r[11], r[12]
            if buf + length > len(st.mem):
                raise MemoryAccessFault(f"write() buffer [0x{buf:x}, +{length}) outside RAM", pc=pc)
            data = bytes(st.mem[buf:buf + length])
            stream = self.console if self.console is not None else sys.stdout.buffer
            stream.write(data)
            stream.flush()
            r[10] = length
        else:
            raise SimulatorFault(f"unsupported ecall {number}", pc=pc)

    def _csr_op(self, i, operand, mode, writes):
        # mode: "w" write, "s" set bits, "c" clear bits
        st = self.state
        if mode == "w" and i.rd == 0:
            old = None
            if i.csr not in st.csrs and i.csr not in (CYCLE, INSTRET):
                self.csr_read(i.csr)
        else:
            old = self.csr_read(i.csr)
        if writes:
            if mode == "w":
                new = operand
            elif mode == "s":
                new = old | operand
            else:
                new = old & ~operand
            self.csr_write(i.csr, new)
        if old is not None:
            st.regs[i.rd] = old

    def _op_csrrw(self, i, pc):
        self._csr_op(i, self.state.regs[i.rs1], "w", True)

    def _op_csrrs(self, i, pc):
        self._csr_op(i, self.state.regs[i.rs1], "s", i.rs1 != 0)

    def _op_csrrc(self, i, pc):
        self._csr_op(i, self.state.regs[i.rs1], "c", i.rs1 != 0)

    def _op_csrrwi(self, i, pc):
        self._csr_op(i, i.imm, "w", True)

    def _op_csrrsi(self, i, pc):
        self._csr_op(i, i.imm, "s", i.imm != 0)

    def _op_csrrci(self, i, pc):
        self._csr_op(i, i.imm, "c", i.imm != 0)


def unit_event_count(trace) -> int:
    return sum(1 for e in trace if e.unit is not None)
