"""Program loading: ELF32 little-endian RISC-V executables and flat binaries."""
from __future__ import annotations

import os
import struct
from typing import Optional

from .isa import CoreConfig, MachineState

EM_RISCV = 243
ET_EXEC = 2
PT_LOAD = 1

_EHDR = struct.Struct("<16sHHIIIIIHHHHHH")
_PHDR = struct.Struct("<IIIIIIII")


class ElfError(ValueError):
    pass


def parse_elf32(data: bytes) -> tuple[int, list[tuple[int, bytes, int]]]:
    """Return ``(entry, [(vaddr, file_bytes, memsz), ...])`` for the PT_LOAD segments."""
    if len(data) < 16 or data[:4] != b"\x7fELF":
        raise ElfError("not an ELF file (bad magic)")
    if data[4] != 1:
        raise ElfError(f"wrong ELF class: expected ELFCLASS32, got {data[4]}")
    if data[5] != 1:
        raise ElfError("wrong ELF data encoding: expected little-endian")
    if len(data) < _EHDR.size:
        raise ElfError("truncated ELF header")
    (_, e_type, e_machine, _, e_entry, e_phoff, _, _, _,
     e_phentsize, e_phnum, _, _, _) = _EHDR.unpack_from(data)
    if e_machine != EM_RISCV:
        raise ElfError(f"wrong machine type: expected RISC-V ({EM_RISCV}), got {e_machine}")
    if e_type != ET_EXEC:
        raise ElfError(f"not an executable ELF (e_type={e_type})")
    if e_phnum and e_phentsize < _PHDR.size:
        raise ElfError(f"bad program header size {e_phentsize}")
    segments = []
    for n in range(e_phnum):
        off = e_phoff + n * e_phentsize
        if off + _PHDR.size > len(data):
            raise ElfError(f"truncated program header {n}")
        p_type, p_offset, p_vaddr, _, p_filesz, p_memsz, _, _ = _PHDR.unpack_from(data, off)
        if p_type != PT_LOAD:
            continue
        if p_offset + p_filesz > len(data):
            raise ElfError(f"segment {n} extends past end of file")
        if p_filesz > p_memsz:
            raise ElfError(f"segment {n} has p_filesz > p_memsz")
        segments.append((p_vaddr, data[p_offset:p_offset + p_filesz], p_memsz))
    return e_entry, segments


def load_program(path, fmt: str = "elf32", entry: Optional[int] = None,
                 config: Optional[CoreConfig] = None, load_address: Optional[int] = None) -> MachineState:
    """Read a program from disk into a fresh machine state.

    ``fmt`` is ``"elf32"`` or ``"flat"``. A flat image is copied to
    ``load_address`` (default: ``entry``, itself defaulting to 0) and execution
    starts at ``entry``.
    """
    config = config or CoreConfig()
    if not os.path.exists(path):
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, "rb") as fh:
        data = fh.read()
    state = MachineState.for_config(config)
    ram = len(state.mem)
    if fmt == "elf32":
        start, segments = parse_elf32(data)
        for vaddr, content, memsz in segments:
            if vaddr + memsz > ram:
                raise ElfError(f"segment outside RAM: [0x{vaddr:x}, 0x{vaddr + memsz:x}) exceeds 0x{ram:x}")
            state.mem[vaddr:vaddr + len(content)] = content
        state.pc = start if entry is None else entry
    elif fmt == "flat":
        state.pc = 0 if entry is None else entry
        base = state.pc if load_address is None else load_address
        if base + len(data) > ram:
            raise ValueError(f"flat image [0x{base:x}, 0x{base + len(data):x}) outside RAM")
        state.mem[base:base + len(data)] = data
    else:
        raise ValueError(f"unknown program format {fmt!r}; expected 'elf32' or 'flat'")
    return state


def build_elf32(code: bytes, entry: int, base: Optional[int] = None, machine: int = EM_RISCV,
                elf_class: int = 1, bss: int = 0) -> bytes:
    """Minimal single-segment executable around ``code`` loaded at ``base``."""
    base = entry if base is None else base
    ehsize, phsize = 52, 32
    offset = 0x1000 + (base & 0xFFF)  # keeps p_offset congruent to p_vaddr
    ident = b"\x7fELF" + bytes([elf_class, 1, 1]) + bytes(9)
    header = _EHDR.pack(ident, ET_EXEC, machine, 1, entry, ehsize, 0, 0, ehsize, phsize, 1, 0, 0, 0)
    phdr = _PHDR.pack(PT_LOAD, offset, base, base, len(code), len(code) + bss, 5, 0x1000)
    blob = header + phdr
    return blob + bytes(offset - len(blob)) + code
