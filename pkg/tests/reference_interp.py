"""Deliberately naive RV32IM interpreter used as the differential-test reference.

Written from the ISA manual without sharing code with the simulator. It
supports exactly what the random programs use: RV32IM, ecall exit, CSR reads
of the three approximation CSRs.
"""

M32 = 0xFFFFFFFF


def sx(value, nbits):
    value &= (1 << nbits) - 1
    if value & (1 << (nbits - 1)):
        value -= 1 << nbits
    return value


def s32(v):
    return sx(v, 32)


class RefMachine:
    def __init__(self, program: bytes, mem_size=1 << 16):
        self.mem = bytearray(mem_size)
        self.mem[:len(program)] = program
        self.x = [0] * 32
        self.pc = 0
        self.done = False
        self.exit_code = None
        self.csr = {0x800: 0, 0x801: 0, 0x802: 0}

    def load(self, addr, n, signed):
        v = int.from_bytes(self.mem[addr:addr + n], "little")
        return sx(v, 8 * n) & M32 if signed else v

    def store(self, addr, n, v):
        self.mem[addr:addr + n] = (v & ((1 << (8 * n)) - 1)).to_bytes(n, "little")

    def step(self):
        w = int.from_bytes(self.mem[self.pc:self.pc + 4], "little")
        op = w & 0x7F
        rd = (w >> 7) & 31
        f3 = (w >> 12) & 7
        r1 = (w >> 15) & 31
        r2 = (w >> 20) & 31
        f7 = w >> 25
        a = self.x[r1]
        b = self.x[r2]
        imm_i = sx(w >> 20, 12)
        imm_s = sx(((w >> 25) << 5) | ((w >> 7) & 31), 12)
        imm_b = sx((((w >> 31) & 1) << 12) | (((w >> 7) & 1) << 11) | (((w >> 25) & 0x3F) << 5)
                   | (((w >> 8) & 0xF) << 1), 13)
        imm_j = sx((((w >> 31) & 1) << 20) | (((w >> 12) & 0xFF) << 12) | (((w >> 20) & 1) << 11)
                   | (((w >> 21) & 0x3FF) << 1), 21)
        nxt = self.pc + 4
        val = None

        if op == 0x37:
            val = w & 0xFFFFF000
        elif op == 0x17:
            val = (self.pc + (w & 0xFFFFF000)) & M32
        elif op == 0x6F:
            val = nxt
            nxt = (self.pc + imm_j) & M32
        elif op == 0x67:
            val = nxt
            nxt = (a + imm_i) & M32 & ~1
        elif op == 0x63:
            cond = {0: a == b, 1: a != b, 4: s32(a) < s32(b), 5: s32(a) >= s32(b), 6: a < b, 7: a >= b}[f3]
            if cond:
                nxt = (self.pc + imm_b) & M32
        elif op == 0x03:
            addr = (a + imm_i) & M32
            val = {0: lambda: self.load(addr, 1, True), 1: lambda: self.load(addr, 2, True),
                   2: lambda: self.load(addr, 4, False), 4: lambda: self.load(addr, 1, False),
                   5: lambda: self.load(addr, 2, False)}[f3]()
        elif op == 0x23:
            addr = (a + imm_s) & M32
            self.store(addr, {0: 1, 1: 2, 2: 4}[f3], b)
        elif op == 0x13:
            sh = r2
            if f3 == 0:
                val = a + imm_i
            elif f3 == 2:
                val = int(s32(a) < imm_i)
            elif f3 == 3:
                val = int(a < (imm_i & M32))
            elif f3 == 4:
                val = a ^ (imm_i & M32)
            elif f3 == 6:
                val = a | (imm_i & M32)
            elif f3 == 7:
                val = a & (imm_i & M32)
            elif f3 == 1:
                val = a << sh
            elif f3 == 5:
                val = (s32(a) >> sh) if f7 == 0x20 else (a >> sh)
        elif op == 0x33 and f7 == 1:
            if f3 == 0:
                val = s32(a) * s32(b)
            elif f3 == 1:
                val = (s32(a) * s32(b)) >> 32
            elif f3 == 2:
                val = (s32(a) * b) >> 32
            elif f3 == 3:
                val = (a * b) >> 32
            else:
                val = self._divrem(f3, a, b)
        elif op == 0x33:
            sh = b & 31
            if f3 == 0:
                val = a - b if f7 == 0x20 else a + b
            elif f3 == 1:
                val = a << sh
            elif f3 == 2:
                val = int(s32(a) < s32(b))
            elif f3 == 3:
                val = int(a < b)
            elif f3 == 4:
                val = a ^ b
            elif f3 == 5:
                val = (s32(a) >> sh) if f7 == 0x20 else (a >> sh)
            elif f3 == 6:
                val = a | b
            elif f3 == 7:
                val = a & b
        elif op == 0x0F:
            pass
        elif op == 0x73 and f3 == 0:
            if self.x[17] == 93:
                self.done = True
                self.exit_code = s32(self.x[10])
            else:
                raise NotImplementedError("only exit is supported")
        elif op == 0x73 and f3 == 2 and r1 == 0:
            val = self.csr[w >> 20]
        else:
            raise NotImplementedError(f"word {w:08x}")

        if val is not None and rd != 0:
            self.x[rd] = val & M32
        self.pc = nxt

    @staticmethod
    def _divrem(f3, a, b):
        signed = f3 in (4, 6)
        want_rem = f3 in (6, 7)
        if b == 0:
            return a if want_rem else M32
        if signed:
            sa, sb = s32(a), s32(b)
            if sa == -(2 ** 31) and sb == -1:
                return 0 if want_rem else a
            q = abs(sa) // abs(sb) * (1 if (sa < 0) == (sb < 0) else -1)
            return sa - q * sb if want_rem else q
        return a % b if want_rem else a // b

    def run(self, limit=1_000_000):
        n = 0
        while not self.done and n < limit:
            self.step()
            n += 1
        return n
