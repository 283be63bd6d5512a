"""x86-64 instruction encoder for the SSE4-class subset the emitters need.

Every emit method appends both the instruction bytes and a one-line textual
mnemonic to the trace; the trace is therefore a 1:1 symbolic listing of the
emitted code.  Lines starting with ';' are structural markers, not
instructions.

Only the encodings used by the code generator are implemented.  Addressing is
restricted to [base64 + disp] with base registers whose low 3 bits are not
100/101 (no rsp/rbp/r12/r13), which sidesteps SIB and RIP-relative special
cases entirely.
"""

import struct

# GPR codes (64-bit)
RAX, RCX, RDX, RBX, RSP, RBP, RSI, RDI = range(8)
R8, R9, R10, R11, R12, R13, R14, R15 = range(8, 16)

GPR_NAMES = ["rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
             "r8", "r9", "r10", "r11", "r12", "r13", "r14", "r15"]
GPR32_NAMES = ["eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi",
               "r8d", "r9d", "r10d", "r11d", "r12d", "r13d", "r14d", "r15d"]

# Volatile registers under the SysV AMD64 convention; the generated code may
# only touch these (no stack frame, so no way to preserve callee-saved state).
SCRATCH_GPRS = (RAX, RCX, RDX, RSI, RDI, R8, R9, R10, R11)

N_XMM = 16


class Mem:
    """[base + disp] memory operand."""

    __slots__ = ("base", "disp")

    def __init__(self, base, disp=0):
        assert base in SCRATCH_GPRS, f"bad base register {base}"
        assert (base & 7) not in (4, 5), "rsp/rbp-coded bases unsupported"
        assert -2**31 <= disp < 2**31
        self.base = base
        self.disp = disp

    def __str__(self):
        if self.disp == 0:
            return f"[{GPR_NAMES[self.base]}]"
        sign = "+" if self.disp >= 0 else "-"
        return f"[{GPR_NAMES[self.base]}{sign}0x{abs(self.disp):x}]"


def _xname(i):
    assert 0 <= i < N_XMM, f"xmm index {i} out of range"
    return f"xmm{i}"


class Label:
    __slots__ = ("pos",)

    def __init__(self):
        self.pos = None


class Assembler:
    def __init__(self):
        self.code = bytearray()
        self.trace = []

    # --- trace ----------------------------------------------------------

    def marker(self, text):
        self.trace.append("; " + text)

    def _note(self, text):
        self.trace.append(text)

    # --- encoding helpers -------------------------------------------------

    def _rex(self, w, r, x, b):
        val = 0x40 | (w << 3) | (r << 2) | (x << 1) | b
        if val != 0x40 or w:
            self.code.append(val)

    def _modrm_rm(self, reg, rm_mem_or_reg):
        """ModRM (+disp) for reg field `reg` (low 3 bits) against rm."""
        if isinstance(rm_mem_or_reg, Mem):
            mem = rm_mem_or_reg
            base = mem.base & 7
            disp = mem.disp
            if disp == 0:
                self.code.append((0 << 6) | ((reg & 7) << 3) | base)
            elif -128 <= disp < 128:
                self.code.append((1 << 6) | ((reg & 7) << 3) | base)
                self.code.append(disp & 0xFF)
            else:
                self.code.append((2 << 6) | ((reg & 7) << 3) | base)
                self.code += struct.pack("<i", disp)
        else:
            self.code.append((3 << 6) | ((reg & 7) << 3) | (rm_mem_or_reg & 7))

    def _sse(self, mnemonic, prefix, opcode, reg, rm, imm=None, rev=False):
        """Generic SSE op: [prefix] REX 0F <opcode> modrm [imm8].

        reg is an xmm index; rm is an xmm index or Mem.  Text order is
        dst, src; `rev` renders rm first (stores).
        """
        if prefix is not None:
            self.code.append(prefix)
        rex_b = (rm.base >= 8) if isinstance(rm, Mem) else (rm >= 8)
        self._rex(0, int(reg >= 8), 0, int(rex_b))
        self.code.append(0x0F)
        self.code += opcode
        self._modrm_rm(reg, rm)
        if imm is not None:
            self.code.append(imm & 0xFF)
        a = _xname(reg)
        b = str(rm) if isinstance(rm, Mem) else _xname(rm)
        ops = f"{b}, {a}" if rev else f"{a}, {b}"
        if imm is not None:
            ops += f", 0x{imm & 0xFF:x}"
        self._note(f"{mnemonic} {ops}")

    # --- SSE moves ------------------------------------------------------

    def movaps(self, dst, src):
        self._sse("movaps", None, b"\x28", dst, src)

    def movaps_store(self, mem, src):
        self._sse("movaps", None, b"\x29", src, mem, rev=True)

    def movups(self, dst, mem):
        self._sse("movups", None, b"\x10", dst, mem)

    def movups_store(self, mem, src):
        self._sse("movups", None, b"\x11", src, mem, rev=True)

    def movss(self, dst, mem):
        self._sse("movss", 0xF3, b"\x10", dst, mem)

    def movss_store(self, mem, src):
        self._sse("movss", 0xF3, b"\x11", src, mem, rev=True)

    def movsd(self, dst, mem):
        self._sse("movsd", 0xF2, b"\x10", dst, mem)

    def movsd_store(self, mem, src):
        self._sse("movsd", 0xF2, b"\x11", src, mem, rev=True)

    # --- packed float arithmetic -----------------------------------------

    def addps(self, dst, src):
        self._sse("addps", None, b"\x58", dst, src)

    def subps(self, dst, src):
        self._sse("subps", None, b"\x5c", dst, src)

    def mulps(self, dst, src):
        self._sse("mulps", None, b"\x59", dst, src)

    def divps(self, dst, src):
        self._sse("divps", None, b"\x5e", dst, src)

    def maxps(self, dst, src):
        self._sse("maxps", None, b"\x5f", dst, src)

    def minps(self, dst, src):
        self._sse("minps", None, b"\x5d", dst, src)

    def andps(self, dst, src):
        self._sse("andps", None, b"\x54", dst, src)

    def orps(self, dst, src):
        self._sse("orps", None, b"\x56", dst, src)

    def xorps(self, dst, src):
        self._sse("xorps", None, b"\x57", dst, src)

    def cmpps(self, dst, src, imm):
        self._sse("cmpps", None, b"\xc2", dst, src, imm=imm)

    # --- scalar float arithmetic ------------------------------------------

    def addss(self, dst, src):
        self._sse("addss", 0xF3, b"\x58", dst, src)

    def subss(self, dst, src):
        self._sse("subss", 0xF3, b"\x5c", dst, src)

    def mulss(self, dst, src):
        self._sse("mulss", 0xF3, b"\x59", dst, src)

    def divss(self, dst, src):
        self._sse("divss", 0xF3, b"\x5e", dst, src)

    def maxss(self, dst, src):
        self._sse("maxss", 0xF3, b"\x5f", dst, src)

    def minss(self, dst, src):
        self._sse("minss", 0xF3, b"\x5d", dst, src)

    # --- shuffles / lane ops ----------------------------------------------

    def shufps(self, dst, src, imm):
        self._sse("shufps", None, b"\xc6", dst, src, imm=imm)

    def rotate_lanes(self, reg):
        """Rotate (l0,l1,l2,l3) -> (l1,l2,l3,l0)."""
        self.shufps(reg, reg, 0x39)

    def broadcast0(self, reg):
        self.shufps(reg, reg, 0x00)

    def insertps(self, dst, mem, lane, zmask=0):
        imm = ((lane & 3) << 4) | (zmask & 0xF)
        self._sse("insertps", 0x66, b"\x3a\x21", dst, mem, imm=imm)

    def extractps_store(self, mem, src, lane):
        self._sse("extractps", 0x66, b"\x3a\x17", src, mem, imm=lane & 3,
                  rev=True)

    # --- packed integer ----------------------------------------------------

    def cvtps2dq(self, dst, src):
        self._sse("cvtps2dq", 0x66, b"\x5b", dst, src)

    def cvtdq2ps(self, dst, src):
        self._sse("cvtdq2ps", None, b"\x5b", dst, src)

    def paddd(self, dst, src):
        self._sse("paddd", 0x66, b"\xfe", dst, src)

    def pslld(self, reg, imm):
        # 66 REX 0F 72 /6 ib
        self.code.append(0x66)
        self._rex(0, 0, 0, int(reg >= 8))
        self.code += b"\x0f\x72"
        self._modrm_rm(6, reg)
        self.code.append(imm & 0xFF)
        self._note(f"pslld {_xname(reg)}, 0x{imm & 0xff:x}")

    # --- GPR ---------------------------------------------------------------

    def _check_gpr(self, reg):
        assert reg in SCRATCH_GPRS, f"non-volatile gpr {GPR_NAMES[reg]}"

    def mov_rr(self, dst, src):
        self._check_gpr(dst)
        self._rex(1, int(src >= 8), 0, int(dst >= 8))
        self.code.append(0x89)
        self._modrm_rm(src, dst)
        self._note(f"mov {GPR_NAMES[dst]}, {GPR_NAMES[src]}")

    def mov_ri32(self, dst, imm):
        """mov r32, imm32 (zero-extends)."""
        self._check_gpr(dst)
        assert 0 <= imm < 2**32
        self._rex(0, 0, 0, int(dst >= 8))
        self.code.append(0xB8 + (dst & 7))
        self.code += struct.pack("<I", imm)
        self._note(f"mov {GPR32_NAMES[dst]}, 0x{imm:x}")

    def lea(self, dst, mem):
        self._check_gpr(dst)
        self._rex(1, int(dst >= 8), 0, int(mem.base >= 8))
        self.code.append(0x8D)
        self._modrm_rm(dst, mem)
        self._note(f"lea {GPR_NAMES[dst]}, {mem}")

    def add_ri(self, dst, imm):
        self._check_gpr(dst)
        self._rex(1, 0, 0, int(dst >= 8))
        if -128 <= imm < 128:
            self.code.append(0x83)
            self._modrm_rm(0, dst)
            self.code.append(imm & 0xFF)
        else:
            self.code.append(0x81)
            self._modrm_rm(0, dst)
            self.code += struct.pack("<i", imm)
        self._note(f"add {GPR_NAMES[dst]}, 0x{imm:x}" if imm >= 0
                   else f"add {GPR_NAMES[dst]}, -0x{-imm:x}")

    def dec_r32(self, reg):
        self._check_gpr(reg)
        self._rex(0, 0, 0, int(reg >= 8))
        self.code.append(0xFF)
        self._modrm_rm(1, reg)
        self._note(f"dec {GPR32_NAMES[reg]}")

    # --- control flow -------------------------------------------------------

    def label(self):
        lab = Label()
        lab.pos = len(self.code)
        return lab

    def jnz(self, label):
        assert label.pos is not None, "only backward jumps supported"
        rel = label.pos - (len(self.code) + 6)
        self.code += b"\x0f\x85" + struct.pack("<i", rel)
        self._note(f"jnz .-0x{-rel:x}")

    def ret(self):
        self.code.append(0xC3)
        self._note("ret")
