"""Executable memory for generated code.

Pages are mapped read-write, filled, then flipped to read-execute, so
writable and executable are never held together.  libc is driven directly
through ctypes; going through the mmap module would pin the mapping with an
exported buffer and complicate teardown.
"""

import ctypes
import sys

from ..errors import CompileError

_PROT_READ = 0x1
_PROT_WRITE = 0x2
_PROT_EXEC = 0x4
_MAP_PRIVATE = 0x2
_MAP_ANON = 0x1000 if sys.platform == "darwin" else 0x20
_MAP_FAILED = ctypes.c_void_p(-1).value

_libc = ctypes.CDLL(None, use_errno=True)
_libc.mmap.restype = ctypes.c_void_p
_libc.mmap.argtypes = [ctypes.c_void_p, ctypes.c_size_t, ctypes.c_int,
                       ctypes.c_int, ctypes.c_int, ctypes.c_long]
_libc.munmap.argtypes = [ctypes.c_void_p, ctypes.c_size_t]
_libc.mprotect.argtypes = [ctypes.c_void_p, ctypes.c_size_t, ctypes.c_int]

ENTRY_SIGNATURE = ctypes.CFUNCTYPE(None, ctypes.c_void_p, ctypes.c_void_p)


class ExecutableBuffer:
    """Owns one executable mapping holding a compiled entry point."""

    def __init__(self, code):
        code = bytes(code)
        self.size = max(len(code), 1)
        addr = _libc.mmap(None, self.size, _PROT_READ | _PROT_WRITE,
                          _MAP_PRIVATE | _MAP_ANON, -1, 0)
        if addr is None or addr == _MAP_FAILED:
            raise CompileError("anonymous mmap failed")
        self.address = addr
        ctypes.memmove(addr, code, len(code))
        if _libc.mprotect(addr, self.size, _PROT_READ | _PROT_EXEC) != 0:
            _libc.munmap(addr, self.size)
            self.address = None
            raise CompileError("mprotect to read+exec failed")
        self.entry = ENTRY_SIGNATURE(addr)

    def __call__(self, arena_addr, pool_addr):
        self.entry(arena_addr, pool_addr)

    def close(self):
        if self.address is not None:
            self.entry = None
            _libc.munmap(self.address, self.size)
            self.address = None

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass
