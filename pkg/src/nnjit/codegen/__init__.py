from .asm import Assembler, Mem
from .pool import ConstPool
from .compile import CodeArtifact, compile_plan
from .emitters import EmitContext, RegisterBudget, emit_unit
from .executable import ExecutableBuffer
from .hostcheck import check_host

__all__ = [
    "Assembler", "Mem", "ConstPool", "CodeArtifact", "compile_plan",
    "EmitContext", "RegisterBudget", "emit_unit", "ExecutableBuffer",
    "check_host",
]
