"""Plan-to-machine-code pipeline."""

from dataclasses import dataclass, field

from ..options import ApproximationOptions
from .asm import Assembler
from .pool import ConstPool
from .emitters import EmitContext, RegisterBudget, emit_unit


@dataclass
class CodeArtifact:
    """Everything needed to execute a compiled plan: the code bytes, the
    constant pool it reads through rsi, arena layout, and the symbolic
    instruction trace."""
    code: bytes
    pool_data: bytes
    trace: list
    arena_size: int
    offsets: dict               # tensor id -> (arena offset, size)
    entry_offset: int = 0
    metadata: dict = field(default_factory=dict)


def compile_plan(plan, assignment, options=None):
    """Emit all units in schedule order into one flat entry function.

    Compilation is deterministic: the same plan, assignment and options
    always produce identical bytes.
    """
    options = options or ApproximationOptions()
    a = Assembler()
    pool = ConstPool()
    ctx = EmitContext(a, pool, assignment.offsets, options, RegisterBudget())
    for pos, unit in enumerate(plan.units):
        emit_unit(ctx, unit, pos)
    a.ret()
    return CodeArtifact(
        code=bytes(a.code),
        pool_data=pool.tobytes(),
        trace=list(a.trace),
        arena_size=assignment.arena_size,
        offsets=dict(assignment.offsets),
        metadata={
            "units": len(plan.units),
            "code_bytes": len(a.code),
            "pool_bytes": len(pool.data),
            "activation_mode": options.activation_mode,
            "softmax_exp": options.softmax_exp,
        },
    )
