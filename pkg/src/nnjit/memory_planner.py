"""Tensor lifetime analysis and arena assignment.

Every tensor gets a 16-byte aligned range in one contiguous arena.  Tensors
whose lifetimes overlap get disjoint ranges; dead ranges are reused.  Units
may request an in-place output (alias onto an input); the request is honored
only when the input dies at that unit, the byte sizes match, and neither
tensor is a network input or output (those keep dedicated ranges so the
runtime can expose stable views).

Placement walks tensors in schedule order and first-fits them alternately
from the left edge and against the right edge of the peak-live-size target.
Plain left-only first-fit can exceed the chain bound (sizes 16,16,32 pack to
64 instead of 48); anchoring alternate tensors right keeps a pure chain
within max(size_i + size_{i+1}) while remaining deterministic and valid for
arbitrary DAGs.
"""

from dataclasses import dataclass, field

from .errors import PlannerError


def round16(nbytes):
    return (nbytes + 15) & ~15


@dataclass(frozen=True)
class LifetimeInterval:
    tensor: int
    first_def: int   # -1 for network inputs
    last_use: int    # len(units) for network outputs
    size: int        # bytes, 16-byte multiple

    def overlaps(self, other):
        return self.first_def <= other.last_use and other.first_def <= self.last_use


@dataclass
class BufferAssignment:
    arena_size: int
    offsets: dict                      # tensor id -> (offset, size)
    aliases: list = field(default_factory=list)  # (output tensor, input tensor)
    intervals: dict = field(default_factory=dict)

    def describe(self):
        lines = []
        for tid in sorted(self.offsets):
            off, size = self.offsets[tid]
            iv = self.intervals.get(tid)
            life = f"[{iv.first_def},{iv.last_use}]" if iv else "?"
            lines.append(f"  t{tid:<3d} offset {off:6d}  size {size:6d}  live {life}")
        alias = ", ".join(f"t{o}=t{i}" for o, i in self.aliases) or "none"
        lines.append(f"  arena {self.arena_size} bytes, aliases: {alias}")
        return "\n".join(lines)


def compute_lifetimes(plan):
    """Interval per plan tensor; inputs start at -1, outputs end at len(units)."""
    end = len(plan.units)
    first = {}
    last = {}
    for tid in plan.input_ids:
        first[tid] = -1
        last[tid] = -1
    for pos, unit in enumerate(plan.units):
        first.setdefault(unit.output_id, pos)
        last[unit.output_id] = max(last.get(unit.output_id, pos), pos)
        for tid in unit.input_ids:
            last[tid] = max(last.get(tid, pos), pos)
    for tid in plan.output_ids:
        last[tid] = end
    out = []
    for tid, shape in plan.tensors.items():
        if tid not in first:
            raise PlannerError(f"tensor t{tid} has no producer and is not an input")
        out.append(LifetimeInterval(
            tensor=tid, first_def=first[tid], last_use=last[tid],
            size=round16(4 * shape.elements)))
    return out


def _resolve(parent, tid):
    while parent.get(tid, tid) != tid:
        tid = parent[tid]
    return tid


def assign_buffers(intervals, plan):
    """Greedy alternating first-fit; honors valid in-place preferences."""
    by_id = {iv.tensor: iv for iv in intervals}
    external = set(plan.input_ids) | set(plan.output_ids)

    # In-place aliasing: union tensors that may share one range.
    parent = {}
    aliases = []
    for pos, unit in enumerate(plan.units):
        pref = unit.in_place_preference
        if pref is None or pref >= len(unit.input_ids):
            continue
        raw = unit.input_ids[pref]
        dst = unit.output_id
        if raw in external or dst in external:
            continue
        if by_id[raw].last_use != pos:
            continue  # input referenced afterwards: request denied
        if by_id[raw].size != by_id[dst].size:
            continue
        parent[dst] = _resolve(parent, raw)
        aliases.append((dst, raw))

    # Merged intervals per representative, in schedule order of first_def.
    groups = {}
    for iv in intervals:
        rep = _resolve(parent, iv.tensor)
        if rep not in groups:
            groups[rep] = [iv.first_def, iv.last_use, iv.size]
        else:
            groups[rep][0] = min(groups[rep][0], iv.first_def)
            groups[rep][1] = max(groups[rep][1], iv.last_use)
            if groups[rep][2] != iv.size:
                raise PlannerError("aliased tensors with different sizes")

    reps = sorted(groups, key=lambda t: (groups[t][0], t))
    merged = {rep: LifetimeInterval(rep, *groups[rep]) for rep in reps}

    # Peak live bytes over the schedule = packing target for the right anchor.
    peak = 0
    for pos in range(-1, len(plan.units) + 1):
        live = sum(iv.size for iv in merged.values()
                   if iv.first_def <= pos <= iv.last_use)
        peak = max(peak, live)

    placed = {}  # rep -> (offset, size)
    arena = 0

    def fits(offset, size, conflicts):
        if offset < 0 or offset % 16:
            return False
        for off, sz in conflicts:
            if offset < off + sz and off < offset + size:
                return False
        return True

    for seq, rep in enumerate(reps):
        iv = merged[rep]
        conflicts = [placed[o] for o in placed
                     if merged[o].overlaps(iv)]
        conflicts.sort()
        candidates = []
        if seq % 2 == 0:
            # Left anchor: lowest fitting offset.
            candidates.append(0)
            candidates.extend(round16(off + sz) for off, sz in conflicts)
            candidates.sort()
        else:
            # Right anchor: highest offset keeping the range within the target.
            limit = max(peak, arena)
            candidates.append(limit - iv.size)
            candidates.extend(off - iv.size for off, sz in conflicts)
            candidates = sorted({c & ~15 for c in candidates if c >= 0},
                                reverse=True)
            candidates.append(0)
        chosen = None
        for cand in candidates:
            if fits(cand, iv.size, conflicts):
                chosen = cand
                break
        if chosen is None:
            # Fall back to first gap after the conflicts.
            cand = 0
            for off, sz in conflicts:
                if cand + iv.size <= off:
                    break
                cand = max(cand, round16(off + sz))
            chosen = cand
        placed[rep] = (chosen, iv.size)
        arena = max(arena, chosen + iv.size)

    offsets = {}
    out_intervals = {}
    for iv in intervals:
        rep = _resolve(parent, iv.tensor)
        off, _ = placed[rep]
        offsets[iv.tensor] = (off, iv.size)
        out_intervals[iv.tensor] = iv

    assignment = BufferAssignment(arena_size=arena, offsets=offsets,
                                  aliases=aliases, intervals=out_intervals)
    violations = verify_assignment(plan, assignment)
    if violations:
        raise PlannerError("unsound assignment: " + "; ".join(violations[:4]))
    return assignment


def plan_buffers(plan):
    return assign_buffers(compute_lifetimes(plan), plan)


def verify_assignment(plan, assignment):
    """Shadow-simulate the schedule; return a list of violation strings.

    Tracks which tensor owns each 16-byte arena slot.  A unit reading a slot
    that no longer holds its input tensor is a read-after-overwrite; two live
    tensors sharing a slot (outside a declared alias) shows up the same way.
    """
    slots = [None] * (assignment.arena_size // 16)
    alias_of = dict(assignment.aliases)

    def canonical(tid):
        while tid in alias_of:
            tid = alias_of[tid]
        return tid

    def mark(tid):
        off, size = assignment.offsets[tid]
        for s in range(off // 16, (off + size) // 16):
            slots[s] = canonical(tid)

    def check(tid, where):
        off, size = assignment.offsets[tid]
        want = canonical(tid)
        for s in range(off // 16, (off + size) // 16):
            if slots[s] != want:
                return [f"{where}: t{tid} slot {s} holds "
                        f"{'t%s' % slots[s] if slots[s] is not None else 'nothing'}"]
        return []

    violations = []
    for tid in plan.input_ids:
        mark(tid)
    for pos, unit in enumerate(plan.units):
        for tid in unit.input_ids:
            violations += check(tid, f"unit {pos} ({unit.kind}) read")
        mark(unit.output_id)
    for tid in plan.output_ids:
        violations += check(tid, "network output")
    return violations
