"""Instruction-trace inspection helpers.

The assembler trace is a list of strings: instructions as emitted, plus
marker lines starting with ';'.  Markers used by the emitters:

    ; unit <pos> <kind> ...      start of a compilation unit
    ; mvblock ...                start of one 4x4 matvec input-block feed
    ; batch <lanes>              one elementwise batch
    ; batch <lanes> x<count>     a machine loop running <count> equal batches

These helpers parse structure back out for property tests: rotation counts
per matvec block, elementwise batch sizes, register usage.
"""

import re

ROTATE_RE = re.compile(r"^shufps (xmm\d+), \1, 0x39$")
XMM_RE = re.compile(r"xmm(\d+)")


def instructions(trace):
    return [t for t in trace if not t.startswith(";")]


def unit_regions(trace):
    """Split the trace into (header, lines) per '; unit' marker."""
    regions = []
    current = None
    for line in trace:
        if line.startswith("; unit "):
            if current:
                regions.append(current)
            current = (line[2:].strip(), [])
        elif current:
            current[1].append(line)
    if current:
        regions.append(current)
    return regions


def rotation_counts_per_block(lines):
    """Lane-rotation instruction count for each '; mvblock' region."""
    counts = []
    in_block = False
    for line in lines:
        if line.startswith("; mvblock"):
            counts.append(0)
            in_block = True
        elif line.startswith(";"):
            in_block = False
        elif in_block and ROTATE_RE.match(line):
            counts[-1] += 1
    return counts


def batch_sizes(lines):
    """Expanded elementwise batch lane counts, in execution order."""
    sizes = []
    for line in lines:
        m = re.match(r"^; batch (\d+)(?: x(\d+))?$", line)
        if m:
            sizes.extend([int(m.group(1))] * int(m.group(2) or 1))
    return sizes


def max_xmm_index(lines):
    top = -1
    for line in instructions(lines):
        for m in XMM_RE.finditer(line):
            top = max(top, int(m.group(1)))
    return top


def phase_pattern(lines):
    """Classify instructions in one batch region as load/compute/store.

    Returns the sequence of phase letters with runs collapsed, e.g. 'LCS'.
    """
    phases = []
    for line in instructions(lines):
        parts = line.split(None, 1)
        mnem = parts[0]
        if mnem in ("movaps", "movups", "movss", "movsd"):
            dest = parts[1].split(",")[0].strip()
            src = parts[1].split(",", 1)[1].strip()
            if dest.startswith("["):
                phases.append("S")
            elif src.startswith("["):
                phases.append("L")
            else:
                phases.append("C")
        else:
            phases.append("C")
    out = []
    for p in phases:
        if not out or out[-1] != p:
            out.append(p)
    return "".join(out)
