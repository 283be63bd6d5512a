"""Machine-code emitters for compilation units.

Calling convention for the generated function: rdi = arena base, rsi =
constant-pool base.  Both stay untouched; loop cursors live in the remaining
volatile GPRs (rax, rcx, rdx, r8-r11), so no stack frame is ever needed.

Register discipline: xmm14 and xmm15 are the only scratch registers
(k = 2); xmm0-xmm13 hold batch data or matvec accumulators.  Every unit
leaves no live state behind, so units compose by concatenation.

Stores never write past a tensor's logical extent (partial tails use
movss/movsd/extractps).  Loads may read the zero-padded remainder of a
tensor's own 16-byte-rounded allocation; garbage lanes are either masked,
scrubbed by activation clamps, or discarded by the partial store.
"""

import math
from types import SimpleNamespace
from dataclasses import dataclass

import numpy as np

from .asm import (Mem, RAX, RCX, RDX, RSI, RDI, R8, R9, R10, N_XMM)
from .pool import lane_mask_offset
from .approx import emit_activation

F32 = np.float32

X_REG = 14           # matvec input block / activation scratch 1
W_REG = 15           # matvec weight block / activation scratch 2


@dataclass(frozen=True)
class RegisterBudget:
    """Partition of the 16 xmm registers: k scratch, the rest data."""
    n_xmm: int = N_XMM
    k: int = 2

    @property
    def data_regs(self):
        return self.n_xmm - self.k

    @property
    def batch_capacity(self):
        # lanes processed per elementwise batch
        return 4 * self.data_regs


class EmitContext:
    def __init__(self, a, pool, offsets, options, budget=None):
        self.a = a
        self.pool = pool
        self.offsets = offsets          # tensor id -> (arena offset, size)
        self.options = options
        self.budget = budget or RegisterBudget()

    def off(self, tid):
        return self.offsets[tid][0]


def _blocks(n):
    return (n + 3) // 4


def _chunks(total, size):
    for s in range(0, total, size):
        yield s, min(size, total - s)


def _store_block(a, base, disp, reg, live, aligned):
    """Store `live` (1..4) low lanes of reg at [base+disp]."""
    if live >= 4:
        (a.movaps_store if aligned else a.movups_store)(Mem(base, disp), reg)
    elif live == 3:
        a.movsd_store(Mem(base, disp), reg)
        a.extractps_store(Mem(base, disp + 8), reg, 2)
    elif live == 2:
        a.movsd_store(Mem(base, disp), reg)
    else:
        a.movss_store(Mem(base, disp), reg)


def _padded_vec(pool, values, n_pad):
    buf = np.zeros(n_pad, dtype=F32)
    buf[:len(values)] = values
    return pool.vec_f32(buf)


# --- elementwise engine ----------------------------------------------------
#
# Batches of exactly min(remaining, 56) lanes; within a batch all loads are
# emitted first, then all compute, then all stores.  Uniform bodies with at
# least 4 full batches run under a machine loop with cursor registers.

def emit_elementwise(ctx, u):
    a, pool = ctx.a, ctx.pool
    n = u.output_shape.elements
    dst = ctx.off(u.output_id)
    src0 = ctx.off(u.input_ids[0])
    extras = [ctx.off(t) for t in u.input_ids[1:]]
    affine = u.scale is not None
    mode = ctx.options.activation_mode

    if (not affine and not extras and u.activation == "linear"
            and dst == src0):
        return                                  # aliased no-op

    if affine:
        c = len(u.scale)
        tile = 4 * c // math.gcd(c, 4) // c     # repeats to a lane multiple
        period = c * tile
        sc_base = pool.vec_f32(np.tile(np.asarray(u.scale, F32), tile))
        of_base = pool.vec_f32(np.tile(np.asarray(u.offset, F32), tile))

    def compute(reg, lane_base):
        if affine:
            ph = 4 * (lane_base % period)
            a.mulps(reg, Mem(RSI, sc_base + ph))
            a.addps(reg, Mem(RSI, of_base + ph))
        if u.activation != "linear":
            emit_activation(a, pool, u.activation, mode, reg, X_REG, W_REG)

    cap = ctx.budget.batch_capacity
    nfull = n // cap
    lane = 0

    if not affine and nfull >= 4 and len(extras) <= 2:
        cursors = [R8, R9][:len(extras)]
        a.lea(RAX, Mem(RDI, src0))
        a.lea(RDX, Mem(RDI, dst))
        for cr, e in zip(cursors, extras):
            a.lea(cr, Mem(RDI, e))
        a.mov_ri32(RCX, nfull)
        a.marker(f"batch {cap} x{nfull}")
        top = a.label()
        nregs = ctx.budget.data_regs
        for i in range(nregs):
            a.movaps(i, Mem(RAX, 16 * i))
        for i in range(nregs):
            for cr in cursors:
                a.addps(i, Mem(cr, 16 * i))
            compute(i, None)
        for i in range(nregs):
            a.movaps_store(Mem(RDX, 16 * i), i)
        for cr in [RAX, RDX] + cursors:
            a.add_ri(cr, 4 * cap)
        a.dec_r32(RCX)
        a.jnz(top)
        lane = nfull * cap

    while lane < n:
        blen = min(cap, n - lane)
        a.marker(f"batch {blen}")
        nregs = _blocks(blen)
        for i in range(nregs):
            a.movaps(i, Mem(RDI, src0 + 4 * lane + 16 * i))
        for i in range(nregs):
            for e in extras:
                a.addps(i, Mem(RDI, e + 4 * lane + 16 * i))
            compute(i, lane + 4 * i)
        for i in range(nregs):
            live = min(4, blen - 4 * i)
            _store_block(a, RDI, dst + 4 * lane + 16 * i, i, live, True)
        lane += blen


# --- rotated-diagonal matvec -------------------------------------------------
#
# Weights (K inputs, N outputs) are stored as 4x4 blocks decomposed into four
# rotated diagonals.  Feeding input block j: load x, then for r = 0..3
# multiply each accumulator's r-th diagonal by x and rotate x's lanes once
# between rounds.  Three shuffles per input block total, shared across all
# accumulators of the group.

def rotated_diag_layout(pool, w2):
    k_in, n_out = w2.shape
    c4, r4 = _blocks(k_in), _blocks(n_out)
    padded = np.zeros((4 * c4, 4 * r4), dtype=F32)
    padded[:k_in, :n_out] = w2
    jj, ii, rr, ll = np.meshgrid(np.arange(c4), np.arange(r4),
                                 np.arange(4), np.arange(4), indexing="ij")
    blob = padded[4 * jj + (ll + rr) % 4, 4 * ii + ll]
    base = pool.add_bytes(np.ascontiguousarray(blob, dtype="<f4").tobytes())
    nonzero = blob.any(axis=3)
    st = SimpleNamespace(base=base, c4=c4, r4=r4, nz=nonzero)
    st.woff = lambda j, i, r: base + ((j * r4 + i) * 4 + r) * 16
    return st


def _feed_block(ctx, lay, accs, acc_base, j):
    """Multiply loaded x (xmm14) into the group's accumulators."""
    a = ctx.a
    for r in range(4):
        if r:
            a.rotate_lanes(X_REG)
        for bi in accs:
            if not lay.nz[j, acc_base + bi, r]:
                continue
            a.movaps(W_REG, Mem(RSI, lay.woff(j, acc_base + bi, r)))
            a.mulps(W_REG, X_REG)
            a.addps(bi, W_REG)


def _finish_group(ctx, u, accs, acc_base, n_out, ps_base, po_base,
                  out_base, out_disp, aligned):
    a, pool = ctx.a, ctx.pool
    for bi in accs:
        emit_activation(a, pool, u.activation, ctx.options.activation_mode,
                        bi, X_REG, W_REG)
    if ps_base is not None:
        for bi in accs:
            a.mulps(bi, Mem(RSI, ps_base + 16 * (acc_base + bi)))
            a.addps(bi, Mem(RSI, po_base + 16 * (acc_base + bi)))
    for bi in accs:
        gi = acc_base + bi
        live = min(4, n_out - 4 * gi)
        _store_block(a, out_base, out_disp + 16 * gi, bi, live, aligned)


def _matvec_pools(ctx, u, w2):
    pool = ctx.pool
    lay = rotated_diag_layout(pool, w2)
    n_out = w2.shape[1]
    lay.bias = _padded_vec(pool, u.bias, 4 * lay.r4)
    lay.ps = lay.po = None
    if u.post_scale is not None:
        lay.ps = _padded_vec(pool, u.post_scale, 4 * lay.r4)
        lay.po = _padded_vec(pool, u.post_offset, 4 * lay.r4)
    lay.n_out = n_out
    return lay


def emit_dense(ctx, u):
    a, pool = ctx.a, ctx.pool
    k_in, n_out = u.kernel.shape
    lay = _matvec_pools(ctx, u, np.asarray(u.kernel, F32))
    in_off = ctx.off(u.input_ids[0])
    out_off = ctx.off(u.output_id)
    tail = k_in % 4
    mask = lane_mask_offset(pool, tail) if tail else None

    for acc_base, gb in _chunks(lay.r4, ctx.budget.data_regs):
        accs = list(range(gb))
        for bi in accs:
            a.movaps(bi, Mem(RSI, lay.bias + 16 * (acc_base + bi)))
        for j in range(lay.c4):
            if not lay.nz[j, acc_base:acc_base + gb].any():
                continue
            a.marker("mvblock")
            a.movaps(X_REG, Mem(RDI, in_off + 16 * j))
            if tail and j == lay.c4 - 1:
                a.andps(X_REG, Mem(RSI, mask))
            _feed_block(ctx, lay, accs, acc_base, j)
        _finish_group(ctx, u, accs, acc_base, n_out, lay.ps, lay.po,
                      RDI, out_off, True)


# --- spatial driver ----------------------------------------------------------
#
# Output rows are grouped into fragments sharing the same vertical kernel
# clipping, and columns into left-clipped / interior / right-clipped runs.
# Interior runs execute under machine loops; clipped borders unroll.

def _row_fragments(h_in, h_out, stride, kh, pad_t):
    frags = []
    for y in range(h_out):
        iy0 = y * stride - pad_t
        lo, hi = max(0, -iy0), min(kh, h_in - iy0)
        if frags and frags[-1][2] == lo and frags[-1][3] == hi:
            frags[-1][1] += 1
        else:
            frags.append([y, 1, lo, hi])
    return frags


def _x_segments(w_in, w_out, stride, kw, pad_l):
    clips = []
    for x in range(w_out):
        ix0 = x * stride - pad_l
        clips.append((x, max(0, -ix0), min(kw, w_in - ix0)))
    interior = [c for c in clips if c[1] == 0 and c[2] == kw]
    if not interior:
        return clips, (0, 0), []
    x0, x1 = interior[0][0], interior[-1][0]
    left = [c for c in clips if c[0] < x0]
    right = [c for c in clips if c[0] > x1]
    return left, (x0, x1 - x0 + 1), right


def _for_each_position(ctx, u, body):
    """Run body(in_base, in_disp, out_base, out_disp, kyl, kyh, kxl, kxh)
    once per output position, with window-origin displacements."""
    a = ctx.a
    h_in, w_in, cin = u.input_shapes[0].dims
    h_out, w_out, cout = u.output_shape.dims
    kh, kw = u.kernel_hw
    s = u.stride
    if u.padding == "same":
        from ..graph import same_padding
        pad_t = same_padding(h_in, kh, s)[0]
        pad_l = same_padding(w_in, kw, s)[0]
    else:
        pad_t = pad_l = 0
    in_off = ctx.off(u.input_ids[0])
    out_off = ctx.off(u.output_id)
    in_pos, out_pos = cin * 4, cout * 4
    in_row, out_row = w_in * in_pos, w_out * out_pos
    left, (mx0, mcount), right = _x_segments(w_in, w_out, s, kw, pad_l)

    for y0, nrows, kyl, kyh in _row_fragments(h_in, h_out, s, kh, pad_t):
        in_row0 = in_off + (y0 * s - pad_t) * in_row
        out_row0 = out_off + y0 * out_row
        loop_rows = nrows >= 2
        if loop_rows:
            a.lea(RAX, Mem(RDI, in_row0))
            a.lea(RDX, Mem(RDI, out_row0))
            a.mov_ri32(RCX, nrows)
            top = a.label()
            ib, id0, ob, od0 = RAX, 0, RDX, 0
        else:
            ib, id0, ob, od0 = RDI, in_row0, RDI, out_row0

        for x, kxl, kxh in left:
            body(ib, id0 + (x * s - pad_l) * in_pos,
                 ob, od0 + x * out_pos, kyl, kyh, kxl, kxh)
        if mcount == 1:
            body(ib, id0 + (mx0 * s - pad_l) * in_pos,
                 ob, od0 + mx0 * out_pos, kyl, kyh, 0, kw)
        elif mcount >= 2:
            a.lea(R8, Mem(ib, id0 + (mx0 * s - pad_l) * in_pos))
            a.lea(R9, Mem(ob, od0 + mx0 * out_pos))
            a.mov_ri32(R10, mcount)
            xtop = a.label()
            body(R8, 0, R9, 0, kyl, kyh, 0, kw)
            a.add_ri(R8, s * in_pos)
            a.add_ri(R9, out_pos)
            a.dec_r32(R10)
            a.jnz(xtop)
        for x, kxl, kxh in right:
            body(ib, id0 + (x * s - pad_l) * in_pos,
                 ob, od0 + x * out_pos, kyl, kyh, kxl, kxh)

        if loop_rows:
            a.add_ri(RAX, s * in_row)
            a.add_ri(RDX, out_row)
            a.dec_r32(RCX)
            a.jnz(top)


# --- convolution -------------------------------------------------------------

def emit_conv(ctx, u):
    a = ctx.a
    kh, kw, cin, cout = u.kernel.shape
    w_in = u.input_shapes[0].w
    k_flat = kh * kw * cin
    lay = _matvec_pools(ctx, u, np.asarray(u.kernel, F32).reshape(k_flat, cout))
    kwc = kw * cin

    def gather(in_base, in_disp, j, kyl, kyh, kxl, kxh):
        """Load the valid lanes of column block j, zeroing the rest.
        Returns False if no lane is valid (block skipped)."""
        lanes = []
        for l in range(4):
            e = 4 * j + l
            if e >= k_flat:
                continue
            ky, rem = divmod(e, kwc)
            kx = rem // cin
            if kyl <= ky < kyh and kxl <= kx < kxh:
                disp = in_disp + 4 * (e + ky * (w_in - kw) * cin)
                lanes.append((l, disp, ky))
        if not lanes:
            return False
        a.marker("mvblock")
        if len(lanes) == 4 and all(k == lanes[0][2] for _, _, k in lanes):
            a.movups(X_REG, Mem(in_base, lanes[0][1]))
        else:
            first = True
            for l, disp, _ in lanes:
                zmask = (0xF ^ (1 << l)) if first else 0
                a.insertps(X_REG, Mem(in_base, disp), l, zmask)
                first = False
        return True

    def body(in_base, in_disp, out_base, out_disp, kyl, kyh, kxl, kxh):
        for acc_base, gb in _chunks(lay.r4, ctx.budget.data_regs):
            accs = list(range(gb))
            for bi in accs:
                a.movaps(bi, Mem(RSI, lay.bias + 16 * (acc_base + bi)))
            for j in range(lay.c4):
                if not lay.nz[j, acc_base:acc_base + gb].any():
                    continue
                if gather(in_base, in_disp, j, kyl, kyh, kxl, kxh):
                    _feed_block(ctx, lay, accs, acc_base, j)
            _finish_group(ctx, u, accs, acc_base, cout, lay.ps, lay.po,
                          out_base, out_disp, False)

    _for_each_position(ctx, u, body)


# --- depthwise convolution ----------------------------------------------------

def emit_depthwise(ctx, u):
    a, pool = ctx.a, ctx.pool
    kh, kw, c = u.kernel.shape
    w_in = u.input_shapes[0].w
    c4 = _blocks(c)
    blob = np.zeros((kh, kw, c4 * 4), dtype=F32)
    blob[:, :, :c] = u.kernel
    wbase = pool.add_bytes(np.ascontiguousarray(blob, "<f4").tobytes())
    bias = _padded_vec(pool, u.bias, 4 * c4)
    ps = po = None
    if u.post_scale is not None:
        ps = _padded_vec(pool, u.post_scale, 4 * c4)
        po = _padded_vec(pool, u.post_offset, 4 * c4)

    def woff(ky, kx, cb):
        return wbase + ((ky * kw + kx) * c4 + cb) * 16

    def body(in_base, in_disp, out_base, out_disp, kyl, kyh, kxl, kxh):
        for acc_base, gb in _chunks(c4, ctx.budget.data_regs):
            accs = list(range(gb))
            for bi in accs:
                a.movaps(bi, Mem(RSI, bias + 16 * (acc_base + bi)))
            for ky in range(kyl, kyh):
                for kx in range(kxl, kxh):
                    tap = in_disp + 4 * (ky * w_in + kx) * c
                    for bi in accs:
                        a.movups(W_REG, Mem(in_base,
                                            tap + 16 * (acc_base + bi)))
                        a.mulps(W_REG, Mem(RSI, woff(ky, kx, acc_base + bi)))
                        a.addps(bi, W_REG)
            _finish_group(ctx, u, accs, acc_base, c, ps, po,
                          out_base, out_disp, False)

    _for_each_position(ctx, u, body)


# --- pooling ------------------------------------------------------------------

def emit_pool(ctx, u):
    a, pool = ctx.a, ctx.pool
    c = u.input_shapes[0].c
    w_in = u.input_shapes[0].w
    c4 = _blocks(c)
    is_avg = u.pool_op == "avg"

    def body(in_base, in_disp, out_base, out_disp, kyl, kyh, kxl, kxh):
        taps = [in_disp + 4 * (ky * w_in + kx) * c
                for ky in range(kyl, kyh) for kx in range(kxl, kxh)]
        count = pool.f32x4(float(len(taps))) if is_avg else None
        for acc_base, gb in _chunks(c4, ctx.budget.data_regs):
            accs = list(range(gb))
            for bi in accs:
                a.movups(bi, Mem(in_base, taps[0] + 16 * (acc_base + bi)))
            for tap in taps[1:]:
                for bi in accs:
                    a.movups(W_REG, Mem(in_base, tap + 16 * (acc_base + bi)))
                    if is_avg:
                        a.addps(bi, W_REG)
                    else:
                        a.maxps(bi, W_REG)
            if is_avg:
                for bi in accs:
                    a.divps(bi, Mem(RSI, count))
            for bi in accs:
                gi = acc_base + bi
                live = min(4, c - 4 * gi)
                _store_block(a, out_base, out_disp + 16 * gi, bi, live, False)

    _for_each_position(ctx, u, body)


# --- softmax ------------------------------------------------------------------
#
# Three passes: stabilizing max, exp and sum, reciprocal scale.  One divide
# total; the horizontal reductions use two shuffle/op pairs.

def _hreduce(a, acc, tmp, op):
    a.movaps(tmp, acc)
    a.shufps(tmp, tmp, 0x4E)
    op(acc, tmp)
    a.movaps(tmp, acc)
    a.shufps(tmp, tmp, 0xB1)
    op(acc, tmp)


def emit_softmax(ctx, u):
    a, pool = ctx.a, ctx.pool
    n = u.output_shape.elements
    src = ctx.off(u.input_ids[0])
    dst = ctx.off(u.output_id)
    n4, tail = divmod(n, 4)
    precise = ctx.options.softmax_exp == "precise"

    def exp_reg(reg):
        if precise:
            from .approx import emit_exp_precise
            emit_exp_precise(a, pool, reg, 3, 4, 5)
        else:
            from .approx import emit_fast_exp
            emit_fast_exp(a, pool, reg)

    # pass 1: global max into every lane of xmm0
    if n4:
        a.movaps(0, Mem(RDI, src))
        for b in range(1, n4):
            a.maxps(0, Mem(RDI, src + 16 * b))
        _hreduce(a, 0, 2, a.maxps)
    else:
        a.movss(0, Mem(RDI, src))
    for e in range(4 * n4 if n4 else 1, n):
        a.movss(2, Mem(RDI, src + 4 * e))
        a.maxss(0, 2)
    a.broadcast0(0)

    # pass 2: exponentials to dst, sum in xmm1
    a.xorps(1, 1)
    for b in range(n4):
        a.movaps(2, Mem(RDI, src + 16 * b))
        a.subps(2, 0)
        exp_reg(2)
        a.movaps_store(Mem(RDI, dst + 16 * b), 2)
        a.addps(1, 2)
    _hreduce(a, 1, 2, a.addps)
    for e in range(4 * n4, n):
        a.movss(2, Mem(RDI, src + 4 * e))
        a.subss(2, 0)
        exp_reg(2)
        a.movss_store(Mem(RDI, dst + 4 * e), 2)
        a.addss(1, 2)
    a.broadcast0(1)

    # pass 3: single divide, then scale
    a.movaps(2, Mem(RSI, pool.f32x4(1.0)))
    a.divps(2, 1)
    for b in range(n4):
        a.movaps(1, Mem(RDI, dst + 16 * b))
        a.mulps(1, 2)
        a.movaps_store(Mem(RDI, dst + 16 * b), 1)
    for e in range(4 * n4, n):
        a.movss(1, Mem(RDI, dst + 4 * e))
        a.mulss(1, 2)
        a.movss_store(Mem(RDI, dst + 4 * e), 1)


# --- copies, upsample, concat ---------------------------------------------------

def _copy_run(ctx, sbase, sdisp, dbase, ddisp, n_floats):
    """Straight-line copy of n_floats (loads may overrun, stores never)."""
    a = ctx.a
    for start, cnt in _chunks(n_floats, ctx.budget.batch_capacity):
        nregs = _blocks(cnt)
        for i in range(nregs):
            a.movups(i, Mem(sbase, sdisp + 4 * start + 16 * i))
        for i in range(nregs):
            live = min(4, cnt - 4 * i)
            _store_block(a, dbase, ddisp + 4 * start + 16 * i, i, live, False)


def emit_upsample(ctx, u):
    a = ctx.a
    h, w, c = u.input_shapes[0].dims
    f = u.factor
    in_off = ctx.off(u.input_ids[0])
    out_off = ctx.off(u.output_id)
    in_pos = 4 * c
    out_row = w * f * in_pos
    c4 = _blocks(c)

    a.lea(RAX, Mem(RDI, in_off))
    a.lea(RDX, Mem(RDI, out_off))
    a.mov_ri32(RCX, h)
    rtop = a.label()

    def expand_position(ib, idisp, ob, odisp):
        for start, cnt in _chunks(c, ctx.budget.batch_capacity):
            nregs = _blocks(cnt)
            for i in range(nregs):
                a.movups(i, Mem(ib, idisp + 4 * start + 16 * i))
            for p in range(f):
                for i in range(nregs):
                    live = min(4, cnt - 4 * i)
                    _store_block(a, ob, odisp + p * in_pos + 4 * start + 16 * i,
                                 i, live, False)

    if w >= 2:
        a.lea(R8, Mem(RAX, 0))
        a.lea(R9, Mem(RDX, 0))
        a.mov_ri32(R10, w)
        xtop = a.label()
        expand_position(R8, 0, R9, 0)
        a.add_ri(R8, in_pos)
        a.add_ri(R9, f * in_pos)
        a.dec_r32(R10)
        a.jnz(xtop)
    else:
        expand_position(RAX, 0, RDX, 0)

    for p in range(1, f):
        _copy_run(ctx, RDX, 0, RDX, p * out_row, w * f * c)

    a.add_ri(RAX, w * in_pos)
    a.add_ri(RDX, f * out_row)
    a.dec_r32(RCX)
    a.jnz(rtop)


def emit_concat(ctx, u):
    a = ctx.a
    out_off = ctx.off(u.output_id)
    shapes = u.input_shapes
    if u.output_shape.rank == 1:
        co = 0
        for tid, sh in zip(u.input_ids, shapes):
            _copy_run(ctx, RDI, ctx.off(tid), RDI, out_off + 4 * co,
                      sh.elements)
            co += sh.elements
        return
    h, w, _ = shapes[0].dims
    cout = u.output_shape.c
    positions = h * w
    co = 0
    for tid, sh in zip(u.input_ids, shapes):
        ct = sh.c
        if positions >= 2:
            a.lea(R8, Mem(RDI, ctx.off(tid)))
            a.lea(R9, Mem(RDI, out_off + 4 * co))
            a.mov_ri32(R10, positions)
            top = a.label()
            _copy_run(ctx, R8, 0, R9, 0, ct)
            a.add_ri(R8, 4 * ct)
            a.add_ri(R9, 4 * cout)
            a.dec_r32(R10)
            a.jnz(top)
        else:
            _copy_run(ctx, RDI, ctx.off(tid), RDI, out_off + 4 * co, ct)
        co += ct


def emit_copy(ctx, u):
    src = ctx.off(u.input_ids[0])
    dst = ctx.off(u.output_id)
    if src != dst:
        _copy_run(ctx, RDI, src, RDI, dst, u.output_shape.elements)


# --- dispatch -------------------------------------------------------------------

_EMITTERS = {
    "Dense": emit_dense,
    "Conv2D": emit_conv,
    "DepthwiseConv2D": emit_depthwise,
    "Pool": emit_pool,
    "ElementwiseActivation": emit_elementwise,
    "Add": emit_elementwise,
    "Softmax": emit_softmax,
    "Upsample": emit_upsample,
    "Concat": emit_concat,
    "Copy": emit_copy,
}


def emit_unit(ctx, unit, pos):
    ctx.a.marker(f"unit {pos} {unit.kind} {unit.name}")
    _EMITTERS[unit.kind](ctx, unit)
