"""SIMD activation and exponential kernels.

Each kernel exists twice: an ``emit_*`` function that appends SSE code to an
Assembler, and a ``*_model`` numpy function that reproduces the compiled
pipeline operation by operation in float32.  The models are the unit-test
oracle: compiled lanes must match them bit-for-bit on finite inputs (NaN
handling differs: max/min scrub NaNs to the clamp bound in hardware while
numpy propagates them).

tanh uses the degree-7/8 rational approximation

    num = ((36 t + 6930) t + 270270) t + 2027025) · x,  t = x²
    den = (((t + 630) t + 51975) t + 945945) t + 2027025

with the argument clamped to ±5.7.  Clamped lanes then yield exactly
|p| = PADE_AT_CLAMP, and a final fix-up adds sign(x)·(1 − PADE_AT_CLAMP) to
exactly those lanes, saturating them to ±1.0 bit-exactly (1 − PADE_AT_CLAMP
is exact by Sterbenz's lemma, and PADE_AT_CLAMP + (1 − PADE_AT_CLAMP) == 1.0
in float32).  Interior lanes gain ±0.0, which preserves their value and sign.

The fast exponential writes a scaled-and-biased value into the IEEE-754
exponent field: one multiply, one float-to-int conversion, one integer add.
The bias includes a downward adjustment that minimizes the worst-case
relative error (about 3.0% over the clamped domain).

The precise exponential does Cody-Waite range reduction (x = k·ln2 + r) and
a degree-7 polynomial for exp(r), then scales by 2^k built with integer ops;
relative error is a few 1e-7, interpreter-grade for softmax purposes.
"""

import numpy as np

from .asm import Mem, RSI

F32 = np.float32

TANH_CLAMP = 5.7
TANH_NUM = (36.0, 6930.0, 270270.0, 2027025.0)
TANH_DEN = (630.0, 51975.0, 945945.0, 2027025.0)

EXP_A = 12102203.161561485          # 2^23 / ln 2
EXP_BIAS_ADJ = 366000               # minimizes max relative error
EXP_BIAS = (127 << 23) - EXP_BIAS_ADJ
EXP_CLAMP = 80.0

INV_LN2 = 1.4426950408889634
LN2_HI = 0.693359375                # short mantissa: k*LN2_HI is exact
LN2_LO = float(np.log(np.float64(2.0)) - 0.693359375)
EXP_POLY = (1.0 / 5040, 1.0 / 720, 1.0 / 120, 1.0 / 24, 1.0 / 6, 0.5, 1.0, 1.0)

SIGN_BITS = 0x80000000
ABS_BITS = 0x7FFFFFFF


def _pade_f32(x):
    """Steps shared by model and emitter, after clamping: p = num/den."""
    t = x * x
    num = t * F32(TANH_NUM[0]) + F32(TANH_NUM[1])
    num = num * t + F32(TANH_NUM[2])
    num = num * t + F32(TANH_NUM[3])
    num = num * x
    den = t + F32(TANH_DEN[0])
    den = den * t + F32(TANH_DEN[1])
    den = den * t + F32(TANH_DEN[2])
    den = den * t + F32(TANH_DEN[3])
    return num / den

PADE_AT_CLAMP = _pade_f32(F32(TANH_CLAMP))
SAT_DELTA = F32(1.0) - PADE_AT_CLAMP


# --- numpy models (float32-faithful) ----------------------------------------

def tanh_model(x):
    x = np.minimum(np.maximum(np.asarray(x, F32), F32(-TANH_CLAMP)),
                   F32(TANH_CLAMP))
    p = _pade_f32(x)
    adj = np.where(np.abs(p) == PADE_AT_CLAMP, SAT_DELTA, F32(0.0))
    return p + np.copysign(adj, p).astype(F32)


def sigmoid_model(x):
    y = tanh_model(np.asarray(x, F32) * F32(0.5))
    return y * F32(0.5) + F32(0.5)


def fast_exp_model(x):
    x = np.minimum(np.maximum(np.asarray(x, F32), F32(-EXP_CLAMP)),
                   F32(EXP_CLAMP))
    prod = x * F32(EXP_A)
    bits = np.rint(prod).astype(np.int32) + np.int32(EXP_BIAS)
    return bits.view(F32)


def fast_sigmoid_model(x):
    e = fast_exp_model(-np.asarray(x, F32))
    return F32(1.0) / (e + F32(1.0))


def fast_tanh_model(x):
    e = fast_exp_model(np.asarray(x, F32) * F32(-2.0))
    return F32(2.0) / (e + F32(1.0)) - F32(1.0)


def exp_precise_model(x):
    x = np.minimum(np.maximum(np.asarray(x, F32), F32(-EXP_CLAMP)),
                   F32(EXP_CLAMP))
    k = np.rint(x * F32(INV_LN2)).astype(np.int32)
    two_k = ((k + np.int32(127)) << 23).view(F32)
    kf = k.astype(F32)
    r = (x - kf * F32(LN2_HI)) - kf * F32(LN2_LO)
    p = r * F32(EXP_POLY[0]) + F32(EXP_POLY[1])
    for c in EXP_POLY[2:]:
        p = p * r + F32(c)
    return p * two_k


def activation_model(tag, mode, x):
    x = np.asarray(x, F32)
    if tag == "linear":
        return x.copy()
    if tag == "relu":
        return np.maximum(x, F32(0.0))
    if tag == "tanh":
        return tanh_model(x) if mode == "rational" else fast_tanh_model(x)
    if tag == "sigmoid":
        return sigmoid_model(x) if mode == "rational" else fast_sigmoid_model(x)
    raise AssertionError(f"unknown activation tag {tag}")


# --- emitters ---------------------------------------------------------------

def _c(pool, value):
    return Mem(RSI, pool.f32x4(float(F32(value))))


def emit_relu(a, pool, x):
    a.maxps(x, _c(pool, 0.0))


def emit_tanh(a, pool, x, s1, s2):
    """tanh into register x, clobbering scratch s1, s2."""
    a.maxps(x, _c(pool, -TANH_CLAMP))
    a.minps(x, _c(pool, TANH_CLAMP))
    a.movaps(s1, x)
    a.mulps(s1, x)                       # t = x^2
    a.movaps(s2, s1)
    a.mulps(s2, _c(pool, TANH_NUM[0]))
    a.addps(s2, _c(pool, TANH_NUM[1]))
    a.mulps(s2, s1)
    a.addps(s2, _c(pool, TANH_NUM[2]))
    a.mulps(s2, s1)
    a.addps(s2, _c(pool, TANH_NUM[3]))
    a.mulps(s2, x)                       # numerator; x free afterwards
    a.movaps(x, s1)
    a.addps(x, _c(pool, TANH_DEN[0]))
    a.mulps(x, s1)
    a.addps(x, _c(pool, TANH_DEN[1]))
    a.mulps(x, s1)
    a.addps(x, _c(pool, TANH_DEN[2]))
    a.mulps(x, s1)
    a.addps(x, _c(pool, TANH_DEN[3]))    # denominator
    a.divps(s2, x)                       # p = num/den
    # Saturation fix-up: lanes that were clamped sit at exactly +-PADE_AT_CLAMP.
    a.movaps(x, s2)
    a.andps(x, Mem(RSI, pool.u32x4(ABS_BITS)))
    a.cmpps(x, _c(pool, float(PADE_AT_CLAMP)), 0)
    a.andps(x, _c(pool, float(SAT_DELTA)))
    a.movaps(s1, s2)
    a.andps(s1, Mem(RSI, pool.u32x4(SIGN_BITS)))
    a.orps(x, s1)
    a.addps(s2, x)
    a.movaps(x, s2)


def emit_sigmoid(a, pool, x, s1, s2):
    a.mulps(x, _c(pool, 0.5))
    emit_tanh(a, pool, x, s1, s2)
    a.mulps(x, _c(pool, 0.5))
    a.addps(x, _c(pool, 0.5))


def _emit_fast_exp_core(a, pool, x):
    a.maxps(x, _c(pool, -EXP_CLAMP))
    a.minps(x, _c(pool, EXP_CLAMP))
    a.mulps(x, _c(pool, EXP_A))
    a.cvtps2dq(x, x)
    a.paddd(x, Mem(RSI, pool.i32x4(EXP_BIAS)))


def emit_fast_exp(a, pool, x):
    _emit_fast_exp_core(a, pool, x)


def emit_fast_sigmoid(a, pool, x, s1):
    a.xorps(x, Mem(RSI, pool.u32x4(SIGN_BITS)))
    _emit_fast_exp_core(a, pool, x)
    a.addps(x, _c(pool, 1.0))
    a.movaps(s1, x)
    a.movaps(x, Mem(RSI, pool.f32x4(1.0)))
    a.divps(x, s1)


def emit_fast_tanh(a, pool, x, s1):
    a.mulps(x, _c(pool, -2.0))
    _emit_fast_exp_core(a, pool, x)
    a.addps(x, _c(pool, 1.0))
    a.movaps(s1, x)
    a.movaps(x, Mem(RSI, pool.f32x4(2.0)))
    a.divps(x, s1)
    a.subps(x, _c(pool, 1.0))


def emit_exp_precise(a, pool, x, s1, s2, s3):
    a.maxps(x, _c(pool, -EXP_CLAMP))
    a.minps(x, _c(pool, EXP_CLAMP))
    a.movaps(s1, x)
    a.mulps(s1, _c(pool, INV_LN2))
    a.cvtps2dq(s1, s1)                   # k
    a.cvtdq2ps(s2, s1)                   # kf
    a.paddd(s1, Mem(RSI, pool.i32x4(127)))
    a.pslld(s1, 23)                      # 2^k
    a.movaps(s3, s2)
    a.mulps(s3, _c(pool, LN2_HI))
    a.subps(x, s3)
    a.mulps(s2, _c(pool, LN2_LO))
    a.subps(x, s2)                       # r
    a.movaps(s2, x)
    a.mulps(s2, _c(pool, EXP_POLY[0]))
    a.addps(s2, _c(pool, EXP_POLY[1]))
    for c in EXP_POLY[2:]:
        a.mulps(s2, x)
        a.addps(s2, _c(pool, c))
    a.mulps(s2, s1)
    a.movaps(x, s2)


def emit_activation(a, pool, tag, mode, x, s1, s2):
    """Apply an activation to register x in the selected mode."""
    if tag == "linear":
        return
    if tag == "relu":
        emit_relu(a, pool, x)
    elif tag == "tanh":
        if mode == "rational":
            emit_tanh(a, pool, x, s1, s2)
        else:
            emit_fast_tanh(a, pool, x, s1)
    elif tag == "sigmoid":
        if mode == "rational":
            emit_sigmoid(a, pool, x, s1, s2)
        else:
            emit_fast_sigmoid(a, pool, x, s1)
    else:
        raise AssertionError(f"unknown activation tag {tag}")
