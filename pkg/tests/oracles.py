"""Independent scalar reference implementations.

Deliberately naive: explicit loops with per-operation float32 rounding, in
the accumulation orders the interpreter documents.  Slow, so callers keep
sizes small.  Where the interpreter is claimed exact these must match it
bit for bit.
"""

import numpy as np

F32 = np.float32


def same_pad(size, k, s):
    out = -(-size // s)
    total = max((out - 1) * s + k - size, 0)
    return total // 2, total - total // 2


def dense(x, kernel, bias):
    k_in, units = kernel.shape
    if bias is None:
        bias = np.zeros(units, dtype=F32)
    out = np.array(bias, dtype=F32, copy=True)
    for n in range(units):
        acc = out[n]
        for i in range(k_in):
            acc = F32(acc + F32(F32(x[i]) * F32(kernel[i, n])))
        out[n] = acc
    return out


def _pad3(x, pt, pb, pl, pr, fill):
    h, w, c = x.shape
    out = np.full((h + pt + pb, w + pl + pr, c), fill, dtype=F32)
    out[pt:pt + h, pl:pl + w] = x
    return out


def conv2d(x, kernel, bias, stride, padding):
    kh, kw, cin, cout = kernel.shape
    h, w, _ = x.shape
    if padding == "same":
        pt, pb = same_pad(h, kh, stride)
        pl, pr = same_pad(w, kw, stride)
        ho, wo = -(-h // stride), -(-w // stride)
    else:
        pt = pb = pl = pr = 0
        ho, wo = (h - kh) // stride + 1, (w - kw) // stride + 1
    xp = _pad3(x, pt, pb, pl, pr, 0.0)
    out = np.empty((ho, wo, cout), dtype=F32)
    for y in range(ho):
        for xx in range(wo):
            for n in range(cout):
                acc = F32(bias[n])
                for ky in range(kh):
                    for kx in range(kw):
                        for ci in range(cin):
                            v = xp[y * stride + ky, xx * stride + kx, ci]
                            acc = F32(acc + F32(v * kernel[ky, kx, ci, n]))
                out[y, xx, n] = acc
    return out


def depthwise(x, kernel, bias, stride, padding):
    kh, kw, c = kernel.shape
    h, w, _ = x.shape
    if padding == "same":
        pt, pb = same_pad(h, kh, stride)
        pl, pr = same_pad(w, kw, stride)
        ho, wo = -(-h // stride), -(-w // stride)
    else:
        pt = pb = pl = pr = 0
        ho, wo = (h - kh) // stride + 1, (w - kw) // stride + 1
    xp = _pad3(x, pt, pb, pl, pr, 0.0)
    out = np.empty((ho, wo, c), dtype=F32)
    for y in range(ho):
        for xx in range(wo):
            for ci in range(c):
                acc = F32(bias[ci])
                for ky in range(kh):
                    for kx in range(kw):
                        v = xp[y * stride + ky, xx * stride + kx, ci]
                        acc = F32(acc + F32(v * kernel[ky, kx, ci]))
                out[y, xx, ci] = acc
    return out


def pool(x, pool_hw, stride, padding, op):
    ph, pw = pool_hw
    h, w, c = x.shape
    if padding == "same":
        pt, pb = same_pad(h, ph, stride)
        pl, pr = same_pad(w, pw, stride)
        ho, wo = -(-h // stride), -(-w // stride)
    else:
        pt = pb = pl = pr = 0
        ho, wo = (h - ph) // stride + 1, (w - pw) // stride + 1
    fill = -np.inf if op == "max" else 0.0
    xp = _pad3(x, pt, pb, pl, pr, fill)
    valid = _pad3(np.ones_like(x), pt, pb, pl, pr, 0.0)
    out = np.empty((ho, wo, c), dtype=F32)
    for y in range(ho):
        for xx in range(wo):
            for ci in range(c):
                acc = F32(fill if op == "max" else 0.0)
                count = 0
                for ky in range(ph):
                    for kx in range(pw):
                        v = xp[y * stride + ky, xx * stride + kx, ci]
                        if op == "max":
                            acc = max(acc, v)
                        else:
                            acc = F32(acc + v)
                        count += int(valid[y * stride + ky,
                                           xx * stride + kx, ci])
                out[y, xx, ci] = acc if op == "max" else F32(acc / F32(count))
    return out


def batchnorm(x, scale, offset):
    out = np.empty_like(x, dtype=F32)
    flat = x.reshape(-1, x.shape[-1])
    oflat = out.reshape(-1, x.shape[-1])
    for p in range(flat.shape[0]):
        for ci in range(flat.shape[1]):
            oflat[p, ci] = F32(F32(flat[p, ci] * F32(scale[ci]))
                               + F32(offset[ci]))
    return out


def activation(x, tag):
    flat = x.ravel()
    out = np.empty_like(flat, dtype=F32)
    for i, v in enumerate(flat):
        if tag == "relu":
            out[i] = max(F32(0.0), v)
        elif tag == "tanh":
            out[i] = F32(np.tanh(np.float64(v)))
        elif tag == "sigmoid":
            out[i] = F32(1.0 / (1.0 + np.exp(-np.float64(v))))
        else:
            out[i] = v
    return out.reshape(x.shape)


def softmax(x):
    v = x.astype(np.float64)
    e = np.exp(v - v.max())
    return (e / e.sum()).astype(F32)


def upsample(x, f):
    h, w, c = x.shape
    out = np.empty((h * f, w * f, c), dtype=F32)
    for y in range(h * f):
        for xx in range(w * f):
            out[y, xx] = x[y // f, xx // f]
    return out
