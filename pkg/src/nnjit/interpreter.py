"""Reference interpreter.

Executes a ComputationGraph in float32 with a fixed, documented accumulation
order so results are reproducible bit-for-bit:

* Dense: ``acc_j = bias_j``, then ``acc_j += x_i * K[i, j]`` for i ascending.
* Conv2D: ``acc[y,x,o] = bias_o``, then for (ky, kx, ci) in lexicographic
  order ``acc[y,x,o] += xpad[y*s+ky, x*s+kx, ci] * K[ky,kx,ci,o]``, where
  xpad is the zero-padded input.
* DepthwiseConv2D: same with taps (ky, kx) and per-channel products.
* AvgPool2D: taps summed in (ky, kx) order over the zero-padded input, then
  divided by the count of in-bounds taps (Keras semantics).
* Add: inputs accumulated left to right.

Every multiply and add rounds to float32 before the next step.  Transcendental
activations and Softmax are computed via the platform's float64 routines and
rounded to float32 at the end; they serve as the high-accuracy reference for
the compiled approximations.
"""

import numpy as np

from .errors import InputShapeMismatch
from .graph import same_padding
from .model_format import layer_weights

F32 = np.float32


def _pad_input(x, kh, kw, stride, padding, fill=0.0):
    if padding == "valid":
        return x, 0, 0
    h, w = x.shape[0], x.shape[1]
    pt, pb = same_padding(h, kh, stride)
    pl, pr = same_padding(w, kw, stride)
    xpad = np.full((h + pt + pb, w + pl + pr) + x.shape[2:], fill, dtype=F32)
    xpad[pt:pt + h, pl:pl + w] = x
    return xpad, pt, pl


def _tap_slice(xpad, ky, kx, out_h, out_w, stride):
    return xpad[ky:ky + out_h * stride:stride, kx:kx + out_w * stride:stride]


def dense(x, kernel, bias):
    acc = bias.astype(F32).copy()
    for i in range(kernel.shape[0]):
        acc += F32(x[i]) * kernel[i, :]
    return acc


def conv2d(x, kernel, bias, stride, padding, out_h, out_w):
    kh, kw, cin, cout = kernel.shape
    xpad, _, _ = _pad_input(x, kh, kw, stride, padding)
    acc = np.empty((out_h, out_w, cout), dtype=F32)
    acc[:] = bias
    for ky in range(kh):
        for kx in range(kw):
            patch = _tap_slice(xpad, ky, kx, out_h, out_w, stride)
            for ci in range(cin):
                acc += patch[:, :, ci, None] * kernel[ky, kx, ci, :]
    return acc


def depthwise_conv2d(x, kernel, bias, stride, padding, out_h, out_w):
    kh, kw, c = kernel.shape
    xpad, _, _ = _pad_input(x, kh, kw, stride, padding)
    acc = np.empty((out_h, out_w, c), dtype=F32)
    acc[:] = bias
    for ky in range(kh):
        for kx in range(kw):
            acc += _tap_slice(xpad, ky, kx, out_h, out_w, stride) * kernel[ky, kx, :]
    return acc


def max_pool(x, ph, pw, stride, padding, out_h, out_w):
    xpad, _, _ = _pad_input(x, ph, pw, stride, padding, fill=-np.inf)
    acc = np.full((out_h, out_w, x.shape[2]), -np.inf, dtype=F32)
    for ky in range(ph):
        for kx in range(pw):
            np.maximum(acc, _tap_slice(xpad, ky, kx, out_h, out_w, stride), out=acc)
    return acc


def avg_pool(x, ph, pw, stride, padding, out_h, out_w):
    xpad, _, _ = _pad_input(x, ph, pw, stride, padding)
    ones = np.ones(x.shape[:2] + (1,), dtype=F32)
    opad, _, _ = _pad_input(ones, ph, pw, stride, padding)
    acc = np.zeros((out_h, out_w, x.shape[2]), dtype=F32)
    count = np.zeros((out_h, out_w, 1), dtype=F32)
    for ky in range(ph):
        for kx in range(pw):
            acc += _tap_slice(xpad, ky, kx, out_h, out_w, stride)
            count += _tap_slice(opad, ky, kx, out_h, out_w, stride)
    return acc / count


def batch_norm(x, scale, offset):
    return (x * scale + offset).astype(F32)


def activation(x, tag):
    if tag == "linear":
        return x.copy()
    if tag == "relu":
        return np.maximum(x, F32(0.0))
    if tag == "tanh":
        return np.tanh(x.astype(np.float64)).astype(F32)
    if tag == "sigmoid":
        with np.errstate(over="ignore"):
            return (1.0 / (1.0 + np.exp(-x.astype(np.float64)))).astype(F32)
    raise AssertionError(f"unknown activation tag {tag}")


def softmax(x):
    shifted = x.astype(np.float64) - float(x.max())
    e = np.exp(shifted)
    return (e / e.sum()).astype(F32)


def upsample(x, factor):
    return np.repeat(np.repeat(x, factor, axis=0), factor, axis=1)


def _run_node(node, values, weights):
    kind = node.kind
    cfg = node.config
    ins = [values[i] for i in node.input_ids]
    w = layer_weights(node.spec, weights) if node.spec.weight_refs else {}

    def bias_or_zero(n):
        b = w.get("bias")
        return b if b is not None else np.zeros(n, dtype=F32)

    if kind == "Dense":
        y = dense(ins[0], w["kernel"], bias_or_zero(cfg["units"]))
        return activation(y, cfg["activation"])
    if kind == "Conv2D":
        oh, ow, _ = node.output_shape.dims
        y = conv2d(ins[0], w["kernel"], bias_or_zero(cfg["filters"]),
                   cfg["strides"], cfg["padding"], oh, ow)
        return activation(y, cfg["activation"])
    if kind == "DepthwiseConv2D":
        oh, ow, c = node.output_shape.dims
        y = depthwise_conv2d(ins[0], w["kernel"], bias_or_zero(c),
                             cfg["strides"], cfg["padding"], oh, ow)
        return activation(y, cfg["activation"])
    if kind == "MaxPool2D":
        oh, ow, _ = node.output_shape.dims
        ph, pw = cfg["pool_size"]
        return max_pool(ins[0], ph, pw, cfg["strides"], cfg["padding"], oh, ow)
    if kind == "AvgPool2D":
        oh, ow, _ = node.output_shape.dims
        ph, pw = cfg["pool_size"]
        return avg_pool(ins[0], ph, pw, cfg["strides"], cfg["padding"], oh, ow)
    if kind == "BatchNorm":
        return batch_norm(ins[0], w["scale"], w["offset"])
    if kind == "Activation":
        return activation(ins[0], cfg["activation"])
    if kind == "Softmax":
        return softmax(ins[0])
    if kind == "Flatten":
        return ins[0].reshape(-1)
    if kind == "UpSample2D":
        return upsample(ins[0], cfg["factor"])
    if kind == "Add":
        acc = ins[0].copy()
        for other in ins[1:]:
            acc += other
        return acc
    if kind == "Concatenate":
        return np.concatenate(ins, axis=-1)
    raise AssertionError(f"unhandled kind {kind}")


def interpret(graph, inputs):
    """Run the graph on a list of input tensors (order of graph inputs)."""
    if len(inputs) != len(graph.input_ids):
        raise InputShapeMismatch(
            f"model takes {len(graph.input_ids)} inputs, got {len(inputs)}")
    values = {}
    for idx, arr in zip(graph.input_ids, inputs):
        arr = np.asarray(arr, dtype=F32)
        want = graph.nodes[idx].output_shape.dims
        if arr.shape != want:
            raise InputShapeMismatch(
                f"input '{graph.nodes[idx].name}' expects shape {want}, "
                f"got {arr.shape}")
        values[idx] = arr
    for idx in graph.order:
        node = graph.nodes[idx]
        if node.kind == "Input":
            continue
        values[idx] = _run_node(node, values, graph.weights)
    return [values[i] for i in graph.output_ids]
