"""Graph lowering and fusion.

Lowers a shape-annotated graph to an ordered list of compilation units, then
runs two rewrite passes:

* ``fuse_activation`` folds a standalone elementwise activation into the
  immediately preceding Dense/Conv/DepthwiseConv unit when the intermediate
  tensor has exactly one consumer.
* ``fuse_batchnorm`` removes BatchNorm units by rewriting the weights of an
  adjacent Dense/Conv/DepthwiseConv unit (before or after), or by attaching
  the affine transform as post_scale/post_offset when an activation sits in
  between.

Both passes only fire when the intermediate tensor has exactly one consumer
and is not a network input or output; everything else stays standalone.
Fusing BatchNorm into a convolution that reads the BatchNorm output under
'same' padding is unsound (the folded bias would also apply to the zero
padding), so case (b) requires 'valid' padding for conv/depthwise.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import NnjitError
from .model_format import layer_weights

F32 = np.float32


class UnsupportedLayer(NnjitError):
    """Graph contains a kind the compiler cannot lower."""


@dataclass
class CompilationUnit:
    uid: int
    kind: str                  # Dense, Conv2D, DepthwiseConv2D, Pool,
                               # ElementwiseActivation, Softmax, Upsample,
                               # Add, Concat, Copy
    name: str                  # source layer name (diagnostics)
    input_ids: tuple
    output_id: int
    input_shapes: tuple
    output_shape: object
    kernel: object = None      # Dense (in, units); Conv (kh, kw, ci, co);
                               # Depthwise (kh, kw, c)
    bias: object = None
    activation: str = "linear"         # fused activation tag
    post_scale: object = None          # applied after the activation
    post_offset: object = None
    scale: object = None               # standalone affine (BatchNorm)
    offset: object = None
    stride: int = 1
    padding: str = "valid"
    kernel_hw: tuple = None
    pool_op: str = None                # 'max' | 'avg'
    factor: int = 1
    in_place_preference: int = None    # input index eligible for aliasing

    def describe(self):
        bits = [f"{self.kind}"]
        ins = ",".join(str(s) for s in self.input_shapes)
        bits.append(f"{ins} -> {self.output_shape}")
        if self.kind in ("Conv2D", "DepthwiseConv2D", "Pool"):
            kh, kw = self.kernel_hw
            tag = self.pool_op or ""
            bits.append(f"{tag}{kh}x{kw}/s{self.stride} {self.padding}")
        if self.activation != "linear":
            bits.append(f"act={self.activation}")
        if self.post_scale is not None:
            bits.append("post_bn")
        if self.scale is not None:
            bits.append("affine")
        if self.in_place_preference is not None:
            bits.append("in_place?")
        return " ".join(bits)


@dataclass
class FusionPlan:
    units: list
    tensors: dict              # tensor id -> TensorShape
    input_ids: tuple
    output_ids: tuple
    node_units: dict = field(default_factory=dict)  # graph node -> unit uid or None

    def producer_positions(self):
        return {u.output_id: pos for pos, u in enumerate(self.units)}

    def consumer_count(self, tid):
        n = sum(1 for u in self.units for t in u.input_ids if t == tid)
        n += sum(1 for t in self.output_ids if t == tid)
        return n


def _zeros_bias(n):
    return np.zeros(n, dtype=F32)


def lower_to_units(graph):
    """One unit per node; Flatten and linear no-op nodes become relabels."""
    alias = {}

    def resolve(tid):
        while tid in alias:
            tid = alias[tid]
        return tid

    units = []
    node_units = {}
    tensors = {}
    uid = 0
    for idx in graph.order:
        node = graph.nodes[idx]
        kind = node.kind
        cfg = node.config
        w = layer_weights(node.spec, graph.weights) if node.spec.weight_refs else {}
        ins = tuple(resolve(i) for i in node.input_ids)
        in_shapes = tuple(graph.nodes[i].output_shape for i in node.input_ids)
        common = dict(uid=uid, name=node.name, input_ids=ins, output_id=idx,
                      input_shapes=in_shapes, output_shape=node.output_shape)

        if kind == "Input":
            tensors[idx] = node.output_shape
            node_units[idx] = None
            continue
        if kind == "Flatten":
            # Row-major contiguity holds for every producer, so this is free.
            alias[idx] = ins[0]
            node_units[idx] = None
            continue

        if kind == "Dense":
            unit = CompilationUnit(
                kind="Dense", kernel=w["kernel"],
                bias=w.get("bias", _zeros_bias(cfg["units"])),
                activation=cfg["activation"], **common)
        elif kind == "Conv2D":
            unit = CompilationUnit(
                kind="Conv2D", kernel=w["kernel"],
                bias=w.get("bias", _zeros_bias(cfg["filters"])),
                activation=cfg["activation"], stride=cfg["strides"],
                padding=cfg["padding"], kernel_hw=cfg["kernel_size"], **common)
        elif kind == "DepthwiseConv2D":
            unit = CompilationUnit(
                kind="DepthwiseConv2D", kernel=w["kernel"],
                bias=w.get("bias", _zeros_bias(in_shapes[0].c)),
                activation=cfg["activation"], stride=cfg["strides"],
                padding=cfg["padding"], kernel_hw=cfg["kernel_size"], **common)
        elif kind in ("MaxPool2D", "AvgPool2D"):
            unit = CompilationUnit(
                kind="Pool", pool_op="max" if kind == "MaxPool2D" else "avg",
                stride=cfg["strides"], padding=cfg["padding"],
                kernel_hw=cfg["pool_size"], **common)
        elif kind == "BatchNorm":
            unit = CompilationUnit(
                kind="ElementwiseActivation", scale=w["scale"], offset=w["offset"],
                in_place_preference=0, **common)
        elif kind == "Activation":
            unit = CompilationUnit(
                kind="ElementwiseActivation", activation=cfg["activation"],
                in_place_preference=0, **common)
        elif kind == "Softmax":
            unit = CompilationUnit(kind="Softmax", in_place_preference=0, **common)
        elif kind == "UpSample2D":
            unit = CompilationUnit(kind="Upsample", factor=cfg["factor"], **common)
        elif kind == "Add":
            unit = CompilationUnit(kind="Add", in_place_preference=0, **common)
        elif kind == "Concatenate":
            unit = CompilationUnit(kind="Concat", **common)
        else:
            raise UnsupportedLayer(f"cannot lower layer kind '{kind}'")

        units.append(unit)
        node_units[idx] = uid
        tensors[idx] = node.output_shape
        uid += 1

    return FusionPlan(
        units=units,
        tensors=tensors,
        input_ids=tuple(resolve(i) for i in graph.input_ids),
        output_ids=tuple(resolve(o) for o in graph.output_ids),
        node_units=node_units,
    )


def _fusable_intermediate(plan, tid):
    """True when tid has exactly one consumer and is not externally visible."""
    if tid in plan.input_ids or tid in plan.output_ids:
        return False
    return plan.consumer_count(tid) == 1


def _drop_unit(plan, pos, absorb_into, forward=True):
    """Remove units[pos]; the absorbing unit takes over its output (forward)
    or its input (backward)."""
    victim = plan.units[pos]
    if forward:
        # Keep the absorber's own shape: emitters derive loop bounds from it,
        # and elementwise victims preserve the element count anyway.
        assert victim.output_shape.elements == absorb_into.output_shape.elements
        absorb_into.output_id = victim.output_id
        plan.tensors.pop(victim.input_ids[0], None)
    else:
        absorb_into.input_ids = tuple(
            victim.input_ids[0] if t == victim.output_id else t
            for t in absorb_into.input_ids)
        absorb_into.input_shapes = victim.input_shapes
        plan.tensors.pop(victim.output_id, None)
    del plan.units[pos]
    plan.node_units = {n: (absorb_into.uid if u == victim.uid else u)
                       for n, u in plan.node_units.items()}


MATVEC_KINDS = ("Dense", "Conv2D", "DepthwiseConv2D")


def fuse_activation(plan):
    """Fold standalone activations into the adjacent producing unit."""
    changed = True
    while changed:
        changed = False
        for pos in range(1, len(plan.units)):
            unit = plan.units[pos]
            if unit.kind != "ElementwiseActivation" or unit.scale is not None:
                continue
            producer = plan.units[pos - 1]
            if producer.kind not in MATVEC_KINDS:
                continue
            if producer.output_id != unit.input_ids[0]:
                continue
            if producer.activation != "linear" or producer.post_scale is not None:
                continue
            if not _fusable_intermediate(plan, unit.input_ids[0]):
                continue
            producer.activation = unit.activation
            _drop_unit(plan, pos, producer, forward=True)
            changed = True
            break
    return plan


def _scale_out_axis(kernel, scale):
    # Output channels/units live on the last axis for all three kernel layouts.
    return np.multiply(kernel, scale, dtype=F32)


def _fold_bn_after(unit, scale, offset):
    unit.kernel = _scale_out_axis(unit.kernel, scale)
    unit.bias = np.add(np.multiply(unit.bias, scale, dtype=F32), offset, dtype=F32)


def _fold_bn_before(unit, scale, offset):
    kernel = unit.kernel
    if unit.kind == "Dense":
        # A channelwise affine reaching Dense through Flatten: row-major
        # flattening cycles channels fastest, so tiling replays it per row.
        if kernel.shape[0] != len(scale):
            reps = kernel.shape[0] // len(scale)
            scale = np.tile(scale, reps)
            offset = np.tile(offset, reps)
        extra = kernel.astype(np.float64).T @ offset.astype(np.float64)
        unit.kernel = np.multiply(kernel, scale[:, None], dtype=F32)
    elif unit.kind == "Conv2D":
        extra = np.tensordot(kernel.astype(np.float64),
                             offset.astype(np.float64), axes=([2], [0])).sum((0, 1))
        unit.kernel = np.multiply(kernel, scale[None, None, :, None], dtype=F32)
    else:  # DepthwiseConv2D
        extra = (kernel.astype(np.float64) * offset.astype(np.float64)).sum((0, 1))
        unit.kernel = np.multiply(kernel, scale, dtype=F32)
    unit.bias = (unit.bias.astype(np.float64) + extra).astype(F32)


def _attach_post_bn(unit, scale, offset):
    if unit.post_scale is None:
        unit.post_scale = scale.astype(F32)
        unit.post_offset = offset.astype(F32)
    else:
        unit.post_offset = np.add(
            np.multiply(unit.post_offset, scale, dtype=F32), offset, dtype=F32)
        unit.post_scale = np.multiply(unit.post_scale, scale, dtype=F32)


def fuse_batchnorm(plan):
    """Remove BatchNorm units by rewriting adjacent matvec-style units."""
    changed = True
    while changed:
        changed = False
        for pos, unit in enumerate(plan.units):
            if unit.kind != "ElementwiseActivation" or unit.scale is None:
                continue
            bn_in, bn_out = unit.input_ids[0], unit.output_id

            # (a)/(c): matvec unit directly before the BatchNorm.  The affine
            # must be channelwise from the producer's point of view; through
            # Flatten the channel counts diverge unless h = w = 1.
            if pos > 0:
                producer = plan.units[pos - 1]
                if (producer.kind in MATVEC_KINDS
                        and producer.output_id == bn_in
                        and len(unit.scale) == producer.output_shape.dims[-1]
                        and _fusable_intermediate(plan, bn_in)):
                    if producer.activation == "linear" and producer.post_scale is None:
                        _fold_bn_after(producer, unit.scale, unit.offset)
                    else:
                        _attach_post_bn(producer, unit.scale, unit.offset)
                    _drop_unit(plan, pos, producer, forward=True)
                    changed = True
                    break

            # (b): matvec unit directly after the BatchNorm.
            if pos + 1 < len(plan.units):
                consumer = plan.units[pos + 1]
                folds = (consumer.kind == "Dense"
                         or (consumer.kind in ("Conv2D", "DepthwiseConv2D")
                             and consumer.padding == "valid"))
                if (folds and bn_out in consumer.input_ids
                        and _fusable_intermediate(plan, bn_out)):
                    _fold_bn_before(consumer, unit.scale, unit.offset)
                    _drop_unit(plan, pos, consumer, forward=False)
                    changed = True
                    break
    return plan


def build_plan(graph):
    """Lower, then alternate the two fusion passes to a fixpoint.

    A BatchNorm sitting between a matvec unit and its activation blocks the
    activation fold until the BatchNorm itself is folded away, so one round
    of each pass is not always enough.  Every productive pass removes a unit,
    which bounds the loop.
    """
    plan = lower_to_units(graph)
    while True:
        before = len(plan.units)
        fuse_batchnorm(fuse_activation(plan))
        if len(plan.units) == before:
            return plan


def describe_plan(plan):
    lines = []
    for pos, unit in enumerate(plan.units):
        lines.append(f"  [{pos:2d}] t{unit.output_id:<3d} {unit.describe()}"
                     f"  (reads {', '.join('t%d' % t for t in unit.input_ids)})")
    return "\n".join(lines)
