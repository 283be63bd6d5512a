"""Computation graph: name resolution, topological order, shape inference.

Tensors are rank-1 ``(features,)`` or rank-3 ``(h, w, c)``, stored row-major
with channels innermost.  Node i produces tensor i; edges reference producer
node ids.
"""

from dataclasses import dataclass, field

from .errors import (
    CycleDetected,
    ShapeMismatch,
    UnknownInput,
    WeightShapeMismatch,
)
from .model_format import layer_weights


@dataclass(frozen=True)
class TensorShape:
    dims: tuple

    @property
    def rank(self):
        return len(self.dims)

    @property
    def elements(self):
        n = 1
        for d in self.dims:
            n *= d
        return n

    @property
    def h(self):
        return self.dims[0]

    @property
    def w(self):
        return self.dims[1]

    @property
    def c(self):
        return self.dims[2]

    def __str__(self):
        return "x".join(str(d) for d in self.dims)


@dataclass
class GraphNode:
    index: int
    spec: object  # LayerSpec
    input_ids: tuple
    output_shape: TensorShape = None

    @property
    def name(self):
        return self.spec.name

    @property
    def kind(self):
        return self.spec.kind

    @property
    def config(self):
        return self.spec.config


@dataclass
class ComputationGraph:
    nodes: list
    input_ids: tuple
    output_ids: tuple
    order: tuple = ()          # topological order of node indices
    weights: object = None     # WeightStore
    consumers: dict = field(default_factory=dict)

    def node(self, idx):
        return self.nodes[idx]

    def shape(self, idx):
        return self.nodes[idx].output_shape


def same_padding(size, kernel, stride):
    """Keras-style padding for one axis: (before, after)."""
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2


def _conv_output_hw(h, w, kh, kw, stride, padding, where):
    if padding == "same":
        return -(-h // stride), -(-w // stride)
    if kh > h or kw > w:
        raise ShapeMismatch(
            f"{where}: kernel {kh}x{kw} larger than input {h}x{w} under valid padding")
    return (h - kh) // stride + 1, (w - kw) // stride + 1


def _infer_node_shape(node, in_shapes, weights):
    kind = node.kind
    cfg = node.config
    where = f"layer '{node.name}' ({kind})"

    def need_rank(shape, rank):
        if shape.rank != rank:
            raise ShapeMismatch(f"{where}: expected rank-{rank} input, got {shape}")

    def check_weight(role, expected):
        arr = layer_weights(node.spec, weights).get(role)
        if arr is None:
            return
        if tuple(arr.shape) != tuple(expected):
            raise WeightShapeMismatch(
                f"{where}: {role} shape {tuple(arr.shape)} does not match "
                f"expected {tuple(expected)}")

    if kind == "Input":
        return TensorShape(cfg["shape"])

    if kind == "Dense":
        (shape,) = in_shapes
        need_rank(shape, 1)
        units = cfg["units"]
        check_weight("kernel", (shape.dims[0], units))
        check_weight("bias", (units,))
        return TensorShape((units,))

    if kind == "Conv2D":
        (shape,) = in_shapes
        need_rank(shape, 3)
        kh, kw = cfg["kernel_size"]
        h, w = _conv_output_hw(shape.h, shape.w, kh, kw, cfg["strides"],
                               cfg["padding"], where)
        check_weight("kernel", (kh, kw, shape.c, cfg["filters"]))
        check_weight("bias", (cfg["filters"],))
        return TensorShape((h, w, cfg["filters"]))

    if kind == "DepthwiseConv2D":
        (shape,) = in_shapes
        need_rank(shape, 3)
        kh, kw = cfg["kernel_size"]
        h, w = _conv_output_hw(shape.h, shape.w, kh, kw, cfg["strides"],
                               cfg["padding"], where)
        check_weight("kernel", (kh, kw, shape.c))
        check_weight("bias", (shape.c,))
        return TensorShape((h, w, shape.c))

    if kind in ("MaxPool2D", "AvgPool2D"):
        (shape,) = in_shapes
        need_rank(shape, 3)
        ph, pw = cfg["pool_size"]
        h, w = _conv_output_hw(shape.h, shape.w, ph, pw, cfg["strides"],
                               cfg["padding"], where)
        return TensorShape((h, w, shape.c))

    if kind == "BatchNorm":
        (shape,) = in_shapes
        c = shape.dims[-1]
        check_weight("scale", (c,))
        check_weight("offset", (c,))
        return shape

    if kind in ("Activation",):
        (shape,) = in_shapes
        return shape

    if kind == "Softmax":
        (shape,) = in_shapes
        need_rank(shape, 1)
        return shape

    if kind == "Flatten":
        (shape,) = in_shapes
        return TensorShape((shape.elements,))

    if kind == "UpSample2D":
        (shape,) = in_shapes
        need_rank(shape, 3)
        f = cfg["factor"]
        return TensorShape((shape.h * f, shape.w * f, shape.c))

    if kind == "Add":
        first = in_shapes[0]
        for s in in_shapes[1:]:
            if s.dims != first.dims:
                raise ShapeMismatch(f"{where}: mismatched input shapes {first} vs {s}")
        return first

    if kind == "Concatenate":
        first = in_shapes[0]
        if first.rank == 1:
            return TensorShape((sum(s.dims[0] for s in in_shapes),))
        for s in in_shapes[1:]:
            if s.rank != 3 or (s.h, s.w) != (first.h, first.w):
                raise ShapeMismatch(
                    f"{where}: concatenated inputs must share h,w ({first} vs {s})")
        return TensorShape((first.h, first.w, sum(s.c for s in in_shapes)))

    raise AssertionError(f"unhandled kind {kind}")


def build_graph(manifest, weights):
    """Resolve names to a DAG, order it, infer shapes, cross-check weights."""
    by_name = {}
    for i, layer in enumerate(manifest.layers):
        by_name[layer.name] = i

    nodes = []
    for i, layer in enumerate(manifest.layers):
        input_ids = []
        for ref in layer.inputs:
            if ref not in by_name:
                raise UnknownInput(
                    f"layer '{layer.name}' consumes unknown layer '{ref}'")
            input_ids.append(by_name[ref])
        nodes.append(GraphNode(index=i, spec=layer, input_ids=tuple(input_ids)))

    # Kahn's algorithm; ready nodes picked in manifest order for determinism.
    indegree = [len(n.input_ids) for n in nodes]
    out_edges = {i: [] for i in range(len(nodes))}
    for n in nodes:
        for src in n.input_ids:
            out_edges[src].append(n.index)
    ready = sorted(i for i, d in enumerate(indegree) if d == 0)
    order = []
    import heapq
    heapq.heapify(ready)
    while ready:
        i = heapq.heappop(ready)
        order.append(i)
        for dst in out_edges[i]:
            indegree[dst] -= 1
            if indegree[dst] == 0:
                heapq.heappush(ready, dst)
    if len(order) != len(nodes):
        stuck = [nodes[i].name for i, d in enumerate(indegree) if d > 0]
        raise CycleDetected(f"layer references form a cycle through {stuck}")

    consumers = {i: [] for i in range(len(nodes))}
    for n in nodes:
        for src in n.input_ids:
            consumers[src].append(n.index)

    graph = ComputationGraph(
        nodes=nodes,
        input_ids=tuple(by_name[n] for n in manifest.inputs),
        output_ids=tuple(by_name[n] for n in manifest.outputs),
        order=tuple(order),
        weights=weights,
        consumers=consumers,
    )
    infer_shapes(graph)
    return graph


def infer_shapes(graph):
    """Annotate every node with its output shape (idempotent)."""
    for idx in graph.order:
        node = graph.nodes[idx]
        in_shapes = [graph.nodes[src].output_shape for src in node.input_ids]
        shape = _infer_node_shape(node, in_shapes, graph.weights)
        if node.output_shape is not None and node.output_shape.dims != shape.dims:
            raise ShapeMismatch(
                f"layer '{node.name}': inferred shape {shape} conflicts with "
                f"annotated {node.output_shape}")
        node.output_shape = shape
    return graph
