"""Compile-and-run facade.

CompiledNetwork owns the executable mapping, the constant pool, and one
16-byte-aligned arena holding every tensor.  Input and output tensors are
exposed as numpy views directly into that arena, so a steady-state inference
is: write inputs through the views, call apply(), read the output views.
No allocation happens on that path.

Inputs are expected to be finite; non-finite values propagate through the
arithmetic in whatever way the clamps and masks allow, just not necessarily
bit-identically to the interpreter.
"""

import time

import numpy as np

from .errors import InputShapeMismatch
from .graph import build_graph
from .memory_planner import plan_buffers
from .model_format import load_model
from .optimizer import build_plan
from .options import ApproximationOptions
from .codegen import compile_plan, ExecutableBuffer, check_host


def _aligned_bytes(n):
    raw = np.zeros(n + 16, dtype=np.uint8)
    shift = (-int(raw.ctypes.data)) % 16
    return raw[shift:shift + n]


class CompiledNetwork:
    def __init__(self, manifest, weights, options=None):
        check_host()
        t0 = time.perf_counter()
        self.options = options or ApproximationOptions()
        self.manifest = manifest
        self.graph = build_graph(manifest, weights)
        self.plan = build_plan(self.graph)
        self.assignment = plan_buffers(self.plan)
        self.artifact = compile_plan(self.plan, self.assignment, self.options)
        self._exec = ExecutableBuffer(self.artifact.code)
        # +16 tail guard: full-width loads of a ragged final channel block
        # may read a few bytes past the last tensor's rounded extent.
        self._arena = _aligned_bytes(self.artifact.arena_size + 16)
        pool_data = self.artifact.pool_data
        self._pool = _aligned_bytes(max(len(pool_data), 16))
        self._pool[:len(pool_data)] = np.frombuffer(pool_data, np.uint8)
        self._arena_addr = int(self._arena.ctypes.data)
        self._pool_addr = int(self._pool.ctypes.data)
        # View shapes come from the graph's input/output nodes: fusion and
        # Flatten relabeling may leave the backing plan tensor with the
        # producer's shape, but the element layout is identical.
        self.input_views = [
            self._tensor_view(tid, self.graph.nodes[nid].output_shape.dims)
            for tid, nid in zip(self.plan.input_ids, self.graph.input_ids)]
        self.output_views = [
            self._tensor_view(tid, self.graph.nodes[nid].output_shape.dims)
            for tid, nid in zip(self.plan.output_ids, self.graph.output_ids)]
        self.compile_ms = (time.perf_counter() - t0) * 1e3

    def _tensor_view(self, tid, dims):
        off, _ = self.artifact.offsets[tid]
        n = 1
        for d in dims:
            n *= d
        raw = self._arena[off:off + 4 * n]
        return raw.view(np.float32).reshape(dims)

    def apply(self):
        """Execute the compiled code over the arena in place."""
        self._exec(self._arena_addr, self._pool_addr)

    def run(self, inputs):
        """Copy inputs in, execute, return the output views."""
        if len(inputs) != len(self.input_views):
            raise InputShapeMismatch(
                f"expected {len(self.input_views)} inputs, got {len(inputs)}")
        for view, arr in zip(self.input_views, inputs):
            arr = np.asarray(arr, dtype=np.float32)
            if tuple(arr.shape) != tuple(view.shape):
                raise InputShapeMismatch(
                    f"input shape {arr.shape} does not match {view.shape}")
            view[...] = arr
        self.apply()
        return list(self.output_views)

    def describe(self):
        lines = [f"units ({len(self.plan.units)}):"]
        for pos, u in enumerate(self.plan.units):
            lines.append(f"  {pos:3d}: {u.describe()}")
        lines.append("buffers:")
        lines.append(self.assignment.describe())
        md = self.artifact.metadata
        lines.append(f"code {md['code_bytes']} bytes, pool {md['pool_bytes']}"
                     f" bytes, compiled in {self.compile_ms:.2f} ms")
        return "\n".join(lines)


def compile_model(manifest, weights, options=None):
    return CompiledNetwork(manifest, weights, options)


def compile_file(manifest_path, blob_path=None, options=None):
    manifest, weights = load_model(manifest_path, blob_path)
    return CompiledNetwork(manifest, weights, options)
