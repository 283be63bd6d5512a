"""nnjit: a JIT compiler for small CNN inference on x86-64.

Models arrive as a JSON manifest plus a raw float32 weight blob, get lowered
through shape inference, fusion, and buffer planning into SSE4-class machine
code, and run in-process through ctypes.  An exact reference interpreter
provides the numerical baseline for every compiled path.
"""

from .errors import (NnjitError, ModelFormatError, GraphError, CompileError,
                     PlannerError, UnsupportedHost)
from .model_format import (Manifest, LayerSpec, WeightStore, parse_manifest,
                           manifest_to_json, load_weights, load_model,
                           save_model)
from .graph import ComputationGraph, TensorShape, build_graph
from .interpreter import interpret
from .optimizer import build_plan, lower_to_units
from .memory_planner import plan_buffers, compute_lifetimes, assign_buffers
from .options import ApproximationOptions
from .runtime import CompiledNetwork, compile_model, compile_file

__version__ = "0.1.0"

__all__ = [
    "NnjitError", "ModelFormatError", "GraphError", "CompileError",
    "PlannerError", "UnsupportedHost",
    "Manifest", "LayerSpec", "WeightStore", "parse_manifest",
    "manifest_to_json", "load_weights", "load_model", "save_model",
    "ComputationGraph", "TensorShape", "build_graph", "interpret",
    "build_plan", "lower_to_units",
    "plan_buffers", "compute_lifetimes", "assign_buffers",
    "ApproximationOptions", "CompiledNetwork", "compile_model",
    "compile_file",
]
