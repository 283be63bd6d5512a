"""Exception taxonomy.

Every failure mode of the library maps to one of these types so callers can
distinguish bad model files, unsupported models, and host problems without
string matching.
"""


class NnjitError(Exception):
    """Base class for all errors raised by this package."""


# --- model format -----------------------------------------------------------

class ModelFormatError(NnjitError):
    """Base for manifest / weight blob problems."""


class ManifestSyntaxError(ModelFormatError):
    """Manifest is not valid JSON (or not UTF-8)."""


class SchemaError(ModelFormatError):
    """Manifest is valid JSON but violates the manifest schema."""


class UnknownLayerKind(SchemaError):
    """Layer kind string is not one of the supported kinds."""


class DuplicateName(SchemaError):
    """Two layers (or two weight refs) share a name."""


class BlobTooShort(ModelFormatError):
    """A weight ref points past the end of the weight blob."""


class NonFiniteWeight(ModelFormatError):
    """A weight tensor contains NaN or infinity."""


class MissingWeight(ModelFormatError):
    """A layer is missing a required weight (e.g. Dense without a kernel)."""


# --- graph ------------------------------------------------------------------

class GraphError(NnjitError):
    """Base for graph construction / shape inference problems."""


class UnknownInput(GraphError):
    """A layer references an input name that no layer produces."""


class CycleDetected(GraphError):
    """The layer references form a cycle."""


class ShapeMismatch(GraphError):
    """Tensor shapes are inconsistent with a layer's requirements."""


class WeightShapeMismatch(GraphError):
    """A weight tensor's shape disagrees with the layer config."""


class InputShapeMismatch(GraphError):
    """A tensor passed at run time does not match the declared input shape."""


# --- compilation / execution ------------------------------------------------

class CompileError(NnjitError):
    """Base for code generation problems."""


class UnsupportedHost(CompileError):
    """The host CPU or OS cannot run the generated code."""


class PlannerError(NnjitError):
    """Internal memory planning invariant was violated."""
