"""Keras to nnjit container-format exporter."""

from .export import ExportError, export_model, export_to_files

__all__ = ["ExportError", "export_model", "export_to_files"]
__version__ = "0.1.0"
