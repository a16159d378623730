"""Activation exporter: forward-hook a saliency CNN and dump per-layer
activation stacks plus a manifest for downstream reconstruction."""

from actexport.export import (ExportError, default_layer_names, export,
                              load_model, select_layers)

__version__ = "0.1.0"

__all__ = ["ExportError", "default_layer_names", "export", "load_model",
           "select_layers", "__version__"]
