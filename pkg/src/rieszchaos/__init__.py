"""Self-similar processes in a fixed Wiener chaos, synthesized from Meyer wavelets."""

from .riesz_core import ProcessParams, derive_params, kernel_norm, riesz_kernel
from .synthesis import TruncationSpec, synth_field, synth_path, synth_paths

__all__ = ["ProcessParams", "derive_params", "kernel_norm", "riesz_kernel", "TruncationSpec", "synth_field",
           "synth_path", "synth_paths"]
