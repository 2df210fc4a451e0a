"""Surface temperature reconstruction for a conducting strip.

Given interior temperature histories at unit depths below the surface,
recover the surface history by regularized spectral inversion of a
convolution identity, represent the result as a cardinal (Sinc) series,
and measure errors against closed-form test problems.

Submodules are imported lazily by the CLI so that thread caps can be
applied before numpy loads; library users just import what they need:

    from sidecast import kernels, regularizer
"""

__version__ = "0.1.0"

__all__ = [
    "fields",
    "kernels",
    "transform",
    "regularizer",
    "sinc",
    "harness",
    "cli",
]
