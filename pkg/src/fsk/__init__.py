"""Face anti-spoofing toolkit.

Spoof-aware descriptor images, prompt-guided vision-token masking, a
desk-scale encoder/projector pipeline, FAS evaluation metrics and the
instruction-dataset construction pipeline.
"""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
