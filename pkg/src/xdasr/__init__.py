"""Cross-domain phoneme recognition testbed on synthetic speech-like corpora."""

from .kernels import BACKEND_NAME

__version__ = "0.1.0"
__all__ = ["BACKEND_NAME", "__version__"]
