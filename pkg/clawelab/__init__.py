"""CLAWE noise-mitigation laboratory on a virtual noisy QPU."""

__version__ = "0.1.0"
