from . import loops, vector
from .loops import get as get_loop_kernel

__all__ = ["loops", "vector", "get_loop_kernel"]
