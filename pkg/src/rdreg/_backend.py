"""Backend selection: numba-compiled loop kernels vs pure-numpy fallback.

The active backend is chosen once per call site from the RDREG_BACKEND
environment variable: "numba" (default when numba imports), "numpy", or
"auto". Library entry points accept an explicit ``backend=`` override so a
single process can exercise both paths (the benchmark does exactly that).
"""

import os

ENV_VAR = "RDREG_BACKEND"
_CHOICES = ("auto", "numba", "numpy")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    HAVE_NUMBA = False


def resolve_backend(name=None):
    """Return the concrete backend name, honoring the env flag and overrides."""
    if name is None:
        name = os.environ.get(ENV_VAR, "auto").lower()
    if name not in _CHOICES:
        raise ValueError(f"unknown backend {name!r}; expected one of {_CHOICES}")
    if name == "auto":
        return "numba" if HAVE_NUMBA else "numpy"
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    return name
