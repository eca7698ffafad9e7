"""Hot-loop kernels with a compiled backend and a NumPy fallback.

The compiled extension is used when it imports; set ``DYNMED_BACKEND=python``
to force the fallback. Both backends expose ``oracle_search`` and
``simulate_paths`` with identical signatures.
"""

from __future__ import annotations

import os

from . import _fallback

python_backend = _fallback

try:
    if os.environ.get("DYNMED_BACKEND", "").lower() == "python":
        raise ImportError("fallback forced by DYNMED_BACKEND")
    from . import _core as compiled_backend
except ImportError:
    compiled_backend = None

if compiled_backend is not None:
    BACKEND = "compiled"
    oracle_search = compiled_backend.oracle_search
    simulate_paths = compiled_backend.simulate_paths
else:
    BACKEND = "python"
    oracle_search = _fallback.oracle_search
    simulate_paths = _fallback.simulate_paths


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` ('compiled', 'python' or None for default)."""
    if name is None:
        return compiled_backend if compiled_backend is not None else python_backend
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
