"""Step-kernel backend selection.

The compiled extension covers the one-dimensional hot path; everything else
(and any build without a compiler) runs on the numpy backend.  Selection
happens at import and can be forced with GROWTHLAB_BACKEND=numpy|compiled,
or per-process via set_backend (used by tests and the benchmark).
"""

from __future__ import annotations

import os

import numpy as np

from . import numpy_backend

try:
    from . import _speed as _compiled
except ImportError:  # pragma: no cover - build-environment dependent
    _compiled = None

_env = os.environ.get("GROWTHLAB_BACKEND", "auto")
if _env == "compiled" and _compiled is None:
    raise ImportError("GROWTHLAB_BACKEND=compiled but the extension is not built")

_active = "numpy" if (_env == "numpy" or _compiled is None) else "compiled"

_COMPILED_STEPS = {
    "random_deposition": lambda c: c.step_random_deposition,
    "ballistic": lambda c: c.step_ballistic,
    "lpp": lambda c: c.step_lpp,
    "rsos": lambda c: c.step_rsos,
}


def backend_name() -> str:
    return _active


def available_backends() -> tuple[str, ...]:
    return ("numpy", "compiled") if _compiled is not None else ("numpy",)


def set_backend(name: str) -> None:
    global _active
    if name == "auto":
        name = "compiled" if _compiled is not None else "numpy"
    if name not in available_backends():
        raise ValueError(f"backend {name!r} not available (have {available_backends()})")
    _active = name


def step(kind: str, h: np.ndarray, aux: np.ndarray, out: np.ndarray, *,
         d: int, beta: float | None = None, upd: np.ndarray | None = None) -> None:
    """Advance one time step: h is the valid region (margin 1 per spatial
    axis), aux the transformed noise for the output sites, out the target."""
    use_compiled = _active == "compiled" and d == 1 and h.ndim == 2
    if use_compiled:
        if kind == "polymer":
            _compiled.step_polymer(h, aux, out, beta)
            return
        if kind == "rsos_alternating":
            _compiled.step_rsos_alternating(h, aux, out, upd.astype(np.uint8))
            return
        fn = _COMPILED_STEPS.get(kind)
        if fn is not None:
            fn(_compiled)(h, aux, out)
            return
    if kind == "random_deposition":
        numpy_backend.step_random_deposition(h, aux, out, d)
    elif kind == "ballistic":
        numpy_backend.step_ballistic(h, aux, out, d)
    elif kind == "lpp":
        numpy_backend.step_lpp(h, aux, out, d)
    elif kind == "polymer":
        numpy_backend.step_polymer(h, aux, out, d, beta)
    elif kind == "rsos":
        numpy_backend.step_rsos(h, aux, out, d)
    elif kind == "rsos_alternating":
        numpy_backend.step_rsos_alternating(h, aux, out, d, upd)
    else:
        raise KeyError(f"no step kernel for model kind {kind!r}")
