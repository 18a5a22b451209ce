"""Kernel backend selection.

Three profiles, fixed at import time:

- ``mixed`` (default when the compiled extension is built): the compiled
  core serves the loop-heavy kernels it wins on benchmark (sigmoid, BCE,
  pairwise losses); the matmul-bound kernels stay on numpy, whose BLAS is
  faster at these shapes. See benchmarks/bench_backends.py.
- ``c``: every kernel from the compiled core.
- ``python``: every kernel from the numpy fallback (also the default when
  the extension is not built).

Set ``RANKFORGE_BACKEND={mixed,c,python}`` to force a profile (forcing
``mixed`` or ``c`` without the extension raises). Results agree across
profiles numerically but not bit-for-bit (summation order differs);
reproducibility contracts hold per selected profile.
"""

from __future__ import annotations

import os

from . import pykernels

try:
    from . import _kernels
except ImportError:
    _kernels = None  # type: ignore[assignment]

_MATMUL_KERNELS = ("linear_forward", "linear_backward", "relu_forward", "relu_backward")
_LOOP_KERNELS = ("sigmoid", "bce_logits", "pairwise_logistic", "pairwise_hinge")

_choice = os.environ.get("RANKFORGE_BACKEND", "").strip().lower()
if _choice in ("python", "py", "numpy"):
    _profile = "python"
elif _choice in ("c", "compiled", "cython"):
    _profile = "c"
elif _choice == "mixed":
    _profile = "mixed"
elif _choice == "":
    _profile = "mixed" if _kernels is not None else "python"
else:
    raise RuntimeError(f"unrecognized RANKFORGE_BACKEND value: {_choice!r}")

if _profile in ("c", "mixed") and _kernels is None:
    raise RuntimeError(
        f"RANKFORGE_BACKEND={_profile} requires the compiled extension; "
        "build it with `pip install -e .` or force RANKFORGE_BACKEND=python"
    )

BACKEND_NAME: str = _profile


def _pick(kernel: str):
    if _profile == "python":
        return getattr(pykernels, kernel)
    if _profile == "c":
        return getattr(_kernels, kernel)
    src = _kernels if kernel in _LOOP_KERNELS else pykernels
    return getattr(src, kernel)


linear_forward = _pick("linear_forward")
linear_backward = _pick("linear_backward")
relu_forward = _pick("relu_forward")
relu_backward = _pick("relu_backward")
sigmoid = _pick("sigmoid")
bce_logits = _pick("bce_logits")
pairwise_logistic = _pick("pairwise_logistic")
pairwise_hinge = _pick("pairwise_hinge")

__all__ = [
    "BACKEND_NAME",
    "pykernels",
    "linear_forward",
    "linear_backward",
    "relu_forward",
    "relu_backward",
    "sigmoid",
    "bce_logits",
    "pairwise_logistic",
    "pairwise_hinge",
]
