"""Kernel backend selection.

The hot numeric loops live in two interchangeable modules:
`_kernels_jit` (numba @njit) and `_kernels_np` (vectorized numpy).
The JIT backend is used when numba imports cleanly, unless the
environment variable FEDSHADOW_JIT is set to 0/off/false/no, which
forces the pure-numpy path. `benchmarks/bench_kernels.py` compares the
two.
"""

import os


def _select_backend():
    flag = os.environ.get("FEDSHADOW_JIT", "").strip().lower()
    if flag in ("0", "off", "false", "no"):
        from fedshadow import _kernels_np
        return _kernels_np, "numpy"
    try:
        from fedshadow import _kernels_jit
    except ImportError:
        from fedshadow import _kernels_np
        return _kernels_np, "numpy"
    return _kernels_jit, "numba"


_backend, BACKEND = _select_backend()

sgd_train = _backend.sgd_train
forward_logits = _backend.forward_logits
jacobi_eigh = _backend.jacobi_eigh
silhouette_two = _backend.silhouette_two
mean_pairwise = _backend.mean_pairwise
