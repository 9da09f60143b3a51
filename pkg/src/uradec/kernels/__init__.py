"""Message-passing kernels: compiled core when available, numpy fallback otherwise.

Set ``URADEC_KERNELS=python`` to force the fallback (used by the benchmark
and the cross-backend tests).
"""

import os

from . import _pykernels

python = _pykernels

try:
    from . import _ckernels as compiled
except ImportError:  # extension not built
    compiled = None

if os.environ.get("URADEC_KERNELS", "").lower() == "python" or compiled is None:
    active = _pykernels
else:
    active = compiled

NAME = active.NAME
wht = active.wht
xor_conv = active.xor_conv
check_phase = active.check_phase
var_phase = active.var_phase
bp_loop = active.bp_loop


def get(name: str | None = None):
    """Kernel module by name ("cython" / "python"); None gives the active one."""
    if name is None:
        return active
    if name == "python":
        return _pykernels
    if name == "cython":
        if compiled is None:
            raise ImportError("compiled kernels are not built")
        return compiled
    raise ValueError(f"unknown kernel backend {name!r}")
