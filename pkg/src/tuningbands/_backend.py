"""Select the kernel implementation at import.

The compiled extension is used when it was built; set
``TUNINGBANDS_BACKEND=python`` to force the numpy fallback.
"""
import os

NAME = "python"

if os.environ.get("TUNINGBANDS_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as kernels

        NAME = "compiled"
    except ImportError:
        kernels = None
else:
    kernels = None

if kernels is None:
    from . import _pykernels as kernels

from . import _pykernels as python_kernels

ET = kernels.ET
HD = kernels.HD
