"""Kernel backend selection and introspection.

``varimp._kernels`` is a single source file that setup.py compiles with
Cython; the built extension shadows the ``.py`` file on import, so simply
importing the module picks the fast backend when it exists and falls back
to the interpreted one otherwise.  Both execute the same statements in the
same order, so results are bit-identical either way.

``load_pure_kernels`` imports the interpreted variant explicitly (under a
different module name) so tests and benchmarks can compare the two.
"""

import importlib.util
import os

from . import _kernels


def backend_name() -> str:
    """'compiled' when the C extension is active, else 'pure-python'."""
    return "compiled" if _kernels.is_compiled() else "pure-python"


def load_pure_kernels():
    """Import the interpreted kernel module regardless of the built one."""
    if not _kernels.is_compiled():
        return _kernels
    src = os.path.join(os.path.dirname(__file__), "_kernels.py")
    spec = importlib.util.spec_from_file_location("varimp._kernels_pure", src)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod
