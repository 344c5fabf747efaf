"""Build script: compiles the numeric kernel with Cython when available.

``varimp/_kernels.py`` is written in Cython pure-Python mode, so the same
source runs interpreted if the extension cannot be built; the package then
falls back to the (much slower) interpreted kernel at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [Extension("varimp._kernels", ["src/varimp/_kernels.py"])],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": False,
        },
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
