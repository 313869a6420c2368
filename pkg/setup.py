"""Build script for the optional compiled rate/gradient kernel.

The package works without the extension (a pure NumPy fallback is selected
at import time), but sweeps over many SIC-matrix candidates are an order of
magnitude faster with it.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "noma_forge._kernels._core",
                ["src/noma_forge/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
