"""Build script for the optional compiled series kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); the Cython module only accelerates the truncated
series used for count-response selection probabilities.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SELMOD_SKIP_EXT"):
    try:
        from Cython.Build import cythonize

        ext = Extension(
            "selmod._kernels._series",
            ["src/selmod/_kernels/_series.pyx"],
            extra_compile_args=["-O3"],
            optional=True,
        )
        ext_modules = cythonize([ext], language_level="3")
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
