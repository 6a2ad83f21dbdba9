"""Build script for the optional compiled eigensolver kernel.

The package works without the extension (a numpy fallback with the same
sweep order is selected at import time); set FACTORLAB_NO_EXT=1 to skip
compilation entirely.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("FACTORLAB_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "factorlab._jacobi",
                    ["src/factorlab/_jacobi.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
