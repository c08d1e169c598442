"""Builds the optional compiled core.

The package is fully functional without it (yolofs._pure is selected at
import time); when Cython and a C toolchain are present, the hot kernels in
src/yolofs/_core.pyx compile into yolofs._core and take over.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/yolofs/_core.pyx"],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
