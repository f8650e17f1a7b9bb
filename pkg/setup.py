"""Build script for the optional compiled pair-sum kernel.

The extension is marked optional: if it cannot be compiled the package
installs anyway and falls back to the numpy implementation at import time.
Compiler flags can be overridden with ``DSLT_LAB_CFLAGS``.
"""

import os
import sys

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

if sys.platform.startswith("linux"):
    default_flags = "-O3 -ffast-math -march=native -mprefer-vector-width=512"
    link_args = ["-lmvec"]  # glibc vector math (vectorised exp)
else:
    default_flags = "-O3"
    link_args = []

flags = os.environ.get("DSLT_LAB_CFLAGS", default_flags).split()

ext = Extension(
    "dslt_lab._kernels",
    ["src/dslt_lab/_kernels.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=flags,
    extra_link_args=link_args,
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    optional=True,
)

setup(ext_modules=cythonize([ext], language_level=3, quiet=True))
