"""Builds the optional Cython kernel extension; the package works without it."""

import os

from setuptools import setup


def extensions():
    if os.environ.get("URADEC_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "uradec.kernels._ckernels",
        ["src/uradec/kernels/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=[] if os.name == "nt" else ["-O3", "-funroll-loops"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
