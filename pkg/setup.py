"""Build the optional Cython kernel.

The package works without it: ``mwlab._kernels`` falls back to the
pure-Python implementation when the extension cannot be imported.
"""

import os

from setuptools import setup


def get_extensions():
    if os.environ.get("MWLAB_NO_EXTENSIONS"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        print("Cython or numpy unavailable; building pure-Python package only")
        return []
    extensions = [
        Extension(
            "mwlab._josephson",
            sources=["src/mwlab/_josephson.pyx"],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        ),
    ]
    return cythonize(
        extensions,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )


setup(ext_modules=get_extensions())
