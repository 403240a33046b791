"""Build script: compiles the optional fast-kernel extension.

The package is fully functional without the extension (a pure-Python
fallback is selected at import time); building it just makes the hot
metric kernels faster.  Build in place with:

    python setup.py build_ext --inplace
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("mskd._fastkern", sources=["src/mskd/_fastkern.pyx"])],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
