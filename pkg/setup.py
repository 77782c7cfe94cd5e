"""Build script for the optional compiled filter kernel.

The package is fully functional without the extension (a pure-Python
backend is selected at import time); building it just makes long
strapdown/EKF runs much faster.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/pednav/_kernels.pyx"],
        compiler_directives={"language_level": "3"},
    )
    include_dirs = [numpy.get_include()]
except ImportError:
    ext_modules = []
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
