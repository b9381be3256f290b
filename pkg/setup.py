"""Build script for the optional compiled kernels.

Metadata lives in pyproject.toml.  When Cython or a C compiler is missing
the package still installs and falls back to the numpy kernels.
"""
import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("landaulab._ckernels", ["src/landaulab/_ckernels.pyx"],
                   include_dirs=[np.get_include()], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
