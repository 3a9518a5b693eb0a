"""Build hooks for the optional compiled backend.

The Cython extension accelerates the pairwise interaction sum, the density
estimator, the finite-volume sweep, and field sampling. When Cython or a C
compiler is unavailable (or TORUSSWARM_NO_EXTENSION=1), installation falls
back to the numpy reference backend with identical results.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("TORUSSWARM_NO_EXTENSION"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "torusswarm._accel._core",
                    ["src/torusswarm/_accel/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[
                        ("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")
                    ],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
