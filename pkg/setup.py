"""Build the optional compiled kernels.

The extension is optional: when Cython or a C++ compiler is unavailable the
package installs without it and ``mapact._kernels`` uses the pure-Python code.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MAPACT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "mapact._kernels._ckernels",
                    ["src/mapact/_kernels/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    language="c++",
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
