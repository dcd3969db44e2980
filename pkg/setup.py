"""Optional compiled kernel; the package falls back to numpy when it is absent."""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("OPTOMO_NO_EXT"):
    try:
        import numpy  # noqa: F401
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("optomo._kernels", ["src/optomo/_kernels.pyx"], extra_compile_args=["-O3"])],
            language_level=3,
        )

setup(ext_modules=ext_modules)
