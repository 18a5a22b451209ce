"""Builds the optional compiled kernel core.

The package is fully functional without it: `rankforge.backend` falls back
to the numpy kernels when the extension is missing.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "rankforge.backend._kernels",
                ["src/rankforge/backend/_kernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
