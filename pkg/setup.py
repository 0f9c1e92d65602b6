"""Builds the optional compiled convolution kernel.

The package works without it: fedhar.kernels falls back to the NumPy
implementation when the extension is absent.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "fedhar.kernels._native",
                ["src/fedhar/kernels/_native.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
