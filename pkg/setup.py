"""Build script for the compiled sampling kernel.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed extension build degrades gracefully rather than
blocking installation.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "eqstop._kernels._core",
                ["src/eqstop/_kernels/_core.pyx"],
                # -ffp-contract=off: keep float ops un-fused so the compiled
                # kernel matches the NumPy fallback operation for operation.
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
