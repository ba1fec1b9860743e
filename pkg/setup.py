"""Build script: compiles the optional time-stepping extension.

The package is fully functional without the extension (a NumPy/SciPy
fallback is selected at import); set LOGKG_NO_EXTENSION=1 to skip the
compile step entirely.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("LOGKG_NO_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "logkg.kernels._speedups",
                    ["src/logkg/kernels/_speedups.pyx"],
                    # -ffp-contract=off keeps the kernels bit-compatible with
                    # the NumPy fallback (no FMA contraction).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
