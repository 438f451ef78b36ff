"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python fallback is selected
at import time); set SEQPROBE_SKIP_EXT=1 to skip compilation entirely.
-ffp-contract=off keeps the compiled kernels bit-identical to the fallback.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SEQPROBE_SKIP_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "seqprobe._kernels._ckernels",
                    ["src/seqprobe/_kernels/_ckernels.pyx"],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
