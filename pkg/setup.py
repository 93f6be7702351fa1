"""Build script: compiles the optional Cython step kernels.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile downgrades to a pure build instead of
aborting the install.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    # -ffp-contract=off: fused multiply-adds would round differently from
    # the numpy backend and break the bit-parity contract of the kernels
    extensions = cythonize(
        [
            Extension(
                "growthlab._kernels._speed",
                ["src/growthlab/_kernels/_speed.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    import warnings

    warnings.warn(f"building without compiled kernels: {exc}")
    extensions = []

setup(ext_modules=extensions)
