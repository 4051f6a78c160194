"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a NumPy fallback
is selected at import time); the build is therefore marked optional so
that a missing compiler degrades to the pure-Python wheel instead of
failing. -ffp-contract=off keeps the C arithmetic bit-identical to the
Python reference (no fused multiply-add contraction).
"""

from pathlib import Path

from setuptools import Extension, setup

PYX = Path(__file__).parent / "src" / "condwalk" / "_kernels" / "_core.pyx"

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # pure-python install path
    ext_modules = []
else:
    if PYX.exists():
        ext_modules = cythonize(
            [
                Extension(
                    "condwalk._kernels._core",
                    [str(PYX.relative_to(Path(__file__).parent))],
                    include_dirs=[numpy.get_include()],
                    define_macros=[
                        ("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")
                    ],
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    optional=True,
                )
            ],
            language_level=3,
        )
    else:
        ext_modules = []

setup(ext_modules=ext_modules)
