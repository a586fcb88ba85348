"""Build script: compiles the optional Cython solver kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize
    import numpy as np

    ext_modules = cythonize(
        [
            Extension(
                "edgeoffload.kernels._fast",
                ["src/edgeoffload/kernels/_fast.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"edgeoffload: skipping Cython extension ({exc}); pure-numpy kernel will be used")

setup(ext_modules=ext_modules)
