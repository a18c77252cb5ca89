import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-numpy install; wavefront falls back at import
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("WAVEFRONT_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "wavefront._kernels",
                ["src/wavefront/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no fast-math / contraction: draws must match the numpy fallback bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
