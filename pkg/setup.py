import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; ecko._backend falls back
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("ECKO_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "ecko._kernels",
                ["src/ecko/_kernels.pyx"],
                include_dirs=[np.get_include()],
                language="c++",
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
