import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "rwass._kernels",
                ["src/rwass/_kernels.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # The package still works without the compiled core: rwass._backend
    # falls back to the pure numpy kernels.
    ext_modules = []

setup(ext_modules=ext_modules)
