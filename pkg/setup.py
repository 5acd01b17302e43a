import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# GTSVRG_NO_OPENMP=1 builds the kernel without thread support.
openmp = [] if os.environ.get("GTSVRG_NO_OPENMP") else ["-fopenmp"]

extensions = [
    Extension(
        "gtsvrg._kernels",
        ["src/gtsvrg/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"] + openmp,
        extra_link_args=openmp,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
