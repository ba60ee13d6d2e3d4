import numpy as np
from setuptools import Extension, setup

# The compiled kernels are optional: the package falls back to the pure
# NumPy implementations in fracmild._kernels_py when the extension is
# missing (see fracmild.backend).
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "fracmild._fastkernels",
                ["src/fracmild/_fastkernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
