import numpy as np
from setuptools import Extension, setup

ext = Extension(
    "anisolab._kernels",
    ["src/anisolab/_kernels.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    extra_compile_args=["-O3"],
    optional=True,
)

try:
    from Cython.Build import cythonize

    ext_modules = cythonize([ext], compiler_directives={"language_level": "3"})
except Exception as exc:  # the numpy backend is used instead
    print(f"warning: compiled kernels disabled ({exc})")
    ext_modules = []

setup(ext_modules=ext_modules)
