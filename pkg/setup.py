import numpy
from setuptools import Extension, setup

ext = Extension(
    "cbmengine._kernels._ckernels",
    ["src/cbmengine/_kernels/_ckernels.pyx"],
    include_dirs=[numpy.get_include()],
    extra_compile_args=["-O3"],
    optional=True,  # pure-Python fallback is selected at import when the build is unavailable
)

try:
    from Cython.Build import cythonize

    ext_modules = cythonize([ext], language_level=3)
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
