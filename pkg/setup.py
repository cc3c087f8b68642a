import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

openmp = ["-fopenmp"]

extensions = [
    Extension(
        "acorsis._kernels",
        ["src/acorsis/_kernels.pyx"],
        include_dirs=[numpy.get_include(), "src/acorsis"],
        extra_compile_args=["-O3", "-march=native", "-ffp-contract=off"] + openmp,
        extra_link_args=openmp,
        optional=True,
    ),
]

setup(ext_modules=cythonize(extensions, language_level=3))
