import numpy
from setuptools import Extension, setup

# The compiled diffusion kernel is optional: without Cython (or a C compiler)
# the package installs anyway and lidarseg.kernel falls back to scipy.
try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "lidarseg._diffusion_kernel",
                ["src/lidarseg/_diffusion_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
