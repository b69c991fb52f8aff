"""Build the optional Cython kernels; the package works without them."""
from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("grainmorph._ckernels", ["src/grainmorph/_ckernels.pyx"],
                   include_dirs=[np.get_include()],
                   # no -ffast-math: the predicate error bounds need IEEE rounding
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
