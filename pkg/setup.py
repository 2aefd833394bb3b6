"""Build the optional compiled QP kernel; the package works without it."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("PRIORLASSO_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "priorlasso._active_set_ext",
                    ["src/priorlasso/_active_set_ext.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
