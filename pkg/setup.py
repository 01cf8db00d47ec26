import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SZEGOKIT_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "szegokit._backend._fastpoly",
                    ["src/szegokit/_backend/_fastpoly.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level="3",
        )
    except ImportError:
        # Pure-python backend is selected at import time when the
        # extension is missing; the package stays installable.
        ext_modules = []

setup(ext_modules=ext_modules)
