"""Build script: compiles the optional fast interpreter kernel.

The package works without the extension (a pure-Python twin is selected at
import time), so build failures here are tolerated.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy

    extensions = cythonize(
        [
            Extension(
                "qnnverify._kernel",
                ["src/qnnverify/_kernel.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
