"""Build script: compiles the optional Cython speedup kernels.

The package is fully functional without the extension (a pure-Python
fallback with identical semantics is selected at import time), so the
build degrades gracefully when Cython or a C compiler is unavailable.
"""

from setuptools import setup

try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "lgss._speedup",
                ["src/lgss/_speedup.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
