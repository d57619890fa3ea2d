"""Build script.

The scheduler hot loop ships both as a Cython extension and as a pure-Python
twin (lamasim._sched_ref). The extension is optional: if Cython or a C
compiler is missing the install still succeeds and the package falls back to
the pure implementation at import time.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension(
            "lamasim._sched_core",
            ["src/lamasim/_sched_core.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
