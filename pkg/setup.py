"""Build script for the optional compiled kernel-smoothing core.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes the sample-based estimation
path faster.  If Cython or a C compiler is missing the extension is skipped.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from setuptools import Extension
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "hetid.kernels._fastkern",
                ["src/hetid/kernels/_fastkern.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
