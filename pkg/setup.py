"""Build script: compiles the boundary-integral kernel extension.

The extension is optional; if compilation fails the package falls back to
the pure-NumPy kernels at import time.  Build in place with

    python setup.py build_ext --inplace
"""

import numpy
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Try to build the C extension, fall back to pure Python on failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"WARNING: C extension build failed ({exc}); "
                  "patchdyn will use the pure-Python kernels.")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"WARNING: building {ext.name} failed ({exc}); "
                  "patchdyn will use the pure-Python kernels.")


extensions = [
    Extension(
        "patchdyn._core",
        sources=["src/patchdyn/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffast-math", "-march=native"],
        # gcc auto-vectorizes log/atan2 through libmvec with -ffast-math
        libraries=["mvec", "m"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

try:
    from Cython.Build import cythonize
    ext_modules = cythonize(extensions, language_level=3)
except ImportError:
    print("WARNING: Cython not available; skipping the compiled kernels.")
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
