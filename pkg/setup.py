"""Build hook for the compiled simulation kernel.

The package works without the extension (a pure-Python loop is selected at
import time), so a missing Cython or compiler only costs speed.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "cbfsim._fastloop",
                ["src/cbfsim/_fastloop.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                # fp-contract off: the kernel must round exactly like the
                # pure loop's numpy ops, so no fused multiply-adds.
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as exc:  # pragma: no cover - build environment dependent
    print(f"cbfsim: building without the compiled kernel ({exc})")

setup(ext_modules=ext_modules)
