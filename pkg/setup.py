import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension
except ImportError:
    print("Cython/numpy unavailable: installing the pure-Python fallback only", file=sys.stderr)
else:
    compile_args = [] if sys.platform == "win32" else ["-O3", "-ffp-contract=off"]
    ext_modules = cythonize(
        [
            Extension(
                "rsmatch._kernels._core",
                ["src/rsmatch/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=compile_args,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
