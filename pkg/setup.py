import os
import sys

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("FEATADMM_NO_EXTENSION", "").strip() not in ("1", "true", "yes"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "featadmm._inner_loops",
                    ["src/featadmm/_inner_loops.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        print(
            "Cython/numpy not available at build time; "
            "installing with the pure-python backend only",
            file=sys.stderr,
        )

setup(ext_modules=ext_modules)
