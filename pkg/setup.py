"""Build the optional Cython kernel module.

The package works without it; ``aevqc.kernels`` falls back to numpy when
``aevqc._kernels_c`` cannot be imported.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("AEVQC_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "aevqc._kernels_c",
                    ["src/aevqc/_kernels_c.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3", "-fopenmp"],
                    extra_link_args=["-fopenmp"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
