"""Build script for the optional Cython kernels.

The package works without them; ``lfretina.kernels`` falls back to numpy.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("LFRETINA_NO_EXT") != "1":
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
                    "lfretina._kernels_cy",
                    ["src/lfretina/_kernels_cy.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
