"""Build the optional compiled MLP kernel.

The extension is optional: if Cython or a C compiler is missing the package
installs anyway and ``egan.kernels`` falls back to the numpy implementation.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("EGAN_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "egan._mlp",
                    ["src/egan/_mlp.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
