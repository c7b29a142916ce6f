import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; emvgc.qp falls back to numpy
    cythonize = None

compile_args = ["-O3"]
link_args = []
if os.environ.get("EMVGC_OPENMP", "1") == "1":
    compile_args.append("-fopenmp")
    link_args.append("-fopenmp")

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "emvgc._qp_kernel",
                ["src/emvgc/_qp_kernel.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=compile_args,
                extra_link_args=link_args,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
