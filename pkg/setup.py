import os

from setuptools import setup

ext_modules = []
if not os.environ.get("RETF_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("retf._kernels", ["src/retf/_kernels.pyx"], include_dirs=[np.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
            language_level=3,
        )
    except ImportError:
        # no Cython/numpy at build time: the package falls back to the numpy kernels
        ext_modules = []

setup(ext_modules=ext_modules)
