import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; backend.py falls back to numpy
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("gdl._kernels", ["src/gdl/_kernels.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3", "-fcx-limited-range"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
