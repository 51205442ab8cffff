import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# Compiled stepping kernels.  The package also ships a pure-numpy fallback
# (trajqed._kernels.py_ref) selected at import time when this extension is
# missing, so a failed build still yields a working -- if slower -- install.
extensions = [
    Extension(
        "trajqed._kernels._core",
        ["src/trajqed/_kernels/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
