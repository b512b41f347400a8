import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # the pure-Python fallback is used at runtime
    cythonize = None

ext_modules = []
if cythonize is not None and os.environ.get("DYNBRIDGE_NO_EXT") != "1":
    ext_modules = cythonize(
        [Extension("dynbridge._core", ["src/dynbridge/_core.pyx"], extra_compile_args=["-O2"])],
        language_level=3,
    )

setup(ext_modules=ext_modules)
