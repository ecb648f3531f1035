from setuptools import setup

try:
    from Cython.Build import cythonize
except ImportError:  # the pure-Python kernel takes over at import time
    ext_modules = []
else:
    ext_modules = cythonize(
        ["src/lfbfs/_kernel/_ckernel.pyx"],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )

setup(ext_modules=ext_modules)
