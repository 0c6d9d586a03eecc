"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-Python twin of the kernels
is selected at import time); building it just makes the hot loops fast.
`-ffp-contract=off` keeps the compiled arithmetic bit-identical to the
pure-Python fallback, which the simulation determinism tests rely on.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - source dists ship pre-cythonized C
    cythonize = None

extensions = [
    Extension(
        "nlobs._kernels._core",
        sources=["src/nlobs/_kernels/_core.pyx"],
        extra_compile_args=["-O2", "-ffp-contract=off"],
        optional=True,
    )
]

if cythonize is not None:
    extensions = cythonize(extensions, language_level="3")

setup(ext_modules=extensions)
