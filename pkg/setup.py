"""Builds the optional compiled solver kernel.

The package works without it: squishgen._solver falls back to the pure-Python
kernel when the extension is absent.  -ffp-contract=off keeps the compiled
arithmetic bit-identical to the Python fallback (no FMA contraction).
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "squishgen._solver_cy",
                ["src/squishgen/_solver_cy.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
