"""Build hook for the optional compiled placement kernel.

The package is fully functional without the extension; tailtrim.placement
falls back to the pure-Python implementation when the compiled module is
missing (or when TAILTRIM_PURE=1 is set).
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "tailtrim._placement_cy",
                ["src/tailtrim/_placement_cy.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    # No Cython available: install pure-Python only.
    pass

setup(ext_modules=ext_modules)
