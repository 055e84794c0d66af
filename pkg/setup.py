"""Build script for the optional compiled string kernels.

The package is pure Python except for ``causal_rag.kernels._ckernels``, a
small Cython extension accelerating the edit-distance and token-containment
hot loops. The extension is strictly optional: if Cython or a C compiler is
unavailable the build falls back to the pure-Python kernels and the installed
package selects the fallback at import time.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that degrades to the pure-Python kernels on any failure."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, broken toolchain, ...
            self._skip(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._skip(exc)

    @staticmethod
    def _skip(exc):
        sys.stderr.write(
            "warning: compiled kernels not built (%s); "
            "falling back to pure-Python kernels\n" % (exc,)
        )


def _extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        sys.stderr.write(
            "warning: Cython not available; building without compiled kernels\n"
        )
        return []
    return cythonize(
        [
            Extension(
                "causal_rag.kernels._ckernels",
                ["src/causal_rag/kernels/_ckernels.pyx"],
            )
        ],
        compiler_directives={"language_level": 3},
    )


setup(
    ext_modules=_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
