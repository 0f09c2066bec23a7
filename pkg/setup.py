"""Build script: compiles the optional Cython fast path.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so a failed compile only costs speed. Set
DPPDYN_NO_EXT=1 to skip the extension build entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible; warn and continue otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the dppdyn._cholcore extension failed ({exc}); "
            "falling back to the pure NumPy implementation.",
            file=sys.stderr,
        )


def extensions():
    if os.environ.get("DPPDYN_NO_EXT") == "1":
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("WARNING: Cython not available; skipping dppdyn._cholcore.", file=sys.stderr)
        return []
    ext = Extension(
        "dppdyn._cholcore",
        ["src/dppdyn/_cholcore.pyx"],
        extra_compile_args=["-O3"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
