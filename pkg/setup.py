"""Build hook for the optional compiled enumeration kernel.

The package works without the extension (a pure-Python kernel is selected at
import time), so a failed compile only costs speed. Set LOOPBP_PURE=1 to skip
building it entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
cmdclass = {}

if os.environ.get("LOOPBP_PURE") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools.command.build_ext import build_ext

        class optional_build_ext(build_ext):
            def run(self):
                try:
                    super().run()
                except Exception as exc:
                    print(f"warning: compiled kernel skipped ({exc})")

            def build_extension(self, ext):
                try:
                    super().build_extension(ext)
                except Exception as exc:
                    print(f"warning: {ext.name} skipped ({exc})")

        ext_modules = cythonize(
            [
                Extension(
                    "loopbp._loopcore",
                    ["src/loopbp/_loopcore.pyx"],
                    language="c++",
                    extra_compile_args=["-O3"],
                )
            ],
            language_level="3",
        )
        cmdclass["build_ext"] = optional_build_ext
    except ImportError:
        pass

setup(ext_modules=ext_modules, cmdclass=cmdclass)
