import glob
import os

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

here = os.path.dirname(os.path.abspath(__file__))

eigen_candidates = ["/usr/include/eigen3", "/usr/local/include/eigen3"]
eigen = next((p for p in eigen_candidates if os.path.isdir(p)), None)
include_dirs = [os.path.join(here, "include"), os.path.join(here, "vendor")]
if eigen:
    include_dirs.append(eigen)

ext = Pybind11Extension(
    "_rudi",
    sorted(glob.glob(os.path.join(here, "src", "*.cpp")))
    + [os.path.join(here, "python", "bindings.cpp")],
    include_dirs=include_dirs,
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
