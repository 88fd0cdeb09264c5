"""Photon blockade from atomic two-photon absorption in an optical cavity."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("nlblockade")
except PackageNotFoundError:  # source checkout without install
    __version__ = "0.0.0"
