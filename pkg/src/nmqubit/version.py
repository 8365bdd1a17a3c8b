from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("nmqubit")
except PackageNotFoundError:
    # source checkout without an installed distribution
    __version__ = "0.0.0+unknown"
version = __version__
