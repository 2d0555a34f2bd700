"""Bayesian nonparametric likelihood ratios for rare type matches."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("rare-type-lr")
except PackageNotFoundError:
    __version__ = "0.0.0"
