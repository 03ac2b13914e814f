"""Deterministic equivalents of sample-covariance resolvents.

Submodules:
  ensembles  random matrices with independent, bounded-law columns
  resolvent  per-draw spectral objects and exact identities
  detequiv   the self-consistent deterministic equivalent and oracles
  spectral   density recovery and contour-integral projector estimates
  verify     Monte Carlo concentration harness
  cli        command line front end

Attribute access is lazy so that the CLI can configure BLAS threading
before numpy loads.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "cli",
    "config",
    "detequiv",
    "ensembles",
    "errors",
    "matio",
    "resolvent",
    "rng",
    "spectral",
    "suites",
    "verify",
)


def __getattr__(name: str):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
