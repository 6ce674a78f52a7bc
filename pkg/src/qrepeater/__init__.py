"""Entanglement-distribution rates for two-link quantum repeaters with decaying ensemble memories."""

from . import analytic, model
from .analytic import RateResult, edt_postselected, edt_two_link, rate
from .model import MemoryModel, Scheme, SchemeParams, load_preset

__version__ = "0.1.0"

__all__ = [
    "analytic",
    "model",
    "RateResult",
    "edt_postselected",
    "edt_two_link",
    "rate",
    "MemoryModel",
    "Scheme",
    "SchemeParams",
    "load_preset",
    "__version__",
]
