"""Frequency-domain neural acoustic field toolkit.

A coordinate network predicts complex attenuation and directional
re-emission spectra at points in a scene; a complex ray marcher renders
them into receiver frequency responses. Training uses a spectral loss
suite with a causality (Kramers-Kronig) regularizer; an analytic
image-source oracle provides ground truth at desk scale.
"""

from .errors import (
    DataError,
    FreqFieldError,
    InvalidConfigError,
    InvalidInputError,
    NumericalAbortError,
)
from .spectra import ComplexSpectrum, FrequencyGrid, ImpulseResponse

__version__ = "0.1.0"

__all__ = [
    "ComplexSpectrum",
    "FrequencyGrid",
    "ImpulseResponse",
    "FreqFieldError",
    "InvalidInputError",
    "InvalidConfigError",
    "DataError",
    "NumericalAbortError",
    "__version__",
]
