"""Classification, spectra and completeness diagnostics for two-point
boundary value problems of first-order ODE systems on [0, 1]."""

__version__ = "0.1.0"
