"""Discrete-time simulator for long-fiber Sagnac interferometers.

Rayleigh backscatter by periodic convolution, length-scaled phase noise,
pulse and burst patterning, SPAD Monte Carlo and the post-processing
chain (phase extraction, variance estimation, OTDR fits, burst timing
recovery, windowed visibility).
"""

__version__ = "0.1.0"
