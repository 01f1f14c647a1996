"""DacLin: current-steering DAC simulator and neural-network pre-distortion toolkit.

The package models static current-source mismatch of a segmented DAC,
identifies its transfer characteristic from low-frequency captures, inverts
it into a pre-distortion LUT and measures the result on two-tone spectra.
"""

# The version here is a copy: pyproject.toml is the source, and
# `python tools/version.py <new version>` writes both.
__version__ = "0.1.0"
