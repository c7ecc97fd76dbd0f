"""nsi3d - volumetric null subtraction imaging workbench for multiplexed matrix arrays."""

__version__ = "0.1.0"
