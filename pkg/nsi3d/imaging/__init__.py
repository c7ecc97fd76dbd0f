"""Imaging pipeline: geometry, apertures, sequences, simulation, beamforming, metrics."""
