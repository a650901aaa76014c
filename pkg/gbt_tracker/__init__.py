"""Bearing-only AUV target tracking with Gaussian-process prediction and trajectory planning."""
