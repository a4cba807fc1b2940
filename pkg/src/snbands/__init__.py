"""Likelihood-ratio confidence bands for censored S-N fatigue models."""
