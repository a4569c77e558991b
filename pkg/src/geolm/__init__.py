"""geolm: desk-scale domain adaptation pipeline for a small language model."""

__version__ = "0.1.0"
