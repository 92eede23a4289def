"""Adaptive BerHu penalized regression with least-squares or Huber loss."""

__version__ = "0.1.0"
