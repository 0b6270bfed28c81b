"""CAR and SAR autoregressive covariance models on finite lattices."""

__version__ = "0.1.0"
