"""l0-penalized least squares with momentum-accelerated hard thresholding."""

__version__ = "0.1.0"
