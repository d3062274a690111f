"""Services layer - numerics, training and evaluation."""
