"""HTTP service wrapping the scoring and evaluation pipeline."""
