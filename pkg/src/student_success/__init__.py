"""Student-outcome prediction: synthetic cohorts, preprocessing, staged
multi-branch networks, baselines, metrics and attribution."""

__version__ = "0.1.0"
