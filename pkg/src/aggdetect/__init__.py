"""Multilingual aggression-detection workbench.

Builds raw, semi-noisy (augmentation-balanced), and fully machine-
translated comment corpora, trains six classifier families on them, and
compares the results with precision/recall/F1/accuracy reports.
"""

__version__ = "0.1.0"
