"""Broken rotor bar detection from LS-PMSM startup current: synthetic
signals, time-domain features, a from-scratch random forest, baseline
classifiers and a cross-validated evaluation harness."""

__version__ = "0.1.0"
