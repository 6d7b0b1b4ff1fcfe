"""Time-domain statistical features of a startup-current window.

Five dimensional features (mean index, RMS, RSS, peak-to-peak, energy) and
eight non-dimensional ones (shape, impulsion, crest, margin, peak-to-average
power ratio, variance, skewness, kurtosis). Definitions follow the textbook
condition-monitoring forms, with two quirks kept on purpose:

* ``peak_avg_power_ratio`` uses the signed maximum ``max(x)``, not ``max|x|``.
* ``variance`` uses the ``N - 1`` divisor, while the standard deviation that
  normalises skewness and kurtosis uses ``N``.
"""

from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import DegenerateSignal, EmptySignal

FEATURE_NAMES = (
    "mean_index",
    "rms",
    "rss",
    "peak_peak",
    "energy",
    "shape_factor",
    "impulsion",
    "crest_factor",
    "margin_factor",
    "peak_avg_power_ratio",
    "variance",
    "skewness",
    "kurtosis",
)
DIMENSIONAL = FEATURE_NAMES[:5]
NONDIMENSIONAL = FEATURE_NAMES[5:]


@dataclass(frozen=True)
class FeatureVector:
    mean_index: float
    rms: float
    rss: float
    peak_peak: float
    energy: float
    shape_factor: float
    impulsion: float
    crest_factor: float
    margin_factor: float
    peak_avg_power_ratio: float
    variance: float
    skewness: float
    kurtosis: float

    def as_array(self):
        return np.array(astuple(self), dtype=float)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_array(cls, values):
        values = [float(v) for v in values]
        if len(values) != len(FEATURE_NAMES):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {len(values)}")
        return cls(*values)


def _as_samples(x, min_len):
    x = np.asarray(x, dtype=float).ravel()
    if x.size < min_len:
        raise EmptySignal(f"need at least {min_len} samples, got {x.size}")
    return x


def std_dev(x):
    """Population standard deviation (divisor N), computed in two passes."""
    x = _as_samples(x, 1)
    centered = x - x.mean()
    return float(np.sqrt(np.mean(centered * centered)))


def dimensional_features(x):
    """Return ``(mean_index, rms, rss, peak_peak, energy)``."""
    x = _as_samples(x, 2)
    squares = x * x
    energy = float(squares.sum())
    mean = float(x.mean())
    rms = float(np.sqrt(energy / x.size))
    rss = float(np.sqrt(np.abs(squares).sum()))
    peak_peak = float(x.max() - x.min())
    return mean, rms, rss, peak_peak, energy


def nondimensional_features(x):
    """Return the eight non-dimensional features in canonical order.

    ``(shape_factor, impulsion, crest_factor, margin_factor,
    peak_avg_power_ratio, variance, skewness, kurtosis)``

    Raises DegenerateSignal for an all-zero signal (mean absolute value 0)
    and for a constant signal (zero standard deviation).
    """
    x = _as_samples(x, 2)
    n = x.size
    abs_x = np.abs(x)
    mean_abs = float(abs_x.mean())
    if mean_abs == 0.0:
        raise DegenerateSignal("all-zero signal: mean absolute value is 0")
    mean = float(x.mean())
    centered = x - mean
    sq = centered * centered
    sigma = float(np.sqrt(sq.mean()))
    if sigma == 0.0:
        raise DegenerateSignal("constant signal: standard deviation is 0")

    rms = float(np.sqrt(np.mean(x * x)))
    peak = float(abs_x.max())
    root_mean = float(np.mean(np.sqrt(abs_x)))

    shape = rms / mean_abs
    impulsion = peak / mean_abs
    crest = peak / rms
    margin = peak / root_mean**2
    par = float(x.max()) ** 2 / rms**2
    variance = float(sq.sum()) / (n - 1)
    skewness = float(np.mean(sq * centered)) / sigma**3
    kurtosis = float(np.mean(sq * sq)) / sigma**4
    return shape, impulsion, crest, margin, par, variance, skewness, kurtosis


def extract_features(sig):
    """Compute all 13 features of a preprocessed window.

    Accepts a SignalRecord or a bare sample sequence.
    """
    samples = getattr(sig, "samples", sig)
    return FeatureVector(*dimensional_features(samples), *nondimensional_features(samples))
