"""Synthetic LS-PMSM startup-current generator and 40-period windowing.

The generator is a deliberately simple caricature of a direct-on-line
startup: a sinusoid at the (jittered) supply frequency whose amplitude decays
exponentially from an inrush peak to the rated steady-state amplitude. A
broken rotor bar slows the run-up (longer time constant) and adds a decaying
sub-fundamental amplitude modulation. Starting load only stretches the
run-up time. Every record is a pure function of its seed.
"""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import ConfigError, InsufficientSignal, NoCrossings

# Run-up time corresponds to this many envelope time constants (~95% settled).
TIME_CONSTANTS_PER_SYNC = 3.0


class Condition(Enum):
    HEALTHY = "Healthy"
    FAULTY = "Faulty"

    @property
    def label(self):
        return int(self is Condition.FAULTY)


class Load(Enum):
    L0 = "L0"
    L0_5 = "L0_5"
    L1_0 = "L1_0"
    L1_5 = "L1_5"

    @property
    def newton_meters(self):
        return {"L0": 0.0, "L0_5": 0.5, "L1_0": 1.0, "L1_5": 1.5}[self.value]


@dataclass(frozen=True)
class SignalRecord:
    samples: np.ndarray
    sample_rate: float
    condition: Condition
    load: Load
    trial_id: int
    seed: int
    t0: float = 0.0  # timestamp of samples[0], seconds

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ConfigError(f"sample_rate must be positive, got {self.sample_rate}")
        if len(self.samples) == 0:
            raise ConfigError("samples must be non-empty")

    @property
    def times(self):
        return self.t0 + np.arange(len(self.samples)) / self.sample_rate


def _default_sync_times():
    return {Load.L0: 0.247, Load.L0_5: 0.2717, Load.L1_0: 0.2964, Load.L1_5: 0.3211}


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of the synthetic startup transient.

    ``sync_time_s`` maps each load level to its nominal run-up time. The
    ``*_spread`` fields are per-trial lognormal scatter (sigma of the log)
    so that records within a cell are not identical.
    """

    fundamental_hz: float = 50.0
    rated_current_a: float = 1.3
    sample_rate_hz: float = 5000.0
    startup_peak_multiple: float = 4.06
    sync_time_s: dict = field(default_factory=_default_sync_times)
    fault_sync_time_factor: float = 1.8
    fault_modulation_depth: float = 0.037
    fault_modulation_hz: float = 49.17
    fault_modulation_decay_s: float = 0.65
    fault_modulation_phase_rad: float = 0.0
    noise_std_a: float = 0.0062
    frequency_jitter_fraction: float = 0.005
    sync_time_spread: float = 0.112
    peak_multiple_spread: float = 0.071
    peak_sync_coupling: float = 0.27
    modulation_depth_spread: float = 0.54
    modulation_hz_spread: float = 0.0
    noise_std_spread: float = 0.26
    duration_periods: int = 48
    quantization_bits: int | None = None
    quantization_range_a: float = 25.0

    def validate(self):
        positive = {
            "fundamental_hz": self.fundamental_hz,
            "rated_current_a": self.rated_current_a,
            "sample_rate_hz": self.sample_rate_hz,
            "startup_peak_multiple": self.startup_peak_multiple,
            "fault_modulation_hz": self.fault_modulation_hz,
            "fault_modulation_decay_s": self.fault_modulation_decay_s,
            "quantization_range_a": self.quantization_range_a,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ConfigError(f"{name} must be > 0, got {value}")
        if self.startup_peak_multiple < 1:
            raise ConfigError("startup_peak_multiple must be >= 1")
        missing = set(Load) - set(self.sync_time_s)
        if missing:
            raise ConfigError(f"sync_time_s missing loads: {sorted(m.value for m in missing)}")
        if any(not t > 0 for t in self.sync_time_s.values()):
            raise ConfigError("sync times must be > 0")
        if not self.fault_sync_time_factor > 1:
            raise ConfigError("fault_sync_time_factor must be > 1")
        if not 0 <= self.fault_modulation_depth < 1:
            raise ConfigError("fault_modulation_depth must be in [0, 1)")
        if not 0 <= self.frequency_jitter_fraction <= 0.05:
            raise ConfigError("frequency_jitter_fraction must be in [0, 0.05]")
        spreads = (
            self.sync_time_spread,
            self.peak_multiple_spread,
            self.modulation_depth_spread,
            self.modulation_hz_spread,
            self.noise_std_spread,
        )
        if self.noise_std_a < 0 or min(spreads) < 0:
            raise ConfigError("noise and spread parameters must be >= 0")
        if self.duration_periods < 45:
            raise ConfigError("duration_periods must be >= 45")
        if self.quantization_bits is not None and self.quantization_bits < 2:
            raise ConfigError("quantization_bits must be >= 2")
        return self

    def to_dict(self):
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["sync_time_s"] = {load.value: t for load, t in self.sync_time_s.items()}
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "sync_time_s" in d:
            d["sync_time_s"] = {Load(k): float(v) for k, v in d["sync_time_s"].items()}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown generator options: {sorted(unknown)}")
        return cls(**d)

    def with_overrides(self, **kw):
        return replace(self, **kw)


@dataclass(frozen=True)
class TrialParams:
    """Per-record realisation of the random generator parameters."""

    frequency_hz: float
    tau_s: float
    peak_multiple: float
    modulation_depth: float
    modulation_hz: float
    noise_std: float


def draw_trial_params(cfg, condition, load, rng):
    jitter = rng.uniform(-cfg.frequency_jitter_fraction, cfg.frequency_jitter_fraction)
    # One latent draw stretches the run-up and, via the coupling, the inrush.
    z = cfg.sync_time_spread * rng.standard_normal()
    sync = cfg.sync_time_s[load] * np.exp(z)
    peak = 1.0 + (cfg.startup_peak_multiple - 1.0) * np.exp(
        cfg.peak_sync_coupling * z + cfg.peak_multiple_spread * rng.standard_normal()
    )
    noise = cfg.noise_std_a * np.exp(cfg.noise_std_spread * rng.standard_normal())
    depth_scale = np.exp(cfg.modulation_depth_spread * rng.standard_normal())
    # Sidebands follow the supply, so the modulation frequency drifts with it.
    mod_hz = (
        cfg.fault_modulation_hz
        * (1.0 + jitter)
        * np.exp(cfg.modulation_hz_spread * rng.standard_normal())
    )
    depth = 0.0
    if condition is Condition.FAULTY:
        sync *= cfg.fault_sync_time_factor
        depth = min(cfg.fault_modulation_depth * depth_scale, 0.95)
    return TrialParams(
        frequency_hz=cfg.fundamental_hz * (1.0 + jitter),
        tau_s=sync / TIME_CONSTANTS_PER_SYNC,
        peak_multiple=peak,
        modulation_depth=depth,
        modulation_hz=mod_hz,
        noise_std=noise,
    )


def waveform(t, params, cfg):
    """Noise-free current ``A(t) sin(2 pi f t) m(t)`` at times ``t``."""
    amp_ss = cfg.rated_current_a * np.sqrt(2.0)
    decay = np.exp(-np.maximum(t, 0.0) / params.tau_s)
    envelope = amp_ss * (1.0 + (params.peak_multiple - 1.0) * decay)
    mod_decay = np.exp(-np.maximum(t, 0.0) / cfg.fault_modulation_decay_s)
    modulation = 1.0 + params.modulation_depth * np.sin(
        2 * np.pi * params.modulation_hz * t + cfg.fault_modulation_phase_rad
    ) * mod_decay
    return envelope * np.sin(2 * np.pi * params.frequency_hz * t) * modulation


def _record_rng(seed, condition, load, trial_id):
    cond_key = 0 if condition is Condition.HEALTHY else 1
    load_key = list(Load).index(load)
    return np.random.default_rng([int(seed), cond_key, load_key, int(trial_id)])


def generate_signal(cfg, condition, load, trial_id, seed):
    """Simulate one raw startup record.

    Sampling starts one sample before energisation so the first rising zero
    crossing always lies inside the record.
    """
    cfg.validate()
    condition, load = Condition(condition), Load(load)
    rng = _record_rng(seed, condition, load, trial_id)
    params = draw_trial_params(cfg, condition, load, rng)

    fs = cfg.sample_rate_hz
    n = int(np.ceil(cfg.duration_periods * fs / params.frequency_hz)) + 2
    t = (np.arange(n) - 1) / fs
    x = waveform(t, params, cfg)
    if params.noise_std > 0:
        x = x + params.noise_std * rng.standard_normal(n)
    if cfg.quantization_bits is not None:
        x = quantize(x, cfg.quantization_bits, cfg.quantization_range_a)
    return SignalRecord(
        samples=x,
        sample_rate=fs,
        condition=condition,
        load=load,
        trial_id=int(trial_id),
        seed=int(seed),
        t0=float(t[0]),
    )


def quantize(x, bits, full_scale):
    """Uniform mid-tread quantisation over ``[-full_scale, full_scale]``."""
    step = 2.0 * full_scale / (2**bits - 1)
    return np.clip(np.round(x / step) * step, -full_scale, full_scale)


def derive_seed(seed, index):
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def generate_dataset(cfg, trials_per_cell=40, seed=0):
    """All (condition, load, trial) records, condition-major, load-minor."""
    if trials_per_cell < 1:
        raise ConfigError("trials_per_cell must be >= 1")
    cfg.validate()
    records = []
    for condition in Condition:
        for load in Load:
            for trial in range(trials_per_cell):
                sub_seed = derive_seed(seed, len(records))
                records.append(generate_signal(cfg, condition, load, trial, sub_seed))
    return records


def zero_crossings(x):
    """Sample indices nearest to each zero crossing, with crossing direction.

    Returns ``(indices, rising)`` arrays in time order. Zero counts as
    positive. A crossing between two samples is assigned to whichever sample
    lies nearer the linearly interpolated crossing point. The first and
    last samples also count as crossings when the line through their
    neighbour reaches zero within one sample outside the record; this keeps
    an already trimmed window stable under re-trimming.
    """
    x = np.asarray(x, dtype=float)
    neg = x < 0
    idx = np.flatnonzero(neg[:-1] != neg[1:])
    rising = neg[idx]
    a, b = x[idx], x[idx + 1]
    frac = a / (a - b)
    nearest = idx + (frac >= 0.5)

    if len(x) >= 2:
        step0 = x[1] - x[0]
        starts_rising = x[0] >= 0 and step0 > 0 and x[0] <= step0
        starts_falling = x[0] < 0 and step0 < 0 and -x[0] <= -step0
        if (starts_rising or starts_falling) and not (len(nearest) and nearest[0] == 0):
            nearest = np.concatenate([[0], nearest])
            rising = np.concatenate([[starts_rising], rising])
        last = len(x) - 1
        step1 = x[-1] - x[-2]
        ends_rising = x[-1] < 0 and step1 > 0 and -x[-1] <= step1
        ends_falling = x[-1] >= 0 and step1 < 0 and x[-1] <= -step1
        if (ends_rising or ends_falling) and not (len(nearest) and nearest[-1] == last):
            nearest = np.concatenate([nearest, [last]])
            rising = np.concatenate([rising, [ends_rising]])
    return nearest.astype(int), rising.astype(bool)


def preprocess(raw, periods=40):
    """Trim a record to ``periods`` whole cycles starting on a rising crossing.

    Periods are counted from the signal's own zero crossings, so supply
    frequency drift changes the window length rather than its cycle count.
    """
    x = np.asarray(raw.samples, dtype=float)
    if x.size < 2 or np.all(x == x[0]):
        raise NoCrossings(f"trial {raw.trial_id}: constant signal has no zero crossings")
    idx, rising = zero_crossings(x)
    if idx.size == 0:
        raise NoCrossings(f"trial {raw.trial_id}: no zero crossings found")
    first = np.flatnonzero(rising)
    if first.size == 0:
        raise NoCrossings(f"trial {raw.trial_id}: no rising zero crossing found")
    k = first[0]
    need = 2 * periods
    if k + need >= idx.size:
        found = (idx.size - 1 - k) // 2
        raise InsufficientSignal(
            f"trial {raw.trial_id}: need {periods} periods, found {found}"
        )
    start, stop = idx[k], idx[k + need]
    return replace(
        raw,
        samples=x[start : stop + 1].copy(),
        t0=raw.t0 + start / raw.sample_rate,
    )
