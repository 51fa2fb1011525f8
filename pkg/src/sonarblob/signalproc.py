"""Chirp replicas, matched filtering, peak picking and per-echo spectra.

Ranges are one-way: a matched-filter lag of ``k`` samples maps to
``r = c * (k / fs) / 2``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy import signal

from .errors import ParameterError

DEFAULT_BINS = 100


@dataclass(frozen=True)
class ChirpSpec:
    """Linear-FM pulse parameters.

    ``f_min == f_max`` is accepted and yields a pure tone; everything that
    needs a frequency band (spectra, interference region) rejects it.
    """

    f_min: float = 7_000.0
    f_max: float = 17_000.0
    duration: float = 0.010
    sample_rate: float = 192_000.0
    sound_speed: float = 1500.0

    def __post_init__(self):
        if not (self.f_min > 0 and self.f_min <= self.f_max):
            raise ParameterError(f"need 0 < f_min <= f_max, got {self.f_min}, {self.f_max}")
        if self.duration <= 0:
            raise ParameterError("chirp duration must be positive")
        if self.sample_rate <= 2 * self.f_max:
            raise ParameterError(
                f"sample_rate {self.sample_rate} does not exceed Nyquist for f_max {self.f_max}"
            )
        if self.sound_speed <= 0:
            raise ParameterError("sound speed must be positive")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sample_rate))

    def lag_to_range(self, lag):
        return lag_to_range(lag, self.sample_rate, self.sound_speed)

    def range_to_lag(self, r):
        return range_to_lag(r, self.sample_rate, self.sound_speed)


@dataclass(frozen=True)
class PingRecord:
    ping_index: int
    samples: np.ndarray
    sample_rate: float
    segment_duration: float

    def __post_init__(self):
        if self.ping_index < 1:
            raise ParameterError("ping_index is 1-based")
        expected = int(round(self.segment_duration * self.sample_rate))
        if len(self.samples) != expected:
            raise ParameterError(
                f"ping {self.ping_index}: {len(self.samples)} samples, expected {expected}"
            )

    @classmethod
    def from_samples(cls, ping_index: int, samples, sample_rate: float) -> "PingRecord":
        samples = np.asarray(samples, dtype=float)
        return cls(ping_index, samples, sample_rate, len(samples) / sample_rate)


@dataclass
class EchoPoint:
    """A single thresholded matched-filter detection."""

    range_m: float
    ping: int
    mf_value: float
    spectrum: np.ndarray | None = None
    entropy: float = float("nan")

    def __post_init__(self):
        if self.range_m < 0:
            raise ParameterError("range must be non-negative")


@dataclass
class PointCloud:
    """Column-oriented storage for the points of one block of pings."""

    ranges: np.ndarray
    pings: np.ndarray
    mf_values: np.ndarray
    spectra: np.ndarray
    entropies: np.ndarray
    lags: np.ndarray = field(default=None)

    def __post_init__(self):
        self.ranges = np.asarray(self.ranges, dtype=float)
        self.pings = np.asarray(self.pings, dtype=int)
        self.mf_values = np.asarray(self.mf_values, dtype=float)
        self.entropies = np.asarray(self.entropies, dtype=float)
        n = len(self.ranges)
        spectra = np.asarray(self.spectra, dtype=float)
        if spectra.ndim != 2 or len(spectra) != n:
            spectra = spectra.reshape(n, -1)
        self.spectra = spectra
        if self.lags is None:
            self.lags = np.full(n, -1, dtype=int)
        for name in ("pings", "mf_values", "entropies", "lags"):
            if len(getattr(self, name)) != n:
                raise ParameterError(f"point cloud column {name!r} has wrong length")

    def __len__(self):
        return len(self.ranges)

    @classmethod
    def empty(cls, n_bins: int = DEFAULT_BINS) -> "PointCloud":
        return cls(np.zeros(0), np.zeros(0, int), np.zeros(0), np.zeros((0, n_bins)), np.zeros(0))

    @classmethod
    def from_points(cls, points: Sequence[EchoPoint]) -> "PointCloud":
        if not points:
            return cls.empty()
        spectra = [p.spectrum if p.spectrum is not None else np.zeros(0) for p in points]
        width = max(len(s) for s in spectra)
        spec = np.zeros((len(points), width))
        for i, s in enumerate(spectra):
            spec[i, : len(s)] = s
        return cls(
            [p.range_m for p in points],
            [p.ping for p in points],
            [p.mf_value for p in points],
            spec,
            [p.entropy for p in points],
        )

    def to_points(self) -> list[EchoPoint]:
        return [
            EchoPoint(float(r), int(p), float(v), s.copy(), float(h))
            for r, p, v, s, h in zip(self.ranges, self.pings, self.mf_values, self.spectra, self.entropies)
        ]


def lag_to_range(lag, sample_rate: float, sound_speed: float):
    return sound_speed * (np.asarray(lag, dtype=float) / sample_rate) / 2.0


def range_to_lag(r, sample_rate: float, sound_speed: float):
    return np.rint(2.0 * np.asarray(r, dtype=float) / sound_speed * sample_rate).astype(int)


def make_chirp(spec: ChirpSpec) -> np.ndarray:
    """Unit-amplitude linear-FM sweep from ``f_min`` to ``f_max``.

    Returns ``round(duration * sample_rate)`` samples of
    ``cos(2 pi (f_min t + k t^2 / 2))`` with sweep rate
    ``k = (f_max - f_min) / duration``.
    """
    t = np.arange(spec.n_samples) / spec.sample_rate
    rate = (spec.f_max - spec.f_min) / spec.duration
    return np.cos(2 * np.pi * (spec.f_min * t + 0.5 * rate * t * t))


def matched_filter(ping: PingRecord | np.ndarray, replica: np.ndarray) -> np.ndarray:
    """Normalized cross-correlation magnitude of a record against a replica.

    ``out[k] = |sum_j x[k + j] r[j]| / (||x|| ||r||)`` for ``k = 0 .. n-1``,
    with the record zero-extended past its end. Values lie in [0, 1] and are
    unchanged by rescaling either input.
    """
    x = ping.samples if isinstance(ping, PingRecord) else np.asarray(ping, dtype=float)
    replica = np.asarray(replica, dtype=float)
    n, m = len(x), len(replica)
    if m == 0 or m >= n:
        raise ParameterError(f"replica length {m} must be positive and shorter than record ({n})")
    norm = np.linalg.norm(x) * np.linalg.norm(replica)
    if norm == 0:
        return np.zeros(n)
    full = signal.correlate(x, replica, mode="full", method="fft")
    return np.abs(full[m - 1 : m - 1 + n]) / norm


def peak_lags(mf_out: np.ndarray, eta_mf: float, merge_radius: int) -> np.ndarray:
    """Lags of local maxima above ``eta_mf`` after greedy merging.

    Within any ``merge_radius`` neighbourhood only the strongest peak
    survives (``scipy.signal.find_peaks`` distance rule).
    """
    if eta_mf <= 0:
        raise ParameterError("eta_mf must be positive")
    mf_out = np.asarray(mf_out, dtype=float)
    # pad so the first and last samples can be maxima too
    padded = np.concatenate([[-np.inf], mf_out, [-np.inf]])
    peaks, _ = signal.find_peaks(padded, height=eta_mf, distance=max(int(merge_radius), 1))
    peaks = peaks - 1
    return peaks[mf_out[peaks] > eta_mf]


def threshold_detect(
    mf_out: np.ndarray,
    eta_mf: float,
    ping: int,
    *,
    merge_radius: int,
    sample_rate: float,
    sound_speed: float,
) -> list[EchoPoint]:
    """Echo points for the merged matched-filter peaks exceeding ``eta_mf``.

    Spectra and entropies are left unfilled; see :func:`extract_spectrum`.
    """
    lags = peak_lags(mf_out, eta_mf, merge_radius)
    ranges = lag_to_range(lags, sample_rate, sound_speed)
    return [EchoPoint(float(r), int(ping), float(mf_out[k])) for r, k in zip(ranges, lags)]


@lru_cache(maxsize=64)
def _bin_layout(n_window: int, sample_rate: float, f_min: float, f_max: float, n_bins: int):
    # zero-pad so each output bin collects several FFT lines
    n_fft = int(2 ** np.ceil(np.log2(8 * n_window)))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)
    inside = np.flatnonzero((freqs >= f_min) & (freqs <= f_max))
    idx = np.floor((freqs[inside] - f_min) / (f_max - f_min) * n_bins).astype(int)
    idx = np.minimum(idx, n_bins - 1)
    return n_fft, inside, idx


def _binned_power(windows: np.ndarray, spec: ChirpSpec, n_bins: int) -> np.ndarray:
    if spec.f_min >= spec.f_max:
        raise ParameterError("spectrum extraction needs f_min < f_max")
    if n_bins < 1:
        raise ParameterError("need at least one spectrum bin")
    n_fft, inside, idx = _bin_layout(windows.shape[1], spec.sample_rate, spec.f_min, spec.f_max, n_bins)
    power = np.abs(np.fft.rfft(windows, n=n_fft, axis=1)[:, inside]) ** 2
    out = np.zeros((windows.shape[0], n_bins))
    for row, p in zip(out, power):
        row[:] = np.bincount(idx, weights=p, minlength=n_bins)
    total = out.sum(axis=1, keepdims=True)
    flat = total[:, 0] <= 0
    out[flat] = 1.0
    total[flat] = n_bins
    return out / total


def extract_spectra(samples: np.ndarray, lags: np.ndarray, spec: ChirpSpec, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Normalized in-band power spectra of ``duration``-long windows at ``lags``.

    Returns an array of shape ``(len(lags), n_bins)`` whose rows sum to one.
    Windows running past the record end are zero-padded with a warning; an
    all-zero window yields a uniform spectrum.
    """
    samples = np.asarray(samples, dtype=float)
    lags = np.asarray(lags, dtype=int)
    n_win = spec.n_samples
    if len(lags) == 0:
        return np.zeros((0, n_bins))
    if np.any(lags < 0):
        raise ParameterError("negative lag")
    n = len(samples)
    if np.any(lags + n_win > n):
        warnings.warn("spectrum window truncated at record end; zero-padding", RuntimeWarning, stacklevel=2)
        samples = np.concatenate([samples, np.zeros(int(lags.max()) + n_win - n)])
    windows = samples[lags[:, None] + np.arange(n_win)[None, :]]
    return _binned_power(windows, spec, n_bins)


def extract_spectrum(ping: PingRecord, point: EchoPoint, spec: ChirpSpec, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Spectrum of the window starting at the point's two-way delay."""
    lag = range_to_lag(point.range_m, spec.sample_rate, spec.sound_speed)
    return extract_spectra(ping.samples, np.array([lag]), spec, n_bins)[0]


def spectral_entropy(z: np.ndarray) -> float | np.ndarray:
    """Shannon entropy in bits of a normalized spectrum.

    Works on the last axis, so a 2-D array gives one entropy per row.
    Zero bins contribute nothing.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ParameterError("spectrum has negative entries")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(z > 0, -z * np.log2(np.where(z > 0, z, 1.0)), 0.0)
    h = terms.sum(axis=-1)
    return float(h) if np.ndim(h) == 0 else h


def interference_region(f_min: float, f_max: float, sound_speed: float = 1500.0) -> tuple[float, float]:
    """Object sizes (m) whose echoes fall in the interference regime.

    Uses the empirical fish bounds ``0.7 <= l / lambda <= 200`` evaluated at
    the band edges: ``l_min = 0.7 c / f_min`` and ``l_max = 200 c / f_max``.
    """
    if f_min <= 0 or f_max <= 0:
        raise ParameterError("frequencies must be positive")
    if f_min >= f_max:
        raise ParameterError("need f_min < f_max")
    return 0.7 * sound_speed / f_min, 200.0 * sound_speed / f_max


def build_point_cloud(
    pings: Sequence[PingRecord],
    spec: ChirpSpec,
    eta_mf: float,
    n_bins: int = DEFAULT_BINS,
    replica: np.ndarray | None = None,
) -> PointCloud:
    """Matched filter, peak-pick and characterize every ping of a block."""
    if not pings:
        return PointCloud.empty(n_bins)
    if replica is None:
        replica = make_chirp(spec)
    cols = {k: [] for k in ("ranges", "pings", "mf", "spectra", "lags")}
    for ping in pings:
        if ping.sample_rate != spec.sample_rate:
            raise ParameterError(f"ping {ping.ping_index} sample rate differs from chirp spec")
        mf = matched_filter(ping, replica)
        lags = peak_lags(mf, eta_mf, len(replica))
        cols["lags"].append(lags)
        cols["ranges"].append(lag_to_range(lags, spec.sample_rate, spec.sound_speed))
        cols["pings"].append(np.full(len(lags), ping.ping_index))
        cols["mf"].append(mf[lags])
        cols["spectra"].append(extract_spectra(ping.samples, lags, spec, n_bins))
    spectra = np.concatenate(cols["spectra"]).reshape(-1, n_bins)
    return PointCloud(
        np.concatenate(cols["ranges"]),
        np.concatenate(cols["pings"]),
        np.concatenate(cols["mf"]),
        spectra,
        spectral_entropy(spectra) if len(spectra) else np.zeros(0),
        np.concatenate(cols["lags"]),
    )
