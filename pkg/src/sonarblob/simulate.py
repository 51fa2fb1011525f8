"""Seeded synthetic scenarios: random-walk target, random impulse response, clutter.

Every random quantity of a scenario is drawn from its own stream of
``numpy.random.SeedSequence(seed)``, so changing the SCR or the valid-ping
fraction of a scenario leaves its path, impulse response and clutter
untouched (common random numbers across sweep cells).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Protocol, Sequence

import numpy as np
from scipy import signal

from .errors import ParameterError
from .signalproc import ChirpSpec, PingRecord, make_chirp

IMPULSE_TAPS = 100

# SeedSequence child indices
_PATH, _IMPULSE, _VALID, _CLUTTER = range(4)


class ClutterSource(Protocol):
    sample_rate: float
    identifier: str

    def draw(self, rng: np.random.Generator, n_samples: int) -> np.ndarray: ...


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to generate a scenario except its seed."""

    n_pings: int = 20
    t_pri: float = 0.7
    segment_duration: float = 0.090
    sigma_n: float = 2.0
    scr_db: float = -9.0
    valid_fraction: float = 1.0
    impulse_taps: int = IMPULSE_TAPS
    additive: bool = False

    def __post_init__(self):
        if self.n_pings < 1:
            raise ParameterError("n_pings must be >= 1")
        if self.t_pri <= 0 or self.segment_duration <= 0:
            raise ParameterError("t_pri and segment_duration must be positive")
        if self.sigma_n < 0:
            raise ParameterError("sigma_n must be non-negative")
        if not 0.0 <= self.valid_fraction <= 1.0:
            raise ParameterError("valid_fraction must lie in [0, 1]")
        if self.impulse_taps < 1:
            raise ParameterError("impulse_taps must be >= 1")


@dataclass(frozen=True)
class Scenario:
    seed: int
    config: ScenarioConfig
    path: np.ndarray
    impulse: np.ndarray
    valid: np.ndarray
    has_target: bool
    clutter_source: str = "synthetic"

    @property
    def n_pings(self) -> int:
        return self.config.n_pings

    @property
    def valid_pings(self) -> np.ndarray:
        """1-based indices of pings that carry a target echo."""
        if not self.has_target:
            return np.zeros(0, dtype=int)
        return np.flatnonzero(self.valid) + 1

    def truth_dict(self) -> dict:
        return {
            "seed": int(self.seed),
            "has_target": bool(self.has_target),
            "path_m": [float(x) for x in self.path],
            "valid_pings": [int(p) for p in self.valid_pings],
            "scr_db": float(self.config.scr_db),
            "valid_fraction": float(self.config.valid_fraction),
            "clutter_source": self.clutter_source,
        }


def _streams(seed: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)]


def range_bounds(chirp: ChirpSpec, config: ScenarioConfig) -> tuple[float, float]:
    """Ranges whose whole echo (pulse plus impulse tail) fits after transmission."""
    lo = chirp.sound_speed * chirp.duration / 2
    tail = (chirp.duration + config.impulse_taps / chirp.sample_rate) * chirp.sound_speed / 2
    hi = chirp.sound_speed * config.segment_duration / 2 - tail
    if hi <= lo:
        raise ParameterError("segment too short to hold a target echo")
    return lo, hi


def reflect(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Fold values back into ``[lo, hi]`` by mirror reflection at the bounds."""
    width = hi - lo
    y = np.mod(np.asarray(x, dtype=float) - lo, 2 * width)
    return lo + np.where(y > width, 2 * width - y, y)


def gen_path(
    seed: int | np.random.Generator,
    n_pings: int,
    sigma_n: float,
    bounds: tuple[float, float],
) -> np.ndarray:
    """Gaussian random walk with a uniform start, reflected into ``bounds``."""
    if sigma_n < 0:
        raise ParameterError("sigma_n must be non-negative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lo, hi = bounds
    start = rng.uniform(lo, hi)
    steps = rng.normal(0.0, sigma_n, n_pings - 1) if sigma_n > 0 else np.zeros(n_pings - 1)
    # reflect step by step so the walk continues from the mirrored position
    path = np.empty(n_pings)
    path[0] = start
    for m, step in enumerate(steps, start=1):
        path[m] = reflect(path[m - 1] + step, lo, hi)
    return path


def gen_impulse(seed: int | np.random.Generator, taps: int = IMPULSE_TAPS) -> np.ndarray:
    """Uniform[-1, 1] taps scaled to unit Euclidean norm."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h = rng.uniform(-1.0, 1.0, taps)
    return h / np.linalg.norm(h)


def choose_valid(rng: np.random.Generator, n_pings: int, valid_fraction: float) -> np.ndarray:
    """Mask of ``round(valid_fraction * n_pings)`` pings chosen uniformly.

    The pings are taken from the front of one random permutation, so a lower
    fraction always selects a subset of a higher one.
    """
    order = rng.permutation(n_pings)
    mask = np.zeros(n_pings, dtype=bool)
    mask[order[: int(round(valid_fraction * n_pings))]] = True
    return mask


def make_scenario(
    seed: int,
    config: ScenarioConfig,
    chirp: ChirpSpec,
    has_target: bool = True,
    clutter_source: str = "synthetic",
) -> Scenario:
    path_rng, imp_rng, valid_rng, _ = _streams(seed)
    path = gen_path(path_rng, config.n_pings, config.sigma_n, range_bounds(chirp, config))
    impulse = gen_impulse(imp_rng, config.impulse_taps)
    valid = choose_valid(valid_rng, config.n_pings, config.valid_fraction)
    return Scenario(seed, config, path, impulse, valid, has_target, clutter_source)


def with_settings(scenario: Scenario, **changes) -> Scenario:
    """Same scenario (path, impulse, clutter) under a modified config."""
    config = replace(scenario.config, **changes)
    valid = scenario.valid
    if config.valid_fraction != scenario.config.valid_fraction:
        valid = choose_valid(_streams(scenario.seed)[_VALID], config.n_pings, config.valid_fraction)
    return replace(scenario, config=config, valid=valid)


def _band_power(x: np.ndarray, band: tuple[float, float] | None, sample_rate: float | None) -> float:
    x = np.asarray(x, dtype=float)
    if band is None:
        return float(np.mean(x * x))
    spec = np.abs(np.fft.rfft(x)) ** 2
    freqs = np.fft.rfftfreq(len(x), 1.0 / sample_rate)
    keep = (freqs >= band[0]) & (freqs <= band[1])
    # one-sided Parseval; DC and Nyquist lines are counted once
    weight = np.where((freqs == 0) | (freqs == sample_rate / 2), 1.0, 2.0)
    return float((weight[keep] * spec[keep]).sum() / len(x) ** 2)


def set_scr(
    target_window: np.ndarray,
    clutter_reference: np.ndarray,
    scr_db: float,
    band: tuple[float, float] | None = None,
    sample_rate: float | None = None,
) -> float:
    """Amplitude factor bringing the target window to ``scr_db`` over the clutter.

    The ratio compares mean power of the target window with mean power of the
    clutter reference, measured within ``band`` when one is given.
    """
    if len(clutter_reference) == 0:
        raise ParameterError("empty clutter reference")
    p_clutter = _band_power(clutter_reference, band, sample_rate)
    if p_clutter <= 0:
        raise ParameterError("clutter reference has zero power")
    p_target = _band_power(target_window, band, sample_rate)
    if p_target <= 0:
        raise ParameterError("target window has zero power")
    return float(np.sqrt(10 ** (scr_db / 10) * p_clutter / p_target))


def measured_scr_db(target_window, clutter_reference, band=None, sample_rate=None) -> float:
    return 10 * np.log10(
        _band_power(target_window, band, sample_rate) / _band_power(clutter_reference, band, sample_rate)
    )


def _bandpass(chirp: ChirpSpec):
    return signal.butter(6, [chirp.f_min, chirp.f_max], btype="bandpass", fs=chirp.sample_rate, output="sos")


def clutter_samples(
    rng: np.random.Generator,
    n_samples: int,
    chirp: ChirpSpec,
    scatterer_rate: float = 250.0,
    scatterer_scale: float = 1.0,
    noise_power: float = 0.05,
    replica: np.ndarray | None = None,
) -> np.ndarray:
    """Band-limited Gaussian background plus Poisson point scatterers.

    Each scatterer returns an undistorted copy of the pulse with a
    Rayleigh-distributed amplitude and random sign; ``scatterer_rate`` is in
    scatterers per second.
    """
    if replica is None:
        replica = make_chirp(chirp)
    out = np.zeros(n_samples)
    if noise_power > 0:
        # filter a longer stretch to drop the start-up transient
        pad = 512
        white = rng.standard_normal(n_samples + pad)
        colored = signal.sosfilt(_bandpass(chirp), white)[pad:]
        colored *= np.sqrt(noise_power / max(np.mean(colored**2), 1e-300))
        out += colored
    n_scat = rng.poisson(scatterer_rate * n_samples / chirp.sample_rate) if scatterer_rate > 0 else 0
    if n_scat:
        m = len(replica)
        starts = rng.integers(-m + 1, n_samples, n_scat)
        amps = rng.rayleigh(scatterer_scale, n_scat) * rng.choice([-1.0, 1.0], n_scat)
        impulses = np.zeros(n_samples + 2 * m)
        np.add.at(impulses, starts + m, amps)
        echoes = signal.oaconvolve(impulses, replica)[m : m + n_samples]
        out += echoes
    return out


def gen_clutter_synthetic(
    seed: int,
    duration: float,
    sample_rate: float,
    chirp: ChirpSpec | None = None,
    scatterer_rate: float = 250.0,
    scatterer_scale: float = 1.0,
    noise_power: float = 0.05,
) -> np.ndarray:
    """Reproducible synthetic reverberation for ``duration`` seconds."""
    if duration <= 0:
        raise ParameterError("duration must be positive")
    if chirp is None:
        chirp = ChirpSpec(sample_rate=sample_rate)
    elif chirp.sample_rate != sample_rate:
        chirp = replace(chirp, sample_rate=sample_rate)
    n = int(round(duration * sample_rate))
    return clutter_samples(
        np.random.default_rng(seed), n, chirp, scatterer_rate, scatterer_scale, noise_power
    )


class SyntheticClutter:
    """On-the-fly clutter generator with the :class:`ClutterBank` interface."""

    def __init__(
        self,
        chirp: ChirpSpec,
        scatterer_rate: float = 250.0,
        scatterer_scale: float = 1.0,
        noise_power: float = 0.05,
    ):
        if scatterer_rate < 0 or noise_power < 0:
            raise ParameterError("clutter rates and powers must be non-negative")
        self.chirp = chirp
        self.sample_rate = chirp.sample_rate
        self.scatterer_rate = scatterer_rate
        self.scatterer_scale = scatterer_scale
        self.noise_power = noise_power
        self.identifier = f"synthetic(rate={scatterer_rate:g},noise={noise_power:g})"
        self._replica = make_chirp(chirp)

    def draw(self, rng: np.random.Generator, n_samples: int) -> np.ndarray:
        return clutter_samples(
            rng, n_samples, self.chirp, self.scatterer_rate, self.scatterer_scale,
            self.noise_power, self._replica,
        )


class ClutterBank:
    """Recorded clutter segments; draws uniformly placed excerpts."""

    def __init__(self, segments: Sequence[np.ndarray], sample_rate: float, identifier: str = "bank"):
        self.segments = [np.asarray(s, dtype=float) for s in segments]
        if not self.segments:
            raise ParameterError("clutter bank is empty")
        self.sample_rate = sample_rate
        self.identifier = identifier

    def draw(self, rng: np.random.Generator, n_samples: int) -> np.ndarray:
        room = np.array([len(s) - n_samples + 1 for s in self.segments], dtype=float)
        if np.all(room <= 0):
            raise ParameterError(f"no clutter segment holds {n_samples} samples")
        room = np.clip(room, 0, None)
        k = rng.choice(len(self.segments), p=room / room.sum())
        start = rng.integers(0, int(room[k]))
        return self.segments[k][start : start + n_samples].copy()


def target_echo(scenario: Scenario, chirp: ChirpSpec, replica: np.ndarray | None = None) -> np.ndarray:
    """Pulse convolved with the scenario impulse response, cut to pulse length."""
    if replica is None:
        replica = make_chirp(chirp)
    return np.convolve(replica, scenario.impulse)[: len(replica)]


def synth_ping(
    scenario: Scenario,
    m: int,
    chirp: ChirpSpec,
    clutter: ClutterSource,
    replica: np.ndarray | None = None,
    echo: np.ndarray | None = None,
) -> PingRecord:
    """Received record for ping ``m`` (1-based).

    Clutter fills the record; on a valid ping of a target scenario the window
    ``[T_m, T_m + T_s]`` is replaced by the scaled target echo (or added to it
    when the scenario is additive). Clutter for ping ``m`` depends only on the
    scenario seed and ``m``.
    """
    cfg = scenario.config
    if not 1 <= m <= cfg.n_pings:
        raise ParameterError(f"ping {m} outside 1..{cfg.n_pings}")
    if clutter.sample_rate != chirp.sample_rate:
        raise ParameterError("clutter and chirp sample rates differ")
    n = int(round(cfg.segment_duration * chirp.sample_rate))
    clutter_seq = np.random.SeedSequence(scenario.seed).spawn(4)[_CLUTTER]
    rng = np.random.default_rng(clutter_seq.spawn(m)[m - 1])
    y = np.asarray(clutter.draw(rng, n), dtype=float)
    if len(y) != n:
        raise ParameterError("clutter segment too short")
    if scenario.has_target and scenario.valid[m - 1]:
        if echo is None:
            echo = target_echo(scenario, chirp, replica)
        start = int(round(2 * scenario.path[m - 1] / chirp.sound_speed * chirp.sample_rate))
        stop = min(start + len(echo), n)
        if start < 0 or start >= n:
            raise ParameterError("target echo outside the record")
        scale = set_scr(echo, y, cfg.scr_db, (chirp.f_min, chirp.f_max), chirp.sample_rate)
        piece = scale * echo[: stop - start]
        if cfg.additive:
            y[start:stop] += piece
        else:
            y[start:stop] = piece
    return PingRecord(m, y, chirp.sample_rate, cfg.segment_duration)


def synth_block(
    scenario: Scenario,
    chirp: ChirpSpec,
    clutter: ClutterSource,
) -> list[PingRecord]:
    replica = make_chirp(chirp)
    echo = target_echo(scenario, chirp, replica) if scenario.has_target else None
    return [synth_ping(scenario, m, chirp, clutter, replica, echo) for m in range(1, scenario.n_pings + 1)]
