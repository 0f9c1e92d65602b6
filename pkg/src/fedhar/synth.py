"""Synthetic heterogeneous client recordings.

Desk-scale stand-in for a real wearable corpus: every client is a
concatenation of random-length activity segments. Class c > 0 emits a
sinusoid at that class's frequency, perturbed by the client's amplitude
and phase, plus Gaussian noise; class 0 is low-amplitude noise only.
Class proportions per client come from a Dirichlet draw, which is what
makes the federation non-IID. Everything is a pure function of a
SyntheticSpec, including its master seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import LabeledSeries, LabelMap
from .errors import ConfigError


@dataclass(frozen=True)
class SyntheticSpec:
    num_clients: int = 6
    num_classes: int = 6  # includes the NULL-like class 0
    channels: int = 12
    duration: int = 30000  # samples per client
    sample_rate_hz: float = 50.0
    class_freqs_hz: tuple[float, ...] | None = None  # classes 1..C-1; None = auto
    amplitude_jitter: float = 0.3
    noise_sigma: float = 0.25
    alpha: float = 0.5  # Dirichlet concentration; inf = uniform proportions
    segment_min: int = 150
    segment_max: int = 600
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_clients < 1:
            raise ConfigError("num_clients must be >= 1")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.channels < 1:
            raise ConfigError("channels must be >= 1")
        if self.duration < 1:
            raise ConfigError("duration must be >= 1")
        if self.sample_rate_hz <= 0:
            raise ConfigError("sample_rate_hz must be positive")
        if not 0.0 <= self.amplitude_jitter < 1.0:
            raise ConfigError("amplitude_jitter must lie in [0, 1)")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive (inf for uniform)")
        if not 1 <= self.segment_min <= self.segment_max:
            raise ConfigError("need 1 <= segment_min <= segment_max")
        freqs = self.frequencies()
        if len(set(freqs)) != len(freqs):
            raise ConfigError("class frequencies must be distinct")

    def frequencies(self) -> tuple[float, ...]:
        """Per-activity-class sinusoid frequencies (classes 1..C-1)."""
        if self.class_freqs_hz is not None:
            if len(self.class_freqs_hz) != self.num_classes - 1:
                raise ConfigError(
                    f"class_freqs_hz needs {self.num_classes - 1} entries, "
                    f"got {len(self.class_freqs_hz)}"
                )
            return tuple(float(f) for f in self.class_freqs_hz)
        # Evenly spaced between 0.8 Hz and 40% of Nyquist.
        top = 0.4 * self.sample_rate_hz / 2.0
        count = self.num_classes - 1
        if count == 1:
            return (0.8,)
        step = (top - 0.8) / (count - 1)
        return tuple(0.8 + i * step for i in range(count))

    def label_map(self) -> LabelMap:
        return LabelMap.synthetic(self.num_classes)


def _client_proportions(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    if math.isinf(spec.alpha):
        return np.full(spec.num_classes, 1.0 / spec.num_classes)
    return rng.dirichlet(np.full(spec.num_classes, spec.alpha))


def _generate_client(spec: SyntheticSpec, client_id: int) -> LabeledSeries:
    rng = np.random.default_rng([spec.seed, client_id])
    amplitude = 1.0 + spec.amplitude_jitter * rng.uniform(-1.0, 1.0)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(spec.num_classes, spec.channels))
    sigma = spec.noise_sigma * rng.uniform(0.7, 1.3)
    proportions = _client_proportions(spec, rng)
    freqs = spec.frequencies()

    values = np.empty((spec.channels, spec.duration), dtype=np.float64)
    labels = np.empty(spec.duration, dtype=np.int64)
    cursor = 0
    while cursor < spec.duration:
        seg_len = int(rng.integers(spec.segment_min, spec.segment_max + 1))
        seg_len = min(seg_len, spec.duration - cursor)
        cls = int(rng.choice(spec.num_classes, p=proportions))
        t = np.arange(cursor, cursor + seg_len, dtype=np.float64) / spec.sample_rate_hz
        noise = rng.standard_normal((spec.channels, seg_len))
        if cls == 0:
            segment = 0.5 * sigma * noise
        else:
            tone = np.sin(
                2.0 * np.pi * freqs[cls - 1] * t[None, :]
                + phases[cls][:, None]
            )
            segment = amplitude * tone + sigma * noise
        values[:, cursor : cursor + seg_len] = segment
        labels[cursor : cursor + seg_len] = cls
        cursor += seg_len

    return LabeledSeries(
        client_id=client_id,
        sample_rate_hz=spec.sample_rate_hz,
        channel_names=tuple(f"ch_{i:02d}" for i in range(spec.channels)),
        values=values,
        labels=labels,
        label_map=spec.label_map(),
    )


def generate_synthetic(spec: SyntheticSpec) -> list[LabeledSeries]:
    """One LabeledSeries per client, fully determined by ``spec``."""
    return [_generate_client(spec, cid) for cid in range(spec.num_clients)]
