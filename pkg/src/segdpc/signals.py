"""Seeded signal generators for excitation, disturbance and noise streams.

Generators draw their samples sequentially from a ``numpy`` Generator so that
a shorter stream is always a prefix of a longer stream with the same seed.
The benchmark relies on this to hand segmented and unsegmented controllers
identical corruption processes even though their training records differ in
length.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

__all__ = [
    "SignalGen",
    "Constant",
    "Sinusoid",
    "UniformNoise",
    "GaussianNoise",
    "RandomHold",
    "SumSignal",
    "stream_seed",
]

Seed = Union[int, Sequence[int], None]


def _make_rng(seed: Seed) -> np.random.Generator:
    if seed is None:
        return np.random.default_rng()
    return np.random.default_rng(np.random.SeedSequence(seed))


def _child_seed(seed: Seed, index: int) -> Seed:
    if seed is None:
        return None
    if isinstance(seed, (int, np.integer)):
        return [int(seed), index]
    return [*map(int, seed), index]


def stream_seed(base_seed: int, role: int, realization: int = 0, phase: int = 0) -> list[int]:
    """Hierarchical seed key for a named random stream.

    ``role`` distinguishes excitation / disturbance / noise streams,
    ``realization`` indexes sweep repetitions and ``phase`` separates the
    training experiment from the closed-loop run.
    """
    return [int(base_seed), int(role), int(realization), int(phase)]


class SignalGen:
    """Base class: a seeded scalar-channel signal source."""

    def samples(self, n: int, dt: float, seed: Seed = None) -> np.ndarray:
        """Return ``n`` samples at spacing ``dt``.

        ``seed`` overrides the generator's own seed; deterministic generators
        ignore it.
        """
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(SignalGen):
    value: float = 0.0

    def samples(self, n: int, dt: float, seed: Seed = None) -> np.ndarray:
        return np.full(n, self.value)


@dataclass(frozen=True)
class Sinusoid(SignalGen):
    """``bias + amplitude * sin(2 pi f t + phase)`` sampled at ``t = k dt``."""

    amplitude: float
    frequency_hz: float
    bias: float = 0.0
    phase: float = 0.0

    def samples(self, n: int, dt: float, seed: Seed = None) -> np.ndarray:
        t = np.arange(n) * dt
        return self.bias + self.amplitude * np.sin(
            2.0 * np.pi * self.frequency_hz * t + self.phase
        )


@dataclass(frozen=True)
class UniformNoise(SignalGen):
    low: float
    high: float
    seed: Seed = None

    def samples(self, n: int, dt: float, seed: Seed = None) -> np.ndarray:
        rng = _make_rng(seed if seed is not None else self.seed)
        return rng.uniform(self.low, self.high, size=n)


@dataclass(frozen=True)
class GaussianNoise(SignalGen):
    mean: float
    std: float
    seed: Seed = None

    def samples(self, n: int, dt: float, seed: Seed = None) -> np.ndarray:
        rng = _make_rng(seed if seed is not None else self.seed)
        return self.mean + self.std * rng.standard_normal(n)


@dataclass(frozen=True)
class RandomHold(SignalGen):
    """Piecewise-constant signal: a fresh uniform level every ``hold_time`` seconds."""

    hold_time: float
    low: float
    high: float
    seed: Seed = None

    def samples(self, n: int, dt: float, seed: Seed = None) -> np.ndarray:
        if self.hold_time <= 0:
            raise ValueError("hold_time must be positive")
        hold_samples = max(1, int(round(self.hold_time / dt)))
        n_holds = -(-n // hold_samples)  # ceil division
        rng = _make_rng(seed if seed is not None else self.seed)
        levels = rng.uniform(self.low, self.high, size=n_holds)
        return np.repeat(levels, hold_samples)[:n]


@dataclass(frozen=True)
class SumSignal(SignalGen):
    """Pointwise sum of component generators.

    A supplied seed is split into independent child seeds, one per part, so
    the components stay decorrelated.
    """

    parts: tuple[SignalGen, ...]

    def samples(self, n: int, dt: float, seed: Seed = None) -> np.ndarray:
        out = np.zeros(n)
        for i, part in enumerate(self.parts):
            out += part.samples(n, dt, seed=_child_seed(seed, i))
        return out
