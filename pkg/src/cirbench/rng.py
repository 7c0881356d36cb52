"""Deterministic splittable random streams keyed by (seed, path, substream).

Built on the counter-based Philox generator: the draws for a given key are a
pure function of the key, independent of how work is partitioned across
blocks or threads. Each path owns two substreams, one for its Brownian
increments and one for exact-transition sampling, placed 2^192 counter steps
apart so they can never overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

BROWNIAN = 0
EXACT_TRANSITION = 1

_U64 = 1 << 64


@dataclass(frozen=True)
class StreamKey:
    """Address of one random stream. All fields must fit in uint64."""

    seed: int
    path_index: int
    substream: int = BROWNIAN

    def __post_init__(self) -> None:
        for name in ("seed", "path_index", "substream"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                raise ValueError(f"{name} must be an integer, got {value!r}")
            if not 0 <= value < _U64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit word, got {value}")


def _generator(key: StreamKey) -> Generator:
    # key words address the path, the substream sits in the top counter word
    counter = np.array([0, 0, 0, key.substream], dtype=np.uint64)
    words = np.array([key.seed, key.path_index], dtype=np.uint64)
    return Generator(Philox(counter=counter, key=words))


class Stream:
    """Sequential draw source for one key.

    Draws advance the stream; two Streams built from equal keys replay the
    same sequence. Not thread-safe; give each worker its own keys instead.
    """

    def __init__(self, key: StreamKey):
        self.key = key
        self._gen = _generator(key)

    def normals(self, count: int, out: np.ndarray | None = None) -> np.ndarray:
        """`count` standard normal draws; fills `out` in place when given."""
        if isinstance(count, bool) or not isinstance(count, (int, np.integer)) or count < 0:
            raise ValueError(f"count must be a non-negative integer, got {count!r}")
        if out is not None:
            if out.shape != (count,):
                raise ValueError(f"out must have shape ({count},), got {out.shape}")
            self._gen.standard_normal(out=out)
            return out
        return self._gen.standard_normal(count)

    def gamma(self, shape, scale: float = 1.0, size=None) -> np.ndarray | float:
        """Gamma draws; `shape` may be an array (one draw per element)."""
        shape = np.asarray(shape, dtype=np.float64)
        if np.any(shape <= 0.0):
            raise ValueError("gamma shape must be strictly positive")
        if scale <= 0.0:
            raise ValueError(f"gamma scale must be strictly positive, got {scale!r}")
        draws = self._gen.standard_gamma(shape, size=size) * scale
        return draws

    def poisson(self, mean, size=None) -> np.ndarray | int:
        if np.any(np.asarray(mean) < 0.0):
            raise ValueError("poisson mean must be non-negative")
        return self._gen.poisson(mean, size=size)

    def noncentral_chi2(self, d: float, lam, size=None) -> np.ndarray | float:
        """Noncentral chi-square draws with d degrees of freedom.

        Sampled as the gamma mixture: J ~ Poisson(lam/2), then
        Gamma(d/2 + J, scale=2). Valid for any real d > 0, including the
        non-integer degrees of freedom this project needs.
        """
        if not d > 0.0:
            raise ValueError(f"degrees of freedom must be strictly positive, got {d!r}")
        lam = np.asarray(lam, dtype=np.float64)
        if np.any(lam < 0.0):
            raise ValueError("noncentrality must be non-negative")
        mixing = self.poisson(lam * 0.5, size=size)
        return self.gamma(0.5 * d + mixing, scale=2.0)


def normal_draws(key: StreamKey, count: int) -> np.ndarray:
    """One-shot: the first `count` standard normals of `key`'s stream."""
    return Stream(key).normals(count)
