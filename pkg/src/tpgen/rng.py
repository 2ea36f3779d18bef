"""Seeded, splittable random streams.

Built on numpy's Philox counter-based bit generator. Substreams handed to
independent consumers (minibatch corruption, per-sample generation) are
derived by splitting, never by sharing a handle, so results do not depend
on the order in which consumers draw.
"""

from __future__ import annotations

import numpy as np


class RandomSource:
    """Deterministic random stream that can be split into independent children.

    The same seed always reproduces the same stream, and ``split(n)``
    derives n child streams that are statistically independent of each
    other and of everything the parent draws afterwards.
    """

    def __init__(self, seed: int = 0, _seq: np.random.SeedSequence | None = None):
        self._seq = np.random.SeedSequence(seed) if _seq is None else _seq
        self._gen = np.random.Generator(np.random.Philox(self._seq))

    def split(self, n: int) -> list["RandomSource"]:
        return [RandomSource(_seq=s) for s in self._seq.spawn(n)]

    def child(self) -> "RandomSource":
        return self.split(1)[0]

    def normal(self, shape=None, std: float = 1.0, mean: float = 0.0) -> np.ndarray:
        return self._gen.normal(mean, std, size=shape)

    def uniform(self, shape=None, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._gen.uniform(low, high, size=shape)

    def bernoulli(self, p) -> np.ndarray:
        """Elementwise Bernoulli draws with success probabilities p, as 0.0/1.0."""
        p = np.asarray(p, dtype=np.float64)
        return (self._gen.random(p.shape) < p).astype(np.float64)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low, high=None, shape=None) -> np.ndarray:
        return self._gen.integers(low, high, size=shape)


def gaussian_noise(source: RandomSource, shape, std: float) -> np.ndarray:
    """I.i.d. zero-mean Gaussian samples with the given standard deviation."""
    if std < 0:
        raise ValueError(f"noise std must be >= 0, got {std}")
    return source.normal(shape, std=std)
