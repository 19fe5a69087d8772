"""Append-only sample reservoirs (the empirical measure of a chain's history).

A reservoir realizes the running empirical measure mu_n of a chain: after
n pushes it is the uniform measure on the stored states, which is exactly
the n-fold application of the recursion mu -> mu + (delta_x - mu)/n from
the zero measure.  The zero measure itself has no sampling semantics, so
drawing from an empty reservoir is an error; adaptive kernels route
around it by taking their local branch until the first push.

Weighted resampling normalizes per call via max-shifted exponentiation,
so log weights of any magnitude are safe.  No thinning, forgetting or
weight clipping: all raw states are kept.
"""

from __future__ import annotations

import csv

import numpy as np


class EmptyReservoirError(RuntimeError):
    """Raised when a draw is requested from a reservoir with no samples."""


class NonFiniteWeightError(ValueError):
    """Raised when a resampling weight is NaN or infinite."""


class Reservoir:
    """Append-only store of states with uniform and weighted resampling.

    Parameters
    ----------
    dimension : int or None
        ``None`` stores integer states (finite state spaces); an integer d
        stores float vectors of length d.
    """

    def __init__(self, dimension: int | None = None):
        self.dimension = dimension
        self._count = 0
        if dimension is None:
            self._buf = np.empty(16, dtype=np.int64)
        else:
            self._buf = np.empty((16, dimension), dtype=float)

    @property
    def count(self) -> int:
        return self._count

    @property
    def samples(self) -> np.ndarray:
        """Read-only view of the stored states, oldest first."""
        view = self._buf[: self._count]
        view.flags.writeable = False
        return view

    def push(self, x) -> None:
        """Append one state (never mutated afterwards)."""
        if self._count == len(self._buf):
            grown = np.empty(
                (2 * len(self._buf),) + self._buf.shape[1:], dtype=self._buf.dtype
            )
            grown[: self._count] = self._buf[: self._count]
            self._buf = grown
        if self.dimension is None:
            self._buf[self._count] = int(x)
        else:
            x = np.asarray(x, dtype=float)
            if x.shape != (self.dimension,):
                raise ValueError(f"state must have shape ({self.dimension},), got {x.shape}")
            self._buf[self._count] = x
        self._count += 1

    def state_at(self, k: int):
        if not 0 <= k < self._count:
            raise IndexError(k)
        return self._item(k)

    def _item(self, k: int):
        if self.dimension is None:
            return int(self._buf[k])
        return self._buf[k].copy()

    def empirical_mean(self, f=None):
        """Mean of f over the stored states (f vectorized; identity if None)."""
        if self._count == 0:
            raise EmptyReservoirError("empirical mean of an empty reservoir")
        values = self.samples if f is None else np.asarray(f(self.samples))
        return values.mean(axis=0)

    def sample_uniform(self, rng):
        """One stored state, each with probability 1/count."""
        if self._count == 0:
            raise EmptyReservoirError("cannot draw from an empty reservoir")
        return self._item(int(rng.integers(self._count)))

    def sample_weighted(self, log_weight, rng):
        """One stored state with probability proportional to exp(log_weight).

        ``log_weight`` is applied to the full stacked sample array and must
        return one finite value per state.  Normalization is recomputed per
        call after subtracting the max, so huge log weights do not overflow.
        """
        if self._count == 0:
            raise EmptyReservoirError("cannot draw from an empty reservoir")
        lw = np.asarray(log_weight(self.samples), dtype=float)
        if lw.shape != (self._count,):
            raise ValueError(f"log_weight must return {self._count} values, got {lw.shape}")
        if not np.all(np.isfinite(lw)):
            raise NonFiniteWeightError("resampling log weights must be finite")
        w = np.exp(lw - lw.max())
        cdf = np.cumsum(w)
        k = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return self._item(min(k, self._count - 1))

    def empirical_distribution(self, state_count: int) -> np.ndarray:
        """Occupation frequencies over a finite state space (integer states only)."""
        if self.dimension is not None:
            raise ValueError("empirical_distribution applies to integer-state reservoirs")
        if self._count == 0:
            raise EmptyReservoirError("empirical distribution of an empty reservoir")
        return np.bincount(self.samples, minlength=state_count) / self._count

    def to_csv(self, path) -> None:
        """Dump the stored states, one row per sample (debugging aid)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            if self.dimension is None:
                writer.writerow(["state"])
                for s in self.samples:
                    writer.writerow([int(s)])
            else:
                writer.writerow([f"x{i}" for i in range(self.dimension)])
                for row in self.samples:
                    writer.writerow([repr(float(v)) for v in row])
