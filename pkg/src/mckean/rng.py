"""Counter-based random number streams.

Every noise block consumed by a simulation is addressed by
(seed, job, step, channel).  A Philox generator is rebuilt from that
address on demand, so the values drawn for one job never depend on how
many worker processes are running or in which order jobs complete.
"""
from __future__ import annotations

import numpy as np

# Channel layout shared by the whole package.  Keep these stable: results
# are only reproducible across runs if the addressing scheme is frozen.
CHANNEL_INIT = 0        # initial-condition draws
CHANNEL_REFLECT = 1     # noise entering the reflection term
CHANNEL_SYNC = 2        # noise entering the synchronous term
CHANNEL_REFERENCE = 3   # reference-ensemble driving noise
CHANNEL_PROBE = 4       # validation / sampling utilities

_U64 = np.uint64
_MASK64 = (1 << 64) - 1


class NoiseStreams:
    """Deterministic generator factory keyed by (seed, job).

    ``block(step, channel, shape)`` returns standard normal draws that are
    a pure function of (seed, job, step, channel, shape).  Distinct
    addresses give statistically independent blocks because they map to
    disjoint counter ranges of the Philox cipher.
    """

    def __init__(self, seed: int, job: int = 0):
        if not (0 <= int(seed) <= _MASK64):
            raise ValueError(f"seed must fit in uint64, got {seed!r}")
        if not (0 <= int(job) <= _MASK64):
            raise ValueError(f"job index must fit in uint64, got {job!r}")
        self.seed = int(seed)
        self.job = int(job)
        self._key = np.array([self.seed, self.job], dtype=_U64)

    def generator(self, step: int, channel: int) -> np.random.Generator:
        """Fresh generator positioned at the (step, channel) counter block."""
        if step < 0 or channel < 0:
            raise ValueError("step and channel must be nonnegative")
        counter = np.array([0, 0, step, channel], dtype=_U64)
        return np.random.Generator(np.random.Philox(counter=counter, key=self._key))

    def block(self, step: int, channel: int, shape) -> np.ndarray:
        """Standard normal array of the given shape for this address."""
        return self.generator(step, channel).standard_normal(shape)

    def spawn(self, job: int) -> "NoiseStreams":
        """Stream family for another job under the same master seed."""
        return NoiseStreams(self.seed, job)


def job_index(n_index: int, replication: int) -> int:
    """Stable job id for cell (n_index, replication) of an experiment matrix."""
    if not (0 <= n_index < 1 << 20) or not (0 <= replication < 1 << 32):
        raise ValueError("experiment matrix indices out of supported range")
    return (n_index << 32) | replication
