"""Counter-based auxiliary randomness for Monte Carlo estimators.

Draws are keyed by ``(stream_id, purpose, sample index)`` through Philox, so
any sample can be regenerated without replaying its predecessors and chunked
or parallel sampling yields the same numbers as a single pass.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

# purpose tags occupy the second key word
SEEDS = 1
UNIFORM_FILL = 2
GAUSSIAN = 3
HASH_SAMPLES = 4
POINTS = 5

INVERSE_CDF = "scipy.special.ndtri of (k + 0.5) * 2^-53, k = top 53 bits of a Philox word"


class CounterStream:
    def __init__(self, stream_id: int = 0, purpose: int = SEEDS):
        if stream_id < 0:
            raise ValueError("stream ids are nonnegative")
        self.stream_id = int(stream_id)
        self.purpose = int(purpose)

    def derive(self, purpose: int) -> "CounterStream":
        return CounterStream(self.stream_id, purpose)

    def words(self, start: int, count: int, per_sample: int) -> np.ndarray:
        """``(count, per_sample)`` uint64 words for samples ``start..start+count-1``.

        Each sample owns ``ceil(per_sample / 4)`` consecutive Philox blocks.
        """
        blocks = -(-per_sample // 4)
        gen = np.random.Philox(counter=[start * blocks, 0, 0, 0], key=[self.stream_id, self.purpose])
        raw = gen.random_raw(count * blocks * 4).reshape(count, blocks * 4)
        return np.ascontiguousarray(raw[:, :per_sample])

    def uniforms(self, start: int, count: int, per_sample: int) -> np.ndarray:
        """Open-interval uniforms on (0, 1)."""
        w = self.words(start, count, per_sample)
        return ((w >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53

    def normals(self, start: int, count: int, per_sample: int) -> np.ndarray:
        return ndtri(self.uniforms(start, count, per_sample))

    def signs(self, start: int, count: int, n: int) -> np.ndarray:
        """Uniform ``+-1`` int8 points, one row per sample."""
        w = self.words(start, count, -(-n // 64))
        out = np.empty((count, n), dtype=np.int8)
        for i in range(n):
            bit = (w[:, i // 64] >> np.uint64(i % 64)) & np.uint64(1)
            out[:, i] = 1 - 2 * bit.astype(np.int8)
        return out


def chunks(total: int, size: int):
    for start in range(0, total, size):
        yield start, min(size, total - start)
