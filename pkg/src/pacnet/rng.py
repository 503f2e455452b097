"""Counter-based, splittable random streams."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream keyed by ``(seed, stream_id)``.

    Each call to :meth:`generator` restarts the stream from its first draw,
    so handing the same ``RngStream`` to two consumers gives them identical
    bits. Use :meth:`substream` to derive independent children.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) <= _MASK64:
                raise ValueError(f"{name} must fit in 64 unsigned bits, got {v}")

    def generator(self) -> np.random.Generator:
        key = int(self.seed) | (int(self.stream_id) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, index: int) -> "RngStream":
        mixed = np.random.SeedSequence([int(self.stream_id), int(index), 0x9E3779B9]).generate_state(
            1, np.uint64
        )[0]
        return RngStream(self.seed, int(mixed))
