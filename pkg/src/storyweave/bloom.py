"""Small fixed-capacity bloom filter used to prefilter index candidates."""

from __future__ import annotations

import hashlib
import math
from functools import lru_cache
from typing import Iterable


_MAX_HASHES = 16


@lru_cache(maxsize=1 << 16)
def _hash_words(key: str) -> tuple[int, ...]:
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=4 * _MAX_HASHES).digest()
    return tuple(int.from_bytes(digest[i : i + 4], "little") for i in range(0, len(digest), 4))


def optimal_parameters(n: int, fpr: float) -> tuple[int, int]:
    """Bit count and hash count for ``n`` keys at false-positive rate ``fpr``."""
    n = max(n, 1)
    m = math.ceil(-n * math.log(fpr) / (math.log(2) ** 2))
    k = min(_MAX_HASHES, max(1, round(m / n * math.log(2))))
    return max(m, 64), k


class BloomFilter:
    __slots__ = ("size", "hashes", "bits")

    def __init__(self, keys: Iterable[str], fpr: float) -> None:
        keys = list(keys)
        self.size, self.hashes = optimal_parameters(len(keys), fpr)
        self.bits = 0
        for key in keys:
            self.bits |= self._mask(key)

    def _mask(self, key: str) -> int:
        m = self.size
        mask = 0
        for word in _hash_words(key)[: self.hashes]:
            mask |= 1 << (word % m)
        return mask

    def __contains__(self, key: str) -> bool:
        mask = self._mask(key)
        return self.bits & mask == mask
