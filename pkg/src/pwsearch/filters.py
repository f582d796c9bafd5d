"""Resource-membership filters attached to partial walks.

Two flavours share one interface (``insert``/``query``):

* :class:`IdealFilter` keeps the exact set and answers a negative query
  positively with probability exactly ``p``.  This is what the analytical
  model assumes, so model-validation runs use it.
* :class:`BloomFilter` is a real bit-array Bloom filter with double hashing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from ._kernels import bloom_insert, bloom_query, hash_unit, keyed_hash

__all__ = [
    "FilterConfig",
    "IdealFilter",
    "BloomFilter",
    "ResourceFilter",
    "bloom_params_for",
    "make_filter",
]


def bloom_params_for(capacity: int, target_p: float) -> tuple[int, int]:
    """Bit count ``m`` and hash count ``h`` for ``capacity`` items at false-positive rate ``target_p``."""
    if not 0.0 < target_p < 1.0:
        raise ValueError("target_p must be in (0, 1)")
    if capacity < 1:
        raise ValueError("capacity must be >= 1")
    m = max(1, math.ceil(-capacity * math.log(target_p) / math.log(2) ** 2))
    h = max(1, round(m / capacity * math.log(2)))
    return m, h


@dataclass(frozen=True)
class FilterConfig:
    """How walk filters are built.

    ``mode`` is ``"ideal"`` or ``"bloom"``.  For ideal filters ``p`` is the
    exact false-positive probability and ``memoize`` fixes each
    (filter, resource) answer instead of redrawing per query.  For Bloom
    filters ``p`` is the design target at a capacity of ``s`` items.
    """

    mode: str = "ideal"
    p: float = 0.0
    memoize: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in ("ideal", "bloom"):
            raise ValueError(f"unknown filter mode {self.mode!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        if self.mode == "bloom" and not 0.0 < self.p < 1.0:
            raise ValueError("bloom filters need 0 < p < 1")


class IdealFilter:
    mode = "ideal"

    def __init__(
        self,
        p: float,
        items: Iterable[int] = (),
        rng: np.random.Generator | None = None,
        memo_key: int | None = None,
    ) -> None:
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must be in [0, 1]")
        self.p = float(p)
        self.items: set[int] = {int(r) for r in items}
        self.rng = rng if rng is not None else np.random.default_rng()
        self.memo_key = memo_key

    def insert(self, r: int) -> None:
        self.items.add(int(r))

    def query(self, r: int) -> bool:
        if int(r) in self.items:
            return True
        if self.memo_key is not None:
            return bool(hash_unit(np.uint64(keyed_hash(np.uint64(self.memo_key), np.uint64(r)))) < self.p)
        return bool(self.rng.random() < self.p)

    def __contains__(self, r: int) -> bool:
        return self.query(r)

    def to_text(self) -> str:
        ids = " ".join(str(r) for r in sorted(self.items))
        return f"ideal {self.p!r} {ids}".rstrip()


class BloomFilter:
    mode = "bloom"

    def __init__(self, m: int, h: int, seed: int = 0, bits: np.ndarray | None = None) -> None:
        if m < 1 or h < 1:
            raise ValueError("m and h must be >= 1")
        self.m = int(m)
        self.h = int(h)
        self.seed = int(seed)
        nwords = (self.m + 63) // 64
        if bits is None:
            bits = np.zeros(nwords, dtype=np.uint64)
        elif bits.shape != (nwords,) or bits.dtype != np.uint64:
            raise ValueError("bits must be a uint64 array of ceil(m/64) words")
        self.bits = bits

    @classmethod
    def for_capacity(cls, capacity: int, target_p: float, seed: int = 0) -> BloomFilter:
        m, h = bloom_params_for(capacity, target_p)
        return cls(m, h, seed)

    def insert(self, r: int) -> None:
        bloom_insert(self.bits, np.uint64(self.seed), self.m, self.h, np.uint64(r))

    def query(self, r: int) -> bool:
        return bool(bloom_query(self.bits, np.uint64(self.seed), self.m, self.h, np.uint64(r)))

    def __contains__(self, r: int) -> bool:
        return self.query(r)

    def fill_ratio(self) -> float:
        ones = sum(bin(int(x)).count("1") for x in self.bits)
        return ones / self.m

    def to_text(self) -> str:
        return f"bloom {self.m} {self.h} {self.seed} {self.bits.tobytes().hex()}"


ResourceFilter = Union[IdealFilter, BloomFilter]


def filter_from_text(text: str, rng: np.random.Generator | None = None) -> ResourceFilter:
    parts = text.split()
    if parts[0] == "ideal":
        return IdealFilter(float(parts[1]), (int(x) for x in parts[2:]), rng=rng)
    if parts[0] == "bloom":
        m, h, seed = int(parts[1]), int(parts[2]), int(parts[3])
        bits = np.frombuffer(bytes.fromhex(parts[4]), dtype=np.uint64).copy()
        return BloomFilter(m, h, seed, bits)
    raise ValueError(f"unknown filter tag {parts[0]!r}")


def make_filter(
    cfg: FilterConfig, capacity: int, rng: np.random.Generator | None = None, memo_key: int | None = None
) -> ResourceFilter:
    if cfg.mode == "bloom":
        return BloomFilter.for_capacity(capacity, cfg.p, seed=cfg.seed)
    return IdealFilter(cfg.p, rng=rng, memo_key=memo_key if cfg.memoize else None)
