"""Random-walk / self-avoiding-walk stepping and partial-walk tables."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels as K
from . import streams
from .filters import BloomFilter, FilterConfig, IdealFilter, ResourceFilter, bloom_params_for
from .graph import Network

__all__ = [
    "PartialWalk",
    "WalkTable",
    "FreshWalks",
    "rw_step",
    "saw_step",
    "build_partial_walk",
    "precompute_walk_tables",
    "construction_cost",
    "KINDS",
    "RANGES",
]

KINDS = {"rw": K.KIND_RW, "saw": K.KIND_SAW}
RANGES = {"first": K.RANGE_FIRST, "last": K.RANGE_LAST}


def _check_kind_range(kind: str, registration_range: str) -> None:
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {sorted(KINDS)}, got {kind!r}")
    if registration_range not in RANGES:
        raise ValueError(f"registration_range must be one of {sorted(RANGES)}, got {registration_range!r}")


def range_bounds(s: int, registration_range: str) -> tuple[int, int]:
    """Inclusive index bounds of the registered part of a walk of ``s`` hops."""
    return (0, s - 1) if registration_range == "first" else (1, s)


def rw_step(net: Network, current: int, rng: np.random.Generator) -> int:
    return int(K.rw_step(net.indptr, net.indices, current, rng))


def saw_step(net: Network, current: int, visited: set[int], rng: np.random.Generator) -> int:
    """Uniform over unvisited neighbors, or over all neighbors if every one was visited."""
    nb = net.neighbors(current)
    free = [int(v) for v in nb if int(v) not in visited]
    if not free:
        return int(nb[int(rng.random() * len(nb))])
    return free[int(rng.random() * len(free))]


@dataclass
class PartialWalk:
    nodes: np.ndarray
    kind: str
    registration_range: str
    filter: ResourceFilter

    @property
    def owner(self) -> int:
        return int(self.nodes[0])

    @property
    def s(self) -> int:
        return len(self.nodes) - 1

    @property
    def end(self) -> int:
        return int(self.nodes[-1])

    def registered(self) -> np.ndarray:
        lo, hi = range_bounds(self.s, self.registration_range)
        return self.nodes[lo : hi + 1]


def build_partial_walk(
    net: Network,
    owner: int,
    s: int,
    kind: str,
    registration_range: str,
    filter_cfg: FilterConfig,
    rng: np.random.Generator,
) -> PartialWalk:
    if s < 1:
        raise ValueError("s must be >= 1")
    _check_kind_range(kind, registration_range)
    nodes = np.empty(s + 1, dtype=np.int32)
    visited = np.zeros(net.n, dtype=np.int64)
    K.generate_walk(net.indptr, net.indices, owner, s, KINDS[kind], rng, visited,
                    np.zeros(1, dtype=np.int64), nodes)
    lo, hi = range_bounds(s, registration_range)
    if filter_cfg.mode == "bloom":
        filt: ResourceFilter = BloomFilter.for_capacity(s, filter_cfg.p, seed=filter_cfg.seed)
    else:
        memo = int(rng.integers(2**63)) if filter_cfg.memoize else None
        filt = IdealFilter(filter_cfg.p, rng=rng.spawn(1)[0], memo_key=memo)
    for v in nodes[lo : hi + 1]:
        filt.insert(int(v))
    return PartialWalk(nodes, kind, registration_range, filt)


def construction_cost(n: int, w: int, s: int) -> int:
    """Messages to build every table: s hops per walk plus one to return to its owner."""
    return n * w * (s + 1)


@dataclass(frozen=True)
class FreshWalks:
    """Stand-in for a table whose walks are generated on demand and never reused."""

    s: int
    w: int
    kind: str
    registration_range: str
    filter_cfg: FilterConfig = FilterConfig()

    def __post_init__(self) -> None:
        if self.s < 1 or self.w < 1:
            raise ValueError("s and w must be >= 1")
        _check_kind_range(self.kind, self.registration_range)


@dataclass(eq=False)
class WalkTable:
    """``w`` partial walks per node, stored as an ``(N, w, s+1)`` array.

    Bloom bits (when ``filter_cfg.mode == "bloom"``) are an ``(N, w, words)``
    ``uint64`` array; for ideal filters that array has zero words.
    """

    nodes: np.ndarray
    kind: str
    registration_range: str
    filter_cfg: FilterConfig
    bits: np.ndarray
    bloom_m: int = 0
    bloom_h: int = 0
    seed: int = 0

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def w(self) -> int:
        return self.nodes.shape[1]

    @property
    def s(self) -> int:
        return self.nodes.shape[2] - 1

    @property
    def construction_cost(self) -> int:
        return construction_cost(self.n, self.w, self.s)

    def walk(self, node: int, i: int) -> PartialWalk:
        nodes = self.nodes[node, i]
        cfg = self.filter_cfg
        if cfg.mode == "bloom":
            filt: ResourceFilter = BloomFilter(self.bloom_m, self.bloom_h, cfg.seed, self.bits[node, i])
        else:
            lo, hi = range_bounds(self.s, self.registration_range)
            memo = None
            if cfg.memoize:
                memo = int(K.keyed_hash(np.uint64(cfg.seed), np.uint64(node * self.w + i)))
            filt = IdealFilter(
                cfg.p,
                (int(v) for v in nodes[lo : hi + 1]),
                rng=streams.substream(cfg.seed, streams.FILTER, node, i),
                memo_key=memo,
            )
        return PartialWalk(nodes, self.kind, self.registration_range, filt)

    def walks(self, node: int) -> list[PartialWalk]:
        return [self.walk(node, i) for i in range(self.w)]

    # -- serialization ------------------------------------------------------

    def to_text(self) -> str:
        cfg = self.filter_cfg
        out = [
            f"S {self.s} W {self.w} KIND {self.kind} RANGE {self.registration_range}",
            f"FILTER {cfg.mode} P {cfg.p!r} MEMO {int(cfg.memoize)} SEED {cfg.seed} TABLESEED {self.seed}",
        ]
        lo, hi = range_bounds(self.s, self.registration_range)
        for u in range(self.n):
            for i in range(self.w):
                seq = self.nodes[u, i]
                walk = " ".join(str(int(v)) for v in seq)
                if cfg.mode == "bloom":
                    ftxt = f"bloom {self.bloom_m} {self.bloom_h} {cfg.seed} {self.bits[u, i].tobytes().hex()}"
                else:
                    ids = " ".join(str(v) for v in sorted({int(v) for v in seq[lo : hi + 1]}))
                    ftxt = f"ideal {cfg.p!r} {ids}"
                out.append(f"{u} {walk} | {ftxt}")
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text: str) -> WalkTable:
        rows = text.splitlines()
        h = rows[0].split()
        s, w, kind, rng_ = int(h[1]), int(h[3]), h[5], h[7]
        f = rows[1].split()
        cfg = FilterConfig(mode=f[1], p=float(f[3]), memoize=bool(int(f[5])), seed=int(f[7]))
        table_seed = int(f[9])
        body = [r for r in rows[2:] if r.strip()]
        n = len(body) // w
        nodes = np.empty((n, w, s + 1), dtype=np.int32)
        m = hh = 0
        if cfg.mode == "bloom":
            m, hh = bloom_params_for(s, cfg.p)
        bits = np.zeros((n, w, (m + 63) // 64), dtype=np.uint64)
        for k, row in enumerate(body):
            walk_part, filt_part = row.split("|")
            vals = [int(x) for x in walk_part.split()]
            u, i = divmod(k, w)
            if vals[0] != u:
                raise ValueError(f"walk rows out of order at line {k + 3}")
            nodes[u, i] = vals[1:]
            if cfg.mode == "bloom":
                bits[u, i] = np.frombuffer(bytes.fromhex(filt_part.split()[4]), dtype=np.uint64)
        return cls(nodes, kind, rng_, cfg, bits, m, hh, table_seed)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), newline="\n")

    @classmethod
    def load(cls, path: str | Path) -> WalkTable:
        return cls.from_text(Path(path).read_text())


def precompute_walk_tables(
    net: Network,
    w: int,
    s: int,
    kind: str,
    registration_range: str,
    filter_cfg: FilterConfig,
    master_seed: int,
) -> WalkTable:
    """Stage 1: every node builds ``w`` walks of ``s`` hops.

    Walk ``i`` of node ``u`` draws from its own substream ``(u, i)``.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    if s < 1:
        raise ValueError("s must be >= 1")
    _check_kind_range(kind, registration_range)
    n = net.n
    nodes = np.empty((n, w, s + 1), dtype=np.int32)
    visited = np.zeros(n, dtype=np.int64)
    stamp = np.zeros(1, dtype=np.int64)
    code = KINDS[kind]
    for u in range(n):
        for i in range(w):
            rng = streams.substream(master_seed, streams.TABLE, u, i)
            K.generate_walk(net.indptr, net.indices, u, s, code, rng, visited, stamp, nodes[u, i])
    m = h = 0
    if filter_cfg.mode == "bloom":
        m, h = bloom_params_for(s, filter_cfg.p)
    bits = np.zeros((n, w, (m + 63) // 64), dtype=np.uint64)
    if filter_cfg.mode == "bloom":
        lo, hi = range_bounds(s, registration_range)
        K.fill_table_blooms(nodes, lo, hi, bits, np.uint64(filter_cfg.seed), m, h)
    return WalkTable(nodes, kind, registration_range, filter_cfg, bits, m, h, master_seed)
