"""Random network construction (configuration model) and degree statistics."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import streams

__all__ = [
    "Network",
    "DegreeStats",
    "GraphGenerationError",
    "generate_regular",
    "generate_er",
    "generate_scale_free",
    "from_degree_sequence",
    "degree_stats",
    "er_degree_sequence",
    "scale_free_degree_sequence",
    "fit_power_law",
]

RETRY_BUDGET = 100


class GraphGenerationError(RuntimeError):
    """Raised when no valid connected simple graph was produced within budget."""


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable undirected simple graph in CSR form.

    ``indices[indptr[u]:indptr[u + 1]]`` are the neighbors of ``u`` in
    ascending order.
    """

    indptr: np.ndarray
    indices: np.ndarray
    family: str = "custom"
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def degree(self, u: int) -> int:
        return int(self.indptr[u + 1] - self.indptr[u])

    def edge_count(self) -> int:
        return len(self.indices) // 2

    def to_text(self) -> str:
        lines = [f"N {self.n} FAMILY {self.family} SEED {self.seed}"]
        for u in range(self.n):
            nb = " ".join(str(int(v)) for v in self.neighbors(u))
            lines.append(f"{u} {nb}" if nb else str(u))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Network:
        rows = text.splitlines()
        head = rows[0].split()
        if len(head) != 6 or head[0] != "N" or head[2] != "FAMILY" or head[4] != "SEED":
            raise ValueError(f"bad network header: {rows[0]!r}")
        n = int(head[1])
        adj: list[list[int]] = [[] for _ in range(n)]
        for row in rows[1:]:
            if not row.strip():
                continue
            parts = [int(x) for x in row.split()]
            adj[parts[0]] = sorted(parts[1:])
        indptr = np.zeros(n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in adj])
        indices = np.fromiter((v for a in adj for v in a), dtype=np.int64, count=int(indptr[-1]))
        return cls(indptr, indices, family=head[3], seed=int(head[5]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), newline="\n")

    @classmethod
    def load(cls, path: str | Path) -> Network:
        return cls.from_text(Path(path).read_text())

    def validate(self) -> None:
        """Full scan of the invariants; raises ``ValueError`` on violation."""
        n = self.n
        if n < 1:
            raise ValueError("empty network")
        deg = self.degrees
        if deg.min() < 1:
            raise ValueError("node with degree 0")
        src = np.repeat(np.arange(n), deg)
        dst = self.indices
        if np.any(src == dst):
            raise ValueError("self-loop")
        for u in range(n):
            nb = self.neighbors(u)
            if np.any(np.diff(nb) <= 0):
                raise ValueError(f"unsorted or duplicate neighbors at node {u}")
        fwd = set(zip(src.tolist(), dst.tolist()))
        if any((v, u) not in fwd for u, v in fwd):
            raise ValueError("asymmetric adjacency")
        if not _is_connected(self.indptr, self.indices):
            raise ValueError("network is not connected")


@dataclass(frozen=True)
class DegreeStats:
    n_k: dict[int, int]
    n: int
    S: int
    kbar: float
    kbar_rw: float


def degree_stats(net: Network) -> DegreeStats:
    deg = net.degrees
    ks, counts = np.unique(deg, return_counts=True)
    n_k = {int(k): int(c) for k, c in zip(ks, counts)}
    S = int(deg.sum())
    k2 = int((deg.astype(np.int64) ** 2).sum())
    return DegreeStats(n_k=n_k, n=net.n, S=S, kbar=S / net.n, kbar_rw=k2 / S)


# -- configuration model --------------------------------------------------------


def _is_connected(indptr: np.ndarray, indices: np.ndarray) -> bool:
    n = len(indptr) - 1
    if n == 1:
        return True
    data = np.ones(len(indices), dtype=np.int8)
    adj = coo_matrix((data, (np.repeat(np.arange(n), np.diff(indptr)), indices)), shape=(n, n))
    ncomp, _ = connected_components(adj.tocsr(), directed=False)
    return ncomp == 1


def _csr_from_edges(n: int, u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    src = np.concatenate([u, v])
    dst = np.concatenate([v, u])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    return np.cumsum(indptr), dst.astype(np.int64)


def _repair_by_swaps(
    u: np.ndarray, v: np.ndarray, rng: np.random.Generator, budget: int
) -> bool:
    """Double-edge swaps until no self-loops or multi-edges remain (in place)."""
    m = len(u)
    count: Counter = Counter()
    bad = []
    for i in range(m):
        a, b = int(u[i]), int(v[i])
        key = (a, b) if a < b else (b, a)
        count[key] += 1
        if a == b or count[key] > 1:
            bad.append(i)
    attempts = 0
    while bad:
        if attempts >= budget or m < 2:
            return False
        attempts += 1
        pick = int(rng.integers(len(bad)))
        i = bad[pick]
        a, b = int(u[i]), int(v[i])
        ki = (a, b) if a < b else (b, a)
        if a != b and count[ki] == 1:
            bad[pick] = bad[-1]
            bad.pop()
            continue
        j = int(rng.integers(m - 1))
        if j >= i:
            j += 1
        c, d = int(u[j]), int(v[j])
        if rng.random() < 0.5:
            c, d = d, c
        if a == c or b == d:
            continue
        n1 = (a, c) if a < c else (c, a)
        n2 = (b, d) if b < d else (d, b)
        if n1 == n2 or count[n1] or count[n2]:
            continue
        kj = (c, d) if c < d else (d, c)
        count[ki] -= 1
        count[kj] -= 1
        count[n1] += 1
        count[n2] += 1
        u[i], v[i] = a, c
        u[j], v[j] = b, d
    return True


def from_degree_sequence(
    degrees, seed: int = 0, family: str = "custom", meta: dict | None = None
) -> Network:
    """Configuration-model network with exactly the given degree sequence.

    Stubs are matched uniformly at random, self-loops and multi-edges are
    removed by double-edge swaps, and the whole construction is retried on a
    fresh substream if the result is not simple and connected.
    """
    deg = np.asarray(degrees, dtype=np.int64)
    n = len(deg)
    if n < 2:
        raise ValueError("need at least two nodes")
    if deg.min() < 1:
        raise ValueError("every degree must be >= 1")
    if deg.sum() % 2:
        raise ValueError("sum of degrees must be even")
    if deg.max() >= n:
        raise ValueError("max degree must be < N")
    stubs0 = np.repeat(np.arange(n, dtype=np.int64), deg)
    swap_budget = 100 * (len(stubs0) // 2 + 10)
    for attempt in range(RETRY_BUDGET):
        rng = streams.substream(seed, streams.GRAPH, attempt)
        stubs = rng.permutation(stubs0)
        u, v = stubs[0::2].copy(), stubs[1::2].copy()
        if not _repair_by_swaps(u, v, rng, swap_budget):
            continue
        indptr, indices = _csr_from_edges(n, u, v)
        if _is_connected(indptr, indices):
            return Network(indptr, indices, family=family, seed=seed, meta=dict(meta or {}))
    raise GraphGenerationError(
        f"no connected simple graph after {RETRY_BUDGET} attempts (N={n}, S={int(deg.sum())})"
    )


def generate_regular(n: int, k: int, seed: int = 0) -> Network:
    if (n * k) % 2:
        raise ValueError("N*k must be even")
    if k >= n:
        raise ValueError("k must be < N")
    if k < 3:
        raise ValueError("k must be >= 3")
    return from_degree_sequence(np.full(n, k), seed=seed, family="regular", meta={"k": k})


def _fix_zeros_and_parity(deg: np.ndarray, sampler, rng: np.random.Generator) -> np.ndarray:
    deg = deg.copy()
    zeros = np.flatnonzero(deg == 0)
    while len(zeros):
        deg[zeros] = sampler(len(zeros))
        zeros = zeros[deg[zeros] == 0]
    while deg.sum() % 2:
        i = int(rng.integers(len(deg)))
        deg[i] = sampler(1)[0]
        while deg[i] == 0:
            deg[i] = sampler(1)[0]
    return deg


def er_degree_sequence(n: int, kmean: float, rng: np.random.Generator) -> np.ndarray:
    """Degree sequence of a G(n, kmean/(n-1)) graph; isolated nodes get resampled degrees."""
    q = min(1.0, kmean / (n - 1))
    pairs = n * (n - 1) // 2
    m = int(rng.binomial(pairs, q))
    if m == pairs:
        deg = np.full(n, n - 1, dtype=np.int64)
    else:
        codes = rng.choice(pairs, size=m, replace=False)
        # pair code -> (i, j), i < j, row-major over the upper triangle
        rows = np.arange(n, dtype=np.int64)
        starts = rows * (2 * n - rows - 1) // 2
        i = np.searchsorted(starts, codes, side="right") - 1
        j = codes - starts[i] + i + 1
        deg = np.bincount(np.concatenate([i, j]), minlength=n).astype(np.int64)
    nonzero = deg[deg > 0]
    if len(nonzero) == 0:
        raise GraphGenerationError("preliminary graph has no edges")
    return _fix_zeros_and_parity(deg, lambda size: rng.choice(nonzero, size=size), rng)


def generate_er(n: int, kmean: float, seed: int = 0) -> Network:
    if kmean <= 1:
        raise ValueError("kmean must be > 1")
    rng = streams.substream(seed, streams.GRAPH, 10**6)
    deg = er_degree_sequence(n, kmean, rng)
    return from_degree_sequence(deg, seed=seed, family="er", meta={"kmean": kmean})


def _power_law_mean(gamma: float, kmin: int, kmax: int) -> float:
    ks = np.arange(kmin, kmax + 1, dtype=float)
    w = ks**-gamma
    return float((ks * w).sum() / w.sum())


def fit_power_law(n: int, kmean: float, target_gamma: float = 3.0) -> tuple[float, int, int]:
    """(gamma, k_min, k_max) of a power law on [k_min, floor(sqrt(n))] with mean ``kmean``.

    One gamma solves the mean for every admissible k_min; the pair whose
    gamma is closest to ``target_gamma`` is returned.
    """
    kmax = math.isqrt(n)
    best = None
    for kmin in range(1, kmax):
        lo_mean = _power_law_mean(60.0, kmin, kmax)
        hi_mean = _power_law_mean(0.0, kmin, kmax)
        if not lo_mean < kmean < hi_mean:
            continue
        gamma = optimize.brentq(lambda g: _power_law_mean(g, kmin, kmax) - kmean, 0.0, 60.0, xtol=1e-12)
        if abs(_power_law_mean(gamma, kmin, kmax) - kmean) > 0.01 * kmean:
            continue
        if best is None or abs(gamma - target_gamma) < abs(best[0] - target_gamma):
            best = (gamma, kmin, kmax)
    if best is None:
        raise GraphGenerationError(f"no power law on [k_min, {kmax}] has mean {kmean}")
    return best


def scale_free_degree_sequence(
    n: int, kmean: float, rng: np.random.Generator
) -> tuple[np.ndarray, float, int]:
    gamma, kmin, kmax = fit_power_law(n, kmean)
    ks = np.arange(kmin, kmax + 1)
    probs = ks.astype(float) ** -gamma
    probs /= probs.sum()

    def sampler(size: int) -> np.ndarray:
        return rng.choice(ks, size=size, p=probs)

    deg = _fix_zeros_and_parity(sampler(n), sampler, rng)
    return deg, gamma, kmin


def generate_scale_free(n: int, kmean: float, seed: int = 0) -> Network:
    if n < 100:
        raise ValueError("scale-free networks need N >= 100")
    rng = streams.substream(seed, streams.GRAPH, 10**6)
    deg, gamma, kmin = scale_free_degree_sequence(n, kmean, rng)
    meta = {"kmean": kmean, "gamma": gamma, "k_min": kmin, "k_max": math.isqrt(n)}
    return from_degree_sequence(deg, seed=seed, family="sf", meta=meta)
