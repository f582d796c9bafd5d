"""Search mechanisms: the simple random-walk baseline and the four partial-walk variants.

Mechanism names:

========  ============  =====================
name      policy        partial walks
========  ============  =====================
cf-rw     choose-first  random walks
cf-saw    choose-first  self-avoiding walks
kf-rw     check-first   random walks
kf-saw    check-first   self-avoiding walks
========  ============  =====================

Choose-first walks register nodes ``0..s-1``; check-first walks register
``1..s`` and the source node is checked directly before the first decision.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import _kernels as K
from . import streams
from .filters import bloom_params_for
from .graph import Network
from .walker import KINDS, FreshWalks, WalkTable

__all__ = [
    "Mechanism",
    "MechanismMismatch",
    "Placement",
    "SearchOutcome",
    "Outcomes",
    "rw_search",
    "pw_search",
    "decompose_total_walk",
    "decompose_lengths",
    "search_cost",
    "draw_placements",
    "run_searches",
    "default_cutoff",
]

FOUND = "found"
UNFINISHED = "unfinished"


class MechanismMismatch(ValueError):
    """Walk source built for a different walk kind or registration range."""


@dataclass(frozen=True)
class Mechanism:
    policy: str  # "choose" | "check"
    kind: str  # "rw" | "saw"

    _NAMES = {"cf-rw": ("choose", "rw"), "cf-saw": ("choose", "saw"),
              "kf-rw": ("check", "rw"), "kf-saw": ("check", "saw")}

    def __post_init__(self) -> None:
        if self.policy not in ("choose", "check") or self.kind not in KINDS:
            raise ValueError(f"bad mechanism ({self.policy}, {self.kind})")

    @classmethod
    def from_name(cls, name: str) -> Mechanism:
        try:
            return cls(*cls._NAMES[name])
        except KeyError:
            raise ValueError(f"unknown mechanism {name!r}; expected one of {sorted(cls._NAMES)}") from None

    @property
    def name(self) -> str:
        return ("cf-" if self.policy == "choose" else "kf-") + self.kind

    @property
    def registration_range(self) -> str:
        return "first" if self.policy == "choose" else "last"


@dataclass(frozen=True)
class Placement:
    resource: int
    source: int


@dataclass(frozen=True)
class SearchOutcome:
    length: int
    jumps: int = 0
    unnecessary: int = 0
    trailing: int = 0
    partial_walks: int = 0
    status: str = FOUND
    total_length: int | None = None

    @property
    def found(self) -> bool:
        return self.status == FOUND


def default_cutoff(n: int) -> int:
    return 100 * n


def rw_search(
    net: Network,
    placement: Placement,
    rng: np.random.Generator,
    hop_cutoff: int | None = None,
    record: bool = False,
):
    """Simple random-walk search; with ``record=True`` also returns the walk.

    All hops count as trailing steps of a single walk, so the hop identity
    ``length == jumps + unnecessary + trailing`` holds here too.
    """
    cutoff = default_cutoff(net.n) if hop_cutoff is None else int(hop_cutoff)
    if cutoff < 1:
        raise ValueError("hop_cutoff must be >= 1")
    if record:
        status, walk = K.rw_search_record(net.indptr, net.indices, placement.source,
                                          placement.resource, cutoff, rng)
        hops = len(walk) - 1
    else:
        status, hops = K.rw_search(net.indptr, net.indices, placement.source,
                                   placement.resource, cutoff, rng)
    out = SearchOutcome(
        length=int(hops), trailing=int(hops),
        status=FOUND if status == K.STATUS_FOUND else UNFINISHED,
        total_length=int(hops),
    )
    return (out, walk) if record else out


class _Scratch:
    """Per-run kernel buffers (stamp arrays keep counting across searches)."""

    def __init__(self, n: int, s: int, w: int, words: int) -> None:
        self.buf = np.zeros((w, s + 1), dtype=np.int32)
        self.buf_bits = np.zeros((w, words), dtype=np.uint64)
        self.visited = np.zeros(n, dtype=np.int64)
        self.stamp = np.zeros(1, dtype=np.int64)
        self.marks = np.zeros(n, dtype=np.int64)
        self.mark = np.zeros(1, dtype=np.int64)


WalkSource = Union[WalkTable, FreshWalks]


class _PWRunner:
    """Binds a network, mechanism and walk source to the search kernel."""

    def __init__(self, net: Network, walks: WalkSource, mechanism: Mechanism, cutoff: int) -> None:
        if walks.kind != mechanism.kind or walks.registration_range != mechanism.registration_range:
            raise MechanismMismatch(
                f"{mechanism.name} needs kind={mechanism.kind}, range={mechanism.registration_range}; "
                f"got kind={walks.kind}, range={walks.registration_range}"
            )
        if cutoff < 1:
            raise ValueError("hop_cutoff must be >= 1")
        self.net = net
        self.mechanism = mechanism
        self.cutoff = int(cutoff)
        cfg = walks.filter_cfg
        self.cfg = cfg
        self.s, self.w = walks.s, walks.w
        self.fresh = isinstance(walks, FreshWalks)
        self.fmode = K.FILTER_BLOOM if cfg.mode == "bloom" else K.FILTER_IDEAL
        if self.fresh:
            m, h = bloom_params_for(self.s, cfg.p) if cfg.mode == "bloom" else (0, 0)
            words = (m + 63) // 64
            self.table = np.zeros((1, 1, self.s + 1), dtype=np.int32)
            self.table_bits = np.zeros((1, 1, words), dtype=np.uint64)
            self.memoize = False
            self.detect_loops = False
        else:
            if walks.n != net.n:
                raise ValueError("walk table and network sizes differ")
            m, h = walks.bloom_m, walks.bloom_h
            words = walks.bits.shape[2]
            self.table = walks.nodes
            self.table_bits = walks.bits
            self.memoize = bool(cfg.memoize)
            deterministic = cfg.mode == "bloom" or cfg.memoize or cfg.p in (0.0, 1.0)
            self.detect_loops = self.w == 1 and deterministic
        self.m, self.h = m, h
        self.scratch = _Scratch(net.n, self.s, self.w, words)

    def __call__(self, source: int, resource: int, walk_rng, aux_rng) -> tuple[int, int, int, int, int]:
        sc = self.scratch
        return K.pw_search(
            self.net.indptr, self.net.indices, source, resource,
            self.s, self.w, KINDS[self.mechanism.kind],
            K.POLICY_CHOOSE if self.mechanism.policy == "choose" else K.POLICY_CHECK,
            self.fresh, self.table,
            self.fmode, float(self.cfg.p), self.memoize, np.uint64(self.cfg.seed),
            self.table_bits, self.m, self.h,
            self.cutoff, self.detect_loops,
            walk_rng, aux_rng, sc.buf, sc.buf_bits, sc.visited, sc.stamp, sc.marks, sc.mark,
        )


def _outcome(res: tuple[int, int, int, int, int], s: int) -> SearchOutcome:
    status, J, U, T, P = (int(x) for x in res)
    found = status == K.STATUS_FOUND
    return SearchOutcome(
        length=J + U + T, jumps=J, unnecessary=U, trailing=T, partial_walks=P,
        status=FOUND if found else UNFINISHED,
        total_length=P * s + T if found else None,
    )


def pw_search(
    net: Network,
    walks: WalkSource,
    mechanism: Mechanism | str,
    placement: Placement,
    rng: np.random.Generator,
    hop_cutoff: int | None = None,
    aux_rng: np.random.Generator | None = None,
) -> SearchOutcome:
    """One partial-walk search.

    ``rng`` drives walk generation (fresh mode); ``aux_rng`` drives filter
    false positives and walk selection and defaults to ``rng``.
    """
    if isinstance(mechanism, str):
        mechanism = Mechanism.from_name(mechanism)
    cutoff = default_cutoff(net.n) if hop_cutoff is None else int(hop_cutoff)
    runner = _PWRunner(net, walks, mechanism, cutoff)
    res = runner(placement.source, placement.resource, rng, rng if aux_rng is None else aux_rng)
    return _outcome(res, walks.s)


def decompose_total_walk(
    recorded_walk, s: int, p: float, resource: int, rng: np.random.Generator
) -> SearchOutcome:
    """Cut a recorded random-walk search into pieces of ``s`` hops and replay it
    as a choose-first search with filter false-positive probability ``p``."""
    walk = np.asarray(recorded_walk)
    hits = np.flatnonzero(walk == resource)
    if len(hits) == 0:
        raise ValueError("recorded walk never visits the resource node")
    L = int(hits[0])
    if L != len(walk) - 1:
        raise ValueError("recorded walk must end at its first visit to the resource")
    P, T = divmod(L, s)
    fp = int((rng.random(P) < p).sum())
    return SearchOutcome(length=(P - fp) + fp * s + T, jumps=P - fp, unnecessary=fp * s,
                         trailing=T, partial_walks=P, total_length=L)


@dataclass
class Outcomes:
    """Per-trial results of a batch, indexed by trial number."""

    status: np.ndarray
    length: np.ndarray
    jumps: np.ndarray
    unnecessary: np.ndarray
    trailing: np.ndarray
    partial_walks: np.ndarray
    total_length: np.ndarray
    sources: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    resources: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @classmethod
    def empty(cls, trials: int) -> Outcomes:
        z = lambda: np.zeros(trials, dtype=np.int64)  # noqa: E731
        return cls(z(), z(), z(), z(), z(), z(), z(), z(), z())

    def __len__(self) -> int:
        return len(self.status)

    @property
    def found(self) -> np.ndarray:
        return self.status == K.STATUS_FOUND

    @property
    def unfinished_fraction(self) -> float:
        return float((~self.found).mean()) if len(self) else 0.0

    def found_lengths(self) -> np.ndarray:
        return self.length[self.found]

    def mean(self) -> float:
        x = self.found_lengths()
        return float(x.mean()) if len(x) else float("nan")

    def outcome(self, i: int) -> SearchOutcome:
        found = bool(self.status[i] == K.STATUS_FOUND)
        return SearchOutcome(
            length=int(self.length[i]), jumps=int(self.jumps[i]), unnecessary=int(self.unnecessary[i]),
            trailing=int(self.trailing[i]), partial_walks=int(self.partial_walks[i]),
            status=FOUND if found else UNFINISHED,
            total_length=int(self.total_length[i]) if found else None,
        )


def decompose_lengths(total_lengths, s: int, p: float, rng: np.random.Generator) -> Outcomes:
    """Vectorized :func:`decompose_total_walk` over an array of total-walk lengths."""
    L = np.asarray(total_lengths, dtype=np.int64)
    P, T = np.divmod(L, s)
    fp = rng.binomial(P, p)
    out = Outcomes.empty(len(L))
    out.jumps[:] = P - fp
    out.unnecessary[:] = fp * s
    out.trailing[:] = T
    out.partial_walks[:] = P
    out.length[:] = out.jumps + out.unnecessary + T
    out.total_length[:] = L
    return out


def search_cost(length: float | SearchOutcome, w: int, b: float, s: int) -> float:
    """Average messages per search when each node issues ``b`` searches per table build."""
    if b < 1:
        raise ValueError("b must be >= 1")
    if isinstance(length, SearchOutcome):
        length = length.length
    return (length + 1) + (w / b) * (s + 1)


def draw_placements(n: int, trials: int, master_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """(sources, resources), uniform on ``[0, n)``; trial ``i`` does not depend on ``trials``."""
    pairs = streams.substream(master_seed, streams.PLACEMENT).integers(n, size=(trials, 2))
    return pairs[:, 0].copy(), pairs[:, 1].copy()


def run_searches(
    net: Network,
    mechanism: Mechanism | str,
    trials: int,
    master_seed: int,
    walks: WalkSource | None = None,
    hop_cutoff: int | None = None,
) -> Outcomes:
    """Run ``trials`` independent searches; ``mechanism="rw"`` is the baseline.

    Trial ``i`` uses placement ``i`` and walk/aux substreams ``i`` of
    ``master_seed``, so results are identical however trials are scheduled.
    """
    cutoff = default_cutoff(net.n) if hop_cutoff is None else int(hop_cutoff)
    sources, resources = draw_placements(net.n, trials, master_seed)
    out = Outcomes.empty(trials)
    out.sources[:] = sources
    out.resources[:] = resources
    if mechanism == "rw":
        for i in range(trials):
            walk_rng = streams.substream(master_seed, streams.WALK, i)
            status, hops = K.rw_search(net.indptr, net.indices, sources[i], resources[i], cutoff, walk_rng)
            out.status[i] = status
            out.length[i] = out.trailing[i] = out.total_length[i] = hops
        return out
    if isinstance(mechanism, str):
        mechanism = Mechanism.from_name(mechanism)
    if walks is None:
        raise ValueError("partial-walk mechanisms need a walk table or FreshWalks")
    runner = _PWRunner(net, walks, mechanism, cutoff)
    s = walks.s
    for i in range(trials):
        walk_rng, aux_rng = streams.trial_streams(master_seed, i)
        status, J, U, T, P = runner(sources[i], resources[i], walk_rng, aux_rng)
        out.status[i] = status
        out.jumps[i], out.unnecessary[i], out.trailing[i], out.partial_walks[i] = J, U, T, P
        out.length[i] = J + U + T
        out.total_length[i] = P * s + T
    return out
