"""Numba kernels for the hot loops: walk stepping, table construction and searches.

Everything here works on flat arrays (CSR adjacency, ``int32`` walk tables,
``uint64`` Bloom words).  The public modules wrap these with typed objects.
"""
from __future__ import annotations

import numpy as np
from numba import njit

KIND_RW = 0
KIND_SAW = 1

RANGE_FIRST = 0
RANGE_LAST = 1

POLICY_CHOOSE = 0
POLICY_CHECK = 1

FILTER_IDEAL = 0
FILTER_BLOOM = 1

STATUS_FOUND = 0
STATUS_UNFINISHED = 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_LOW32 = np.uint64(0xFFFFFFFF)


# -- hashing ------------------------------------------------------------------


@njit(cache=True)
def mix64(z):
    """splitmix64 finalizer."""
    z = np.uint64(z)
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def keyed_hash(key, x):
    return mix64(mix64(np.uint64(key) + _GOLDEN) ^ (np.uint64(x) * _GOLDEN))


@njit(cache=True)
def hash_unit(h):
    # top 53 bits -> [0, 1)
    return np.float64(np.uint64(h) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True)
def bloom_insert(bits, seed, m, h, x):
    hv = keyed_hash(seed, x)
    h1 = hv & _LOW32
    h2 = hv >> np.uint64(32)
    mm = np.uint64(m)
    for i in range(h):
        pos = (h1 + np.uint64(i) * h2) % mm
        bits[pos >> np.uint64(6)] |= np.uint64(1) << (pos & np.uint64(63))


@njit(cache=True)
def bloom_query(bits, seed, m, h, x):
    hv = keyed_hash(seed, x)
    h1 = hv & _LOW32
    h2 = hv >> np.uint64(32)
    mm = np.uint64(m)
    for i in range(h):
        pos = (h1 + np.uint64(i) * h2) % mm
        if (bits[pos >> np.uint64(6)] >> (pos & np.uint64(63))) & np.uint64(1) == 0:
            return False
    return True


# -- stepping -----------------------------------------------------------------


@njit(cache=True)
def rw_step(indptr, indices, cur, rng):
    lo = indptr[cur]
    d = indptr[cur + 1] - lo
    return indices[lo + np.int64(rng.random() * d)]


@njit(cache=True)
def saw_step(indptr, indices, cur, visited, stamp, rng):
    """Uniform over neighbors with ``visited[v] != stamp``; uniform over all if none."""
    lo = indptr[cur]
    hi = indptr[cur + 1]
    free = 0
    for e in range(lo, hi):
        if visited[indices[e]] != stamp:
            free += 1
    if free == 0:
        return indices[lo + np.int64(rng.random() * (hi - lo))]
    r = np.int64(rng.random() * free)
    for e in range(lo, hi):
        v = indices[e]
        if visited[v] != stamp:
            if r == 0:
                return v
            r -= 1
    return indices[hi - 1]  # unreachable


@njit(cache=True)
def generate_walk(indptr, indices, start, s, kind, rng, visited, stamp_box, out):
    """Fill ``out[0..s]`` with a walk of ``s`` hops from ``start``."""
    out[0] = start
    cur = start
    if kind == KIND_RW:
        for t in range(1, s + 1):
            cur = rw_step(indptr, indices, cur, rng)
            out[t] = cur
    else:
        stamp_box[0] += 1
        stamp = stamp_box[0]
        visited[cur] = stamp
        for t in range(1, s + 1):
            cur = saw_step(indptr, indices, cur, visited, stamp, rng)
            visited[cur] = stamp
            out[t] = cur


@njit(cache=True)
def fill_bloom(walk, lo, hi, bits, seed, m, h):
    bits[:] = 0
    for t in range(lo, hi + 1):
        bloom_insert(bits, seed, m, h, walk[t])


@njit(cache=True)
def find_in_range(walk, lo, hi, resource):
    for t in range(lo, hi + 1):
        if walk[t] == resource:
            return t
    return -1


# -- searches -----------------------------------------------------------------


@njit(cache=True, nogil=True)
def rw_search(indptr, indices, source, resource, cutoff, rng):
    """Simple random-walk search. Returns ``(status, hops)``."""
    if source == resource:
        return STATUS_FOUND, 0
    cur = source
    n = 0
    while n < cutoff:
        cur = rw_step(indptr, indices, cur, rng)
        n += 1
        if cur == resource:
            return STATUS_FOUND, n
    return STATUS_UNFINISHED, n


@njit(cache=True)
def rw_search_record(indptr, indices, source, resource, cutoff, rng):
    """As :func:`rw_search` but also returns the visited node sequence."""
    buf = np.empty(1024, dtype=np.int64)
    buf[0] = source
    cur = source
    n = 0
    status = STATUS_FOUND
    if source != resource:
        status = STATUS_UNFINISHED
        while n < cutoff:
            cur = rw_step(indptr, indices, cur, rng)
            n += 1
            if n >= buf.shape[0]:
                grown = np.empty(buf.shape[0] * 2, dtype=np.int64)
                grown[: buf.shape[0]] = buf
                buf = grown
            buf[n] = cur
            if cur == resource:
                status = STATUS_FOUND
                break
    return status, buf[: n + 1].copy()


@njit(cache=True)
def _is_positive(walk, pos, resource, fmode, p, memoize, memo_key, bits, bseed, bm, bh, aux_rng):
    if fmode == FILTER_BLOOM:
        return bloom_query(bits, bseed, bm, bh, resource)
    if pos >= 0:
        return True
    if memoize:
        return hash_unit(keyed_hash(memo_key, resource)) < p
    return aux_rng.random() < p


@njit(cache=True, nogil=True)
def pw_search(
    indptr, indices, source, resource,
    s, w, kind, policy, fresh, table,
    fmode, p, memoize, filter_seed, table_bits, bloom_m, bloom_h,
    cutoff, detect_loops,
    walk_rng, aux_rng, buf, buf_bits, visited, stamp_box, marks, mark_box,
):
    """One partial-walk search.

    Returns ``(status, J, U, T, P)``.  ``fresh`` generates every walk on
    demand into ``buf``; otherwise walks are read from ``table[node, i]``.
    ``detect_loops`` ends a search as soon as a decision node repeats, valid
    only when every decision is deterministic (reuse mode, w == 1).
    """
    lo = 0
    hi = s - 1
    if policy == POLICY_CHECK:
        lo = 1
        hi = s
    J = 0
    U = 0
    P = 0
    if policy == POLICY_CHECK and source == resource:
        return STATUS_FOUND, 0, 0, 0, 0
    mark_box[0] += 1
    mark = mark_box[0]
    npos = np.empty(w, dtype=np.int64)
    ppos = np.empty(w, dtype=np.bool_)
    cur = source
    while True:
        if detect_loops:
            if marks[cur] == mark:
                return STATUS_UNFINISHED, J, U, 0, P
            marks[cur] = mark
        if policy == POLICY_CHOOSE:
            if fresh:
                idx = 0
                walk = buf[0]
                generate_walk(indptr, indices, cur, s, kind, walk_rng, visited, stamp_box, walk)
                bits = buf_bits[0]
                if fmode == FILTER_BLOOM:
                    fill_bloom(walk, lo, hi, bits, filter_seed, bloom_m, bloom_h)
            else:
                idx = 0
                if w > 1:
                    idx = np.int64(aux_rng.random() * w)
                walk = table[cur, idx]
                bits = table_bits[cur, idx]
            pos = find_in_range(walk, lo, hi, resource)
            memo_key = keyed_hash(filter_seed, cur * w + idx)
            positive = _is_positive(walk, pos, resource, fmode, p, memoize, memo_key,
                                    bits, filter_seed, bloom_m, bloom_h, aux_rng)
        else:
            npositive = 0
            for i in range(w):
                if fresh:
                    walk = buf[i]
                    generate_walk(indptr, indices, cur, s, kind, walk_rng, visited, stamp_box, walk)
                    bits = buf_bits[i]
                    if fmode == FILTER_BLOOM:
                        fill_bloom(walk, lo, hi, bits, filter_seed, bloom_m, bloom_h)
                else:
                    walk = table[cur, i]
                    bits = table_bits[cur, i]
                npos[i] = find_in_range(walk, lo, hi, resource)
                memo_key = keyed_hash(filter_seed, cur * w + i)
                ppos[i] = _is_positive(walk, npos[i], resource, fmode, p, memoize, memo_key,
                                       bits, filter_seed, bloom_m, bloom_h, aux_rng)
                if ppos[i]:
                    npositive += 1
            if npositive > 0:
                r = np.int64(aux_rng.random() * npositive)
                idx = 0
                for i in range(w):
                    if ppos[i]:
                        if r == 0:
                            idx = i
                            break
                        r -= 1
            else:
                idx = 0
                if w > 1:
                    idx = np.int64(aux_rng.random() * w)
            pos = npos[idx]
            positive = ppos[idx]
            if fresh:
                walk = buf[idx]
            else:
                walk = table[cur, idx]

        if positive and pos >= 0:
            if J + U + pos > cutoff:
                return STATUS_UNFINISHED, J, U, 0, P
            return STATUS_FOUND, J, U, pos, P
        if positive:
            U += s
        else:
            J += 1
        P += 1
        cur = walk[s]
        if J + U > cutoff:
            return STATUS_UNFINISHED, J, U, 0, P



@njit(cache=True)
def fill_table_blooms(table, lo, hi, bits, seed, m, h):
    n, w = table.shape[0], table.shape[1]
    for u in range(n):
        for i in range(w):
            fill_bloom(table[u, i], lo, hi, bits[u, i], seed, m, h)
