"""Identifiability checking for observation patterns.

A d x c binary pattern (the columns attributed to one component) satisfies the
*column surplus condition* at rank r when every nonempty proper subset S of
its columns touches at least |S| + r distinct nonzero rows.  A full mixture
mask is certified identifiable by exhibiting r + 1 disjoint groups of
d - r + 1 columns whose patterns all satisfy the condition.

Two independent checkers are provided:

* `check_pattern_exhaustive` — enumerate all proper column subsets (the
  oracle; exponential, capped at 22 columns);
* `check_pattern_flow` — exact polynomial-time check.  Cheap counting
  certificates first rule out most subset sizes, then anchored minimum cuts
  settle the rest: for a fixed column a, the minimum of |N(S)| - |S| over
  subsets S containing a equals maxflow - c on a unit-capacity bipartite
  network where a's source edge is uncapped.  Columns whose minimum is >= r
  can never belong to a violating subset and are removed, shrinking later
  cuts.

Both return a `PatternReport`; a failing report's `witness_columns` always
names a genuinely violating subset (re-checkable with `violates`).
"""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, log

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .model import as_mask
from .seeding import substream

__all__ = [
    "PatternReport",
    "RateBound",
    "violates",
    "check_pattern_exhaustive",
    "check_pattern_flow",
    "verify_partition",
    "search_partition",
    "min_observation_rate",
    "min_column_samples",
]

_EXHAUSTIVE_MAX_COLS = 22
_POP8 = np.array([bin(v).count("1") for v in range(256)], dtype=np.uint8)


@dataclass(frozen=True)
class PatternReport:
    """Verdict of a pattern check.

    On failure `witness_columns` is a violating column subset (indices into
    the checked mask); on a successful partition search/verification
    `witness_partition` holds the r + 1 column groups.  `conclusive` is False
    only when a randomized search exhausted its budget without finding a
    partition — which proves nothing about non-identifiability.
    """

    passed: bool
    method: str
    r: int
    witness_columns: tuple | None = None
    witness_partition: tuple | None = None
    conclusive: bool = True
    note: str = ""


def _check_rank(r) -> int:
    if not isinstance(r, (int, np.integer)) or isinstance(r, bool) or r < 1:
        raise ValueError(f"rank must be a positive integer, got {r!r}")
    return int(r)


def violates(mask, r: int, columns) -> bool:
    """Recount whether the given column subset breaks the surplus condition.

    True when the submatrix on `columns` touches fewer than |columns| + r
    nonzero rows.  Used to audit failure witnesses.
    """
    m = as_mask(mask)
    r = _check_rank(r)
    cols = np.asarray(columns, dtype=np.int64)
    if cols.size == 0:
        raise ValueError("witness subset is empty")
    touched = int(m[:, cols].any(axis=1).sum())
    return touched < cols.size + r


# ---------- exhaustive checker ---------- #


def check_pattern_exhaustive(mask, r: int) -> PatternReport:
    """Check the surplus condition by enumerating every proper column subset.

    Exact for any d but exponential in the column count, hence capped at
    22 columns.  A failing report carries a minimum-cardinality witness.
    """
    m = as_mask(mask)
    r = _check_rank(r)
    d, c = m.shape
    if c > _EXHAUSTIVE_MAX_COLS:
        raise ValueError(
            f"{c} columns exceeds the exhaustive limit of "
            f"{_EXHAUSTIVE_MAX_COLS}; use check_pattern_flow"
        )
    supports = m.sum(axis=0)
    if c == 1:
        ok = supports[0] >= r + 1
        return PatternReport(
            passed=bool(ok),
            method="exhaustive",
            r=r,
            witness_columns=None if ok else (0,),
        )

    colbytes = np.packbits(m, axis=0)  # (ceil(d/8), c)
    nbytes = colbytes.shape[0]
    low = min(c, 16)
    high = c - low

    # OR table and subset sizes over the `low` least-significant columns,
    # built by doubling: entries [2^j, 2^{j+1}) extend entries [0, 2^j).
    ors = np.zeros((1 << low, nbytes), dtype=np.uint8)
    sizes = np.zeros(1 << low, dtype=np.int16)
    for j in range(low):
        half = 1 << j
        ors[half : 2 * half] = ors[:half] | colbytes[:, j]
        sizes[half : 2 * half] = sizes[:half] + 1

    best_size = c + 1
    best_subset = None
    for h in range(1 << high):
        high_or = np.zeros(nbytes, dtype=np.uint8)
        high_size = 0
        for b in range(high):
            if h >> b & 1:
                high_or |= colbytes[:, low + b]
                high_size += 1
        rows = _POP8[ors | high_or].sum(axis=1, dtype=np.int32)
        tot = sizes + high_size
        deficient = rows < tot + r
        if h == 0:
            deficient[0] = False  # empty set
        if h == (1 << high) - 1:
            deficient[-1] = False  # full set is not a proper subset
        if not deficient.any():
            continue
        masked = np.where(deficient, tot, np.int16(c + 1))
        local_best = int(masked.min())
        if local_best < best_size:
            best_size = local_best
            s = int(np.argmin(masked))
            best_subset = tuple(
                [j for j in range(low) if s >> j & 1]
                + [low + b for b in range(high) if h >> b & 1]
            )
            if best_size == 1:
                break

    if best_subset is None:
        return PatternReport(passed=True, method="exhaustive", r=r)
    return PatternReport(
        passed=False, method="exhaustive", r=r, witness_columns=best_subset
    )


# ---------- flow checker ---------- #


def _counting_certificates(m: np.ndarray, supports: np.ndarray, d_eff: int, r: int):
    """Subset sizes in [2, c - 1] not excluded by either counting bound.

    Size t is excluded when (a) for every column a, even the t - 1 columns
    with the smallest pairwise union with a already push |N(S)| past
    t + r - 1, or (b) fewer than d_eff - t - r + 1 rows have t or more zero
    columns (a violating S of size t forces at least that many such rows).
    """
    c = m.shape[1]
    ts = np.arange(2, c)
    if ts.size == 0:
        return ts
    mf = m.astype(np.float64)
    inter = mf.T @ mf
    unions = supports[:, None] + supports[None, :] - inter
    np.fill_diagonal(unions, np.inf)
    unions_sorted = np.sort(unions, axis=1)
    colmin = unions_sorted.min(axis=0)

    zeros_per_row = c - mf.sum(axis=1)
    zr_sorted = np.sort(zeros_per_row)
    z_count = d_eff - np.searchsorted(zr_sorted, ts, side="left")

    union_ok = colmin[ts - 2] > ts + r - 1
    zeros_ok = (d_eff - z_count - ts) >= r
    return ts[~(union_ok | zeros_ok)]


def _bfs_positive(indptr, indices, data, start: int, n_nodes: int) -> np.ndarray:
    seen = np.zeros(n_nodes, dtype=bool)
    seen[start] = True
    frontier = [start]
    while frontier:
        nxt = []
        for u in frontier:
            lo, hi = indptr[u], indptr[u + 1]
            for pos in range(lo, hi):
                if data[pos] > 0:
                    v = indices[pos]
                    if not seen[v]:
                        seen[v] = True
                        nxt.append(v)
        frontier = nxt
    return seen


def _anchored_mincut(col_rows, current, d_eff: int, r: int):
    """min over subsets S of `current` with current[0] in S of |N(S)| - |S|.

    Built as a max-flow: source -> column (capacity 1, anchor uncapped),
    column -> incident rows (uncapped), row -> sink (capacity 1); the minimum
    cut picks S as the uncut source edges, paying |N(S)| at the sink side.
    Returns (value, reachable_columns) where the second entry — the minimal
    minimizer, read off the residual graph — is only computed when the value
    is below r.
    """
    cc = len(current)
    big = cc + d_eff + 1
    sink = cc + d_eff + 1
    n_nodes = sink + 1

    col_caps = np.ones(cc, dtype=np.int32)
    col_caps[0] = big
    frm = [np.zeros(cc, dtype=np.int32)]
    to = [np.arange(1, cc + 1, dtype=np.int32)]
    caps = [col_caps]
    for i, col in enumerate(current):
        rows = col_rows[col]
        frm.append(np.full(rows.size, 1 + i, dtype=np.int32))
        to.append((1 + cc + rows).astype(np.int32))
        caps.append(np.full(rows.size, big, dtype=np.int32))
    frm.append(np.arange(1 + cc, 1 + cc + d_eff, dtype=np.int32))
    to.append(np.full(d_eff, sink, dtype=np.int32))
    caps.append(np.ones(d_eff, dtype=np.int32))

    graph = csr_matrix(
        (np.concatenate(caps), (np.concatenate(frm), np.concatenate(to))),
        shape=(n_nodes, n_nodes),
        dtype=np.int32,
    )
    res = maximum_flow(graph, 0, sink)
    value = int(res.flow_value) - cc
    if value >= r:
        return value, None
    residual = graph - res.flow
    seen = _bfs_positive(
        residual.indptr, residual.indices, residual.data, 0, n_nodes
    )
    reachable = [current[i] for i in range(cc) if seen[1 + i]]
    return value, reachable


def check_pattern_flow(mask, r: int) -> PatternReport:
    """Check the surplus condition exactly in polynomial time.

    Counting certificates dispose of most subset sizes outright; anchored
    minimum cuts then either certify each remaining column (no violating
    subset contains it) or expose a violating subset from the cut itself.
    """
    m = as_mask(mask)
    r = _check_rank(r)
    d, c = m.shape
    supports = m.sum(axis=0)

    small = np.flatnonzero(supports < r + 1)
    if small.size:
        return PatternReport(
            passed=False,
            method="flow",
            r=r,
            witness_columns=(int(small[0]),),
        )
    if c == 1:
        return PatternReport(passed=True, method="flow", r=r)

    nz_rows = m.any(axis=1)
    d_eff = int(nz_rows.sum())
    if c - 1 >= d_eff - r + 1:
        # Too many columns for the available rows: every proper subset of
        # size d_eff - r + 1 already touches at most d_eff rows.
        return PatternReport(
            passed=False,
            method="flow",
            r=r,
            witness_columns=tuple(range(d_eff - r + 1)),
        )

    reduced = m[nz_rows]
    open_sizes = _counting_certificates(reduced, supports, d_eff, r)
    if open_sizes.size == 0:
        return PatternReport(passed=True, method="flow", r=r)
    t_lo = int(open_sizes.min())

    col_rows = [np.flatnonzero(reduced[:, j]) for j in range(c)]
    current = list(range(c))
    removed_any = False
    while len(current) >= max(t_lo, 2):
        value, reachable = _anchored_mincut(col_rows, current, d_eff, r)
        if value >= r:
            current.pop(0)
            removed_any = True
            continue
        if not removed_any and len(reachable) == len(current):
            # The unique minimizer is the full column set, which is not a
            # proper subset; every proper subset containing this column then
            # scores at least value + 1, and the size precheck above
            # guarantees value = r - 1 here.  The column is cleared.
            current.pop(0)
            removed_any = True
            continue
        return PatternReport(
            passed=False,
            method="flow",
            r=r,
            witness_columns=tuple(sorted(int(x) for x in reachable)),
        )
    return PatternReport(passed=True, method="flow", r=r)


# ---------- partitions over a full mask ---------- #


def _group_report(mask_cols: np.ndarray, group: np.ndarray, r: int):
    rep = check_pattern_flow(mask_cols, r)
    if rep.passed:
        return None
    witness = tuple(int(group[i]) for i in rep.witness_columns)
    return witness


def verify_partition(mask, r: int, partition) -> PatternReport:
    """Check that r + 1 disjoint column groups each satisfy the condition.

    Structural defects (wrong group count or size, reused or out-of-range
    columns) raise; a group failing the surplus condition yields a failing
    report whose witness indexes the full mask.
    """
    m = as_mask(mask)
    r = _check_rank(r)
    d, n = m.shape
    group_size = d - r + 1
    groups = [np.asarray(g, dtype=np.int64) for g in partition]
    if len(groups) != r + 1:
        raise ValueError(f"expected r + 1 = {r + 1} groups, got {len(groups)}")
    seen = set()
    for tau, g in enumerate(groups):
        if g.ndim != 1 or g.size != group_size:
            raise ValueError(
                f"group {tau} has {g.size} columns, expected d - r + 1 = "
                f"{group_size}"
            )
        if g.size and (g.min() < 0 or g.max() >= n):
            bad = g[(g < 0) | (g >= n)][0]
            raise ValueError(f"group {tau}: column {bad} out of range")
        for col in map(int, g):
            if col in seen:
                raise ValueError(f"column {col} appears in more than one group")
            seen.add(col)
    for tau, g in enumerate(groups):
        witness = _group_report(m[:, g], g, r)
        if witness is not None:
            return PatternReport(
                passed=False,
                method="flow",
                r=r,
                witness_columns=witness,
                note=f"group {tau} fails",
            )
    return PatternReport(
        passed=True,
        method="flow",
        r=r,
        witness_partition=tuple(tuple(int(x) for x in sorted(g)) for g in groups),
    )


def search_partition(mask, r: int, budget: int = 4, seed: int = 0) -> PatternReport:
    """Look for r + 1 disjoint passing column groups of size d - r + 1.

    One greedy attempt (columns dealt round-robin by decreasing support)
    followed by up to `budget` uniformly random regroupings.  Success is a
    proof of identifiability; exhausting the budget is reported with
    `conclusive=False` — it proves nothing, since the search is heuristic.
    """
    m = as_mask(mask)
    r = _check_rank(r)
    d, n = m.shape
    if budget < 0:
        raise ValueError(f"budget must be >= 0, got {budget}")
    group_size = d - r + 1
    need = (r + 1) * group_size
    supports = m.sum(axis=0)
    eligible = np.flatnonzero(supports >= r + 1)
    if eligible.size < need:
        raise ValueError(
            f"need at least (r + 1)(d - r + 1) = {need} columns with "
            f">= r + 1 = {r + 1} observed entries; found {eligible.size}"
        )

    best_passed = -1
    best_witness = None
    for attempt in range(budget + 1):
        if attempt == 0:
            order = eligible[np.lexsort((eligible, -supports[eligible]))]
            chosen = order[:need]
            groups = [chosen[tau :: r + 1] for tau in range(r + 1)]
        else:
            perm = substream(seed, "partition", attempt).permutation(eligible)
            chosen = perm[:need]
            groups = [
                chosen[tau * group_size : (tau + 1) * group_size]
                for tau in range(r + 1)
            ]
        n_passed = 0
        witness = None
        for g in groups:
            w = _group_report(m[:, g], g, r)
            if w is None:
                n_passed += 1
            elif witness is None:
                witness = w
        if n_passed == r + 1:
            return PatternReport(
                passed=True,
                method="flow",
                r=r,
                witness_partition=tuple(
                    tuple(int(x) for x in sorted(g)) for g in groups
                ),
                note=f"partition found on attempt {attempt} "
                     f"({'greedy' if attempt == 0 else 'random'})",
            )
        if n_passed > best_passed:
            best_passed = n_passed
            best_witness = witness

    return PatternReport(
        passed=False,
        method="flow",
        r=r,
        witness_columns=best_witness,
        conclusive=False,
        note=(
            f"no passing partition in {budget + 1} attempts "
            f"(best attempt: {best_passed}/{r + 1} groups); heuristic "
            f"search failure is not a proof of non-identifiability"
        ),
    )


# ---------- sampling-rate bounds ---------- #


@dataclass(frozen=True)
class RateBound:
    """Minimum Bernoulli observation rate with its applicability flag."""

    p: float
    vacuous: bool


def min_observation_rate(d: int, r: int, eps: float) -> RateBound:
    """Observation rate above which random patterns are identifiable with
    probability at least 1 - 2 (r + 1) eps, valid for r <= d / 6.

    The rate is (2 / d) * max(2 r, 12 (ln(d / eps) + 1)); values above 1
    are possible for small d and are flagged vacuous.
    """
    r = _check_rank(r)
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    if 6 * r > d:
        raise ValueError(f"rate bound requires r <= d / 6; got r={r}, d={d}")
    p = (2.0 / d) * max(2.0 * r, 12.0 * (log(d / eps) + 1.0))
    return RateBound(p=float(p), vacuous=bool(p > 1.0))


def min_column_samples(d: int, r: int, eps: float) -> int:
    """Per-column observation count for the fixed-m sampling variant:
    ceil(max(2 r, 12 (ln(d / eps) + 1))).

    May exceed d for small d; callers drawing masks must check that.
    """
    r = _check_rank(r)
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must be in (0, 1), got {eps}")
    return int(ceil(max(2.0 * r, 12.0 * (log(d / eps) + 1.0))))
