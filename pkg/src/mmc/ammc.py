"""Alternating recovery of a mixture of low-rank matrices.

One outer iteration is: (1) *cluster* — for every (component, column) pair,
greedily erase the observed coordinates least consistent with the component's
current subspace until the remainder fits, then hand each observed entry to
the component reconstructing it best; (2) *complete* — run low-rank
completion per component on the entries it received and refresh its subspace.
The loop stops when the assignment masks repeat exactly, or after
``max_outer_iters`` (reported, not raised: a run stuck in a local minimum is
an outcome, not an error).

The erasure inner loop is the hot path.  It is evaluated for all lanes
(component x column pairs) simultaneously; each removal updates the inverse
Gram matrix by a rank-one (Sherman-Morrison) step, with periodic fresh
refactorizations to cap floating-point drift.  `erase` runs the same engine
one lane at a time with a refresh every step, i.e. textbook arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil

import numpy as np

from .lrmc import CompletionResult, LrmcOptions, complete_lowrank, leading_subspace
from .model import AssignmentMasks, ObservedMixture, as_matrix
from .seeding import substream

__all__ = [
    "AmmcOptions",
    "ClusterStepResult",
    "CompleteStepResult",
    "ClusterState",
    "AmmcResult",
    "erase",
    "estimate_coefficient",
    "cluster_step",
    "complete_step",
    "run_ammc",
    "verify_mixture",
]

_REFRESH_EVERY = 64
_DEGENERATE_DEN = 1e-12
_DEFICIENT_REL = 1e-10
_RIDGE = 1e-10
_BASIS_TOL = 1e-8
_STUCK_RETRIES = 8
_TRUSTED_FRACTION = 0.5


@dataclass(frozen=True)
class AmmcOptions:
    """Knobs for the alternating loop.

    `erasure_tol` is the relative residual gap below which a column is
    declared consistent with a subspace; `min_keep` floors the erasure at
    max(rank, min_keep) coordinates.  `noise_sigma` (a squared threshold) and
    `assignment_cap` both demote entries to outliers: the former when no
    component reconstructs an entry within sigma^2 in squared error, the
    latter keeping only the cap best entries per component per column.
    `restarts` reruns each erasure from random half-size subsets, keeping the
    smallest final gap; independently, lanes frozen at the keep floor retry
    themselves a few times whenever most lanes found a consistent subset
    (see cluster_step).
    """

    k: int
    rank: int
    max_outer_iters: int = 100
    erasure_tol: float = 1e-9
    min_keep: int | None = None
    assignment_cap: int | None = None
    noise_sigma: float | None = None
    restarts: int = 0
    lrmc: LrmcOptions | None = None
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.max_outer_iters < 1:
            raise ValueError(
                f"max_outer_iters must be >= 1, got {self.max_outer_iters}"
            )
        if not self.erasure_tol > 0:
            raise ValueError(f"erasure_tol must be > 0, got {self.erasure_tol}")
        if self.min_keep is None:
            object.__setattr__(self, "min_keep", self.rank)
        elif self.min_keep < self.rank:
            raise ValueError(
                f"min_keep must be >= rank = {self.rank}, got {self.min_keep}"
            )
        if self.assignment_cap is not None and self.assignment_cap < 1:
            raise ValueError(
                f"assignment_cap must be >= 1, got {self.assignment_cap}"
            )
        if self.noise_sigma is not None and not self.noise_sigma > 0:
            raise ValueError(
                f"noise_sigma must be > 0, got {self.noise_sigma}"
            )
        if self.restarts < 0:
            raise ValueError(f"restarts must be >= 0, got {self.restarts}")
        if self.lrmc is None:
            object.__setattr__(self, "lrmc", LrmcOptions(rank=self.rank))
        elif self.lrmc.rank != self.rank:
            raise ValueError(
                f"lrmc rank {self.lrmc.rank} differs from mixture rank "
                f"{self.rank}"
            )


# ---------- batched erasure engine ---------- #


def _lanes_refresh(bases, x, active):
    """Fresh inverse-Gram state for every lane.

    Returns (H, b, alpha, beta, c0): H = (B^T B)^-1 over active coordinates,
    b = B^T x, alpha_i = u_i^T H u_i and beta_i = u_i^T H b for all
    coordinates i (rows u_i of the basis), c0 = b^T H b = ||P x||^2.
    Singular Grams get a small ridge so the lane keeps functioning.
    """
    af = active.astype(np.float64)
    grams = np.einsum("ld,ldr,lds->lrs", af, bases, bases, optimize=True)
    b = np.einsum("ld,ldr->lr", af * x, bases, optimize=True)
    eig = np.linalg.eigvalsh(grams)
    bad = eig[:, 0] <= _DEFICIENT_REL * np.maximum(eig[:, -1], np.finfo(float).tiny)
    if bad.any():
        r = bases.shape[2]
        grams = grams + bad[:, None, None] * (_RIDGE * np.eye(r))
    h = np.linalg.inv(grams)
    alpha = np.einsum("ldr,lrs,lds->ld", bases, h, bases, optimize=True)
    beta = np.einsum("ldr,lrs,ls->ld", bases, h, b, optimize=True)
    c0 = np.einsum("lr,lrs,ls->l", b, h, b, optimize=True)
    return h, b, alpha, beta, c0


def _relative_gap(snorm, c0):
    """(||x|| - ||P x||) / ||x|| with zero vectors mapped to gap 0."""
    xn = np.sqrt(np.maximum(snorm, 0.0))
    pn = np.sqrt(np.maximum(c0, 0.0))
    return np.where(xn > np.finfo(float).tiny, (xn - pn) / np.maximum(xn, 1.0e-300), 0.0)


def _erase_lanes(bases, x, active0, floor, tol, refresh_every=_REFRESH_EVERY):
    """Run the greedy erasure on every lane until each freezes.

    bases: (L, d, r); x, active0: (L, d).  A lane freezes when its relative
    gap drops to tol or its active count reaches `floor`.  Returns the final
    active masks, final gaps, and per-lane degeneracy flags (no coordinate
    could be removed without a singular Gram).
    """
    lanes, d = x.shape
    active = active0.copy()
    alive = np.ones(lanes, dtype=bool)
    sizes = active.sum(axis=1)
    snorm = np.einsum("ld,ld->l", active * x, x)
    degenerate = np.zeros(lanes, dtype=bool)
    h = b = alpha = beta = c0 = None
    steps_since_refresh = refresh_every  # force refresh on entry

    while True:
        if steps_since_refresh >= refresh_every:
            h, b, alpha, beta, c0 = _lanes_refresh(bases, x, active)
            steps_since_refresh = 0

        gaps = _relative_gap(snorm, c0)
        alive &= ~((gaps <= tol) | (sizes <= floor))
        if not alive.any():
            break

        den = 1.0 - alpha
        safe = np.where(den > _DEGENERATE_DEN, den, np.inf)
        resid = beta - x * alpha
        proj_sq = c0[:, None] - 2.0 * x * beta + x * x * alpha + resid * resid / safe
        scores = np.sqrt(np.maximum(proj_sq, 0.0)) - np.sqrt(
            np.maximum(snorm[:, None] - x * x, 0.0)
        )
        scores = np.where(active & (den > _DEGENERATE_DEN), scores, -np.inf)

        pick = np.argmax(scores, axis=1)
        stuck = alive & ~np.isfinite(scores[np.arange(lanes), pick])
        if stuck.any():
            degenerate |= stuck
            alive &= ~stuck
            if not alive.any():
                break

        lane_ids = np.arange(lanes)
        x_star = x[lane_ids, pick]
        a_star = alpha[lane_ids, pick]
        b_star = beta[lane_ids, pick]
        u_star = np.take_along_axis(bases, pick[:, None, None], axis=1)[:, 0, :]
        v = np.matmul(h, u_star[:, :, None])[:, :, 0]
        den_star = np.maximum(1.0 - a_star, _DEGENERATE_DEN)
        w = np.matmul(bases, v[:, :, None])[:, :, 0]

        upd = alive.astype(np.float64)
        b = b - (upd * x_star)[:, None] * u_star
        vb = np.einsum("lr,lr->l", v, b)
        c0 = c0 + upd * (-2.0 * x_star * b_star + x_star * x_star * a_star + vb * vb / den_star)
        beta = beta + (upd * 1.0)[:, None] * w * ((vb / den_star) - x_star)[:, None]
        alpha = alpha + (upd / den_star)[:, None] * w * w
        h = h + (upd / den_star)[:, None, None] * (v[:, :, None] * v[:, None, :])
        snorm = snorm - upd * x_star * x_star
        live = np.flatnonzero(alive)
        active[live, pick[live]] = False
        sizes = sizes - alive.astype(np.int64)
        steps_since_refresh += 1

    # Exact final projections for reporting.
    _, _, _, _, c0 = _lanes_refresh(bases, x, active)
    gaps = _relative_gap(np.einsum("ld,ld->l", active * x, x), c0)
    return active, gaps, degenerate


def _random_starts(active, floor, rng):
    """Random per-lane subsets of the observed coordinates.

    Each lane keeps min(m, max(ceil(m / 2), floor)) of its m observed
    coordinates, chosen uniformly, as a fresh starting point for the erasure.
    """
    lanes, d = active.shape
    keys = rng.random(active.shape)
    keys[~active] = np.inf
    order = np.argsort(keys, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(
        ranks, order, np.broadcast_to(np.arange(d), (lanes, d)).copy(), axis=1
    )
    m = active.sum(axis=1)
    size = np.minimum(m, np.maximum(-(-m // 2), floor))
    return active & (ranks < size[:, None])


def _lane_coefficients(bases, x, active):
    """Least-squares coefficients per lane over its active coordinates.

    Rank-deficient systems get a ridge; returns (theta (L, r), any_ridged).
    """
    af = active.astype(np.float64)
    grams = np.einsum("ld,ldr,lds->lrs", af, bases, bases, optimize=True)
    rhs = np.einsum("ld,ldr->lr", af * x, bases, optimize=True)
    eig = np.linalg.eigvalsh(grams)
    bad = eig[:, 0] <= _DEFICIENT_REL * np.maximum(eig[:, -1], np.finfo(float).tiny)
    if bad.any():
        r = bases.shape[2]
        grams = grams + bad[:, None, None] * (_RIDGE * np.eye(r))
    theta = np.linalg.solve(grams, rhs[:, :, None])[:, :, 0]
    return theta, bool(bad.any())


def _check_basis(u, rank: int, name: str) -> np.ndarray:
    u = as_matrix(u)
    if u.shape[1] != rank:
        raise ValueError(f"{name} has {u.shape[1]} columns, expected {rank}")
    err = np.abs(u.T @ u - np.eye(rank)).max()
    if err > _BASIS_TOL:
        raise ValueError(
            f"{name} is not orthonormal (max |U^T U - I| = {err:.3e})"
        )
    return u


def erase(x, basis, opts: AmmcOptions, rng=None) -> np.ndarray:
    """Greedy erasure for a single observed column.

    `x` holds the observed values and `basis` the matching rows of the
    component basis (the caller restricts both to the observed set).  At each
    step the coordinate whose removal most increases the projection residual
    gap is dropped; the loop stops when the relative gap reaches
    `opts.erasure_tol` or max(rank, min_keep) coordinates remain.  With
    `opts.restarts` > 0 the run is repeated from random subsets of half the
    coordinates and the strictly best final gap wins.  Returns the kept
    indices into `x`, ascending.
    """
    x = np.asarray(x, dtype=np.float64)
    basis = np.asarray(basis, dtype=np.float64)
    if x.ndim != 1 or basis.ndim != 2 or basis.shape[0] != x.size:
        raise ValueError(
            f"x of length {x.size} needs a basis with that many rows; "
            f"got {basis.shape}"
        )
    t = x.size
    r = opts.rank
    if basis.shape[1] != r:
        raise ValueError(f"basis has {basis.shape[1]} columns, expected {r}")
    if t < r:
        raise ValueError(f"need at least rank = {r} observations, got {t}")
    floor = max(opts.rank, opts.min_keep)

    def run(start: np.ndarray):
        act, gaps, _ = _erase_lanes(
            basis[None, :, :], x[None, :], start[None, :], floor,
            opts.erasure_tol, refresh_every=1,
        )
        return act[0], float(gaps[0])

    best_active, best_gap = run(np.ones(t, dtype=bool))
    if opts.restarts > 0:
        if rng is None:
            rng = substream(opts.seed, "erase")
        size = min(t, max(ceil(t / 2), floor))
        for _ in range(opts.restarts):
            start = np.zeros(t, dtype=bool)
            start[rng.choice(t, size=size, replace=False)] = True
            cand_active, cand_gap = run(start)
            if cand_gap < best_gap:
                best_active, best_gap = cand_active, cand_gap
    return np.flatnonzero(best_active)


def estimate_coefficient(x, basis, upsilon=None):
    """Least-squares coefficient of x against the basis rows in `upsilon`.

    Defaults to all coordinates.  Returns (theta, ridge_flagged); a
    rank-deficient normal system is solved with a small ridge and flagged.
    """
    x = np.asarray(x, dtype=np.float64)
    basis = np.asarray(basis, dtype=np.float64)
    if x.ndim != 1 or basis.ndim != 2 or basis.shape[0] != x.size:
        raise ValueError(
            f"x of length {x.size} needs a basis with that many rows; "
            f"got {basis.shape}"
        )
    active = np.zeros(x.size, dtype=bool)
    if upsilon is None:
        active[:] = True
    else:
        active[np.asarray(upsilon, dtype=np.int64)] = True
    if active.sum() < basis.shape[1]:
        raise ValueError(
            f"need at least rank = {basis.shape[1]} coordinates, "
            f"got {int(active.sum())}"
        )
    theta, flagged = _lane_coefficients(
        basis[None, :, :], x[None, :], active[None, :]
    )
    return theta[0], flagged


# ---------- cluster step ---------- #


@dataclass(frozen=True)
class ClusterStepResult:
    """Entry assignment produced by one erasure sweep.

    `reconstructions[k]` holds basis_k @ theta_kj per column j (only columns
    not in `skipped_columns` carry meaningful values).  `labels` is 0 for
    unassigned entries and k + 1 for component k.
    """

    assignments: AssignmentMasks
    outliers: np.ndarray
    reconstructions: tuple
    skipped_columns: tuple
    labels: np.ndarray
    ridge_flagged: bool


def cluster_step(obs: ObservedMixture, bases, opts: AmmcOptions) -> ClusterStepResult:
    """Assign every observed entry to the component reconstructing it best.

    Columns with fewer than `rank` observations cannot be scored and are
    skipped: their entries become outliers.  Ties in reconstruction error go
    to the lowest component index.  `opts.noise_sigma` and
    `opts.assignment_cap` demote further entries to outliers (see
    AmmcOptions).
    """
    if len(bases) != opts.k:
        raise ValueError(f"expected {opts.k} bases, got {len(bases)}")
    d, n = obs.shape
    r = opts.rank
    bases = [_check_basis(u, r, f"bases[{k}]") for k, u in enumerate(bases)]
    for k, u in enumerate(bases):
        if u.shape[0] != d:
            raise ValueError(f"bases[{k}] has {u.shape[0]} rows, expected {d}")

    col_counts = obs.observed.sum(axis=0)
    skipped = np.flatnonzero(col_counts < r)
    eligible = np.flatnonzero(col_counts >= r)
    kk = opts.k
    floor = max(opts.rank, opts.min_keep)

    labels = np.zeros((d, n), dtype=np.int64)
    recons = [np.zeros((d, n)) for _ in range(kk)]
    ridge = False

    if eligible.size:
        ne = eligible.size
        lanes = kk * ne
        lane_bases = np.empty((lanes, d, r))
        lane_x = np.empty((lanes, d))
        lane_active = np.empty((lanes, d), dtype=bool)
        for k in range(kk):
            sl = slice(k * ne, (k + 1) * ne)
            lane_bases[sl] = bases[k][None, :, :]
            lane_x[sl] = obs.values[:, eligible].T
            lane_active[sl] = obs.observed[:, eligible].T

        tol = opts.erasure_tol
        final_active, gaps, _ = _erase_lanes(
            lane_bases, lane_x, lane_active, floor, tol
        )
        for attempt in range(opts.restarts):
            start = _random_starts(
                lane_active, floor, substream(opts.seed, "erase", attempt)
            )
            c_act, c_gap, _ = _erase_lanes(
                lane_bases, lane_x, start, floor, tol
            )
            better = c_gap < gaps
            final_active[better] = c_act[better]
            gaps[better] = c_gap[better]

        # A lane frozen at the floor fits by interpolation (gap 0 on any
        # `floor` coordinates), so its coefficients carry no evidence; and a
        # "consistent" subset far smaller than the column's fair share
        # (count / K entries, within a factor of two) is usually a spurious
        # coincidence the greedy optimized its way into, not a real fit.
        # When most lanes found an honest consistent subset, such suspicious
        # lanes almost surely mark a greedy misstep, recovered in two stages:
        # a few deterministic restarts from random subsets (adopted only when
        # consistent at size >= floor + 2, where a second coincidence is
        # vanishingly unlikely), then one deflated retry from the coordinates
        # no confident sibling lane of the same column claimed -- the honest
        # remainder when the siblings are right, so consistency at
        # size >= floor + 1 suffices there.  When most lanes are inconsistent
        # (early iterations from rough bases) there is nothing better to find
        # and both stages are skipped.
        counts = lane_active.sum(axis=1)
        sizes = final_active.sum(axis=1)
        suspicious = (
            (gaps > tol) | (sizes <= floor) | (2 * kk * sizes < counts)
        )
        if suspicious.any() and (~suspicious).mean() >= _TRUSTED_FRACTION:
            retryable = suspicious & (counts >= floor + 2)
            for attempt in range(_STUCK_RETRIES):
                idx = np.flatnonzero(retryable)
                if idx.size == 0:
                    break
                start = _random_starts(
                    lane_active[idx], floor,
                    substream(opts.seed, "retry", attempt),
                )
                c_act, c_gap, _ = _erase_lanes(
                    lane_bases[idx], lane_x[idx], start, floor, tol
                )
                fixed = (c_gap <= tol) & (c_act.sum(axis=1) >= floor + 2)
                adopt = idx[fixed]
                final_active[adopt] = c_act[fixed]
                retryable[adopt] = False
                suspicious[adopt] = False

            still = np.flatnonzero(suspicious)
            if still.size:
                conf_union = np.zeros((ne, d), dtype=bool)
                for k in range(kk):
                    sl = slice(k * ne, (k + 1) * ne)
                    conf_union |= final_active[sl] & ~suspicious[sl, None]
                start = lane_active[still] & ~conf_union[still % ne]
                ok = start.sum(axis=1) >= floor + 1
                run_idx = still[ok]
                if run_idx.size:
                    c_act, c_gap, _ = _erase_lanes(
                        lane_bases[run_idx], lane_x[run_idx], start[ok],
                        floor, tol,
                    )
                    fixed = (c_gap <= tol) & (c_act.sum(axis=1) >= floor + 1)
                    adopt = run_idx[fixed]
                    final_active[adopt] = c_act[fixed]

        theta, ridge = _lane_coefficients(lane_bases, lane_x, final_active)
        lane_recon = np.matmul(lane_bases, theta[:, :, None])[:, :, 0]
        for k in range(kk):
            recons[k][:, eligible] = lane_recon[k * ne : (k + 1) * ne].T

        dist = np.stack(
            [np.abs(obs.values - recons[k]) for k in range(kk)], axis=0
        )
        winners = np.argmin(dist, axis=0)
        scorable = obs.observed.copy()
        scorable[:, skipped] = False
        labels[scorable] = winners[scorable] + 1

        if opts.noise_sigma is not None:
            best_sq = np.min(dist, axis=0) ** 2
            labels[scorable & (best_sq > opts.noise_sigma)] = 0

        if opts.assignment_cap is not None:
            cap = opts.assignment_cap
            for j in eligible:
                for k in range(kk):
                    members = np.flatnonzero(labels[:, j] == k + 1)
                    if members.size > cap:
                        order = np.argsort(dist[k, members, j], kind="stable")
                        labels[members[order[cap:]], j] = 0

    masks = tuple(labels == k + 1 for k in range(kk))
    outliers = obs.observed & (labels == 0)
    outliers.setflags(write=False)
    labels.setflags(write=False)
    return ClusterStepResult(
        assignments=AssignmentMasks(masks=masks),
        outliers=outliers,
        reconstructions=tuple(as_matrix(m) for m in recons),
        skipped_columns=tuple(int(j) for j in skipped),
        labels=labels,
        ridge_flagged=ridge,
    )


# ---------- complete step ---------- #


@dataclass(frozen=True)
class CompleteStepResult:
    """Per-component completions and refreshed subspaces.

    `completions[k]` is zero on columns where component k received no
    entries; those columns are listed in `not_recoverable[k]`.  `notes`
    collects non-fatal conditions (empty components keeping their previous
    basis, under-determined columns, ridge solves, completion
    non-convergence).
    """

    completions: tuple
    bases: tuple
    not_recoverable: tuple
    notes: tuple


def complete_step(
    obs: ObservedMixture,
    assignments: AssignmentMasks,
    opts: AmmcOptions,
    prev_bases=None,
) -> CompleteStepResult:
    """Complete each component from its assigned entries and refresh bases.

    A component with no assigned entries at all keeps its previous basis
    (error if none was given); columns without entries for a component are
    excluded from its completion and reported as not recoverable.
    """
    if assignments.k != opts.k:
        raise ValueError(
            f"assignments have {assignments.k} components, expected {opts.k}"
        )
    d, n = obs.shape
    if assignments.shape != (d, n):
        raise ValueError(
            f"assignment shape {assignments.shape} != data shape {(d, n)}"
        )
    r = opts.rank
    completions = []
    bases = []
    not_recoverable = []
    notes = []
    for k in range(opts.k):
        mk = assignments.masks[k]
        if not mk.any():
            if prev_bases is None:
                raise ValueError(
                    f"component {k} has no assigned entries and no previous "
                    f"basis to fall back on"
                )
            completions.append(np.zeros((d, n)))
            bases.append(np.asarray(prev_bases[k], dtype=np.float64).copy())
            not_recoverable.append(tuple(range(n)))
            notes.append(f"component {k}: no entries assigned; kept previous basis")
            continue
        cols = np.flatnonzero(mk.any(axis=0))
        excluded = np.setdiff1d(np.arange(n), cols)
        sub = ObservedMixture(
            values=obs.values[:, cols], observed=mk[:, cols]
        )
        res = complete_lowrank(sub, opts.lrmc)
        full = np.zeros((d, n))
        full[:, cols] = res.matrix
        completions.append(full)
        not_recoverable.append(tuple(int(j) for j in excluded))
        if res.ridge_flagged:
            notes.append(f"component {k}: ridge-regularized completion solve")
        if res.underdetermined_columns:
            notes.append(
                f"component {k}: {len(res.underdetermined_columns)} "
                f"under-determined columns"
            )
        if not res.converged:
            notes.append(
                f"component {k}: completion stopped at max_iters "
                f"({res.iters}) without converging"
            )
        if cols.size >= r:
            basis, degen = leading_subspace(res.matrix, r)
            if degen:
                notes.append(f"component {k}: degenerate leading subspace")
            bases.append(basis)
        elif prev_bases is not None:
            bases.append(np.asarray(prev_bases[k], dtype=np.float64).copy())
            notes.append(
                f"component {k}: only {cols.size} columns < rank; kept "
                f"previous basis"
            )
        else:
            # Not enough columns to span a rank-r subspace and nothing to
            # fall back on: extend the thin subspace with canonical axes.
            u_thin, _ = leading_subspace(res.matrix, cols.size)
            stacked = np.hstack([u_thin, np.eye(d)])
            q, _ = np.linalg.qr(stacked)
            bases.append(q[:, :r])
            notes.append(
                f"component {k}: only {cols.size} columns < rank; basis "
                f"padded with canonical directions"
            )
    return CompleteStepResult(
        completions=tuple(as_matrix(c) for c in completions),
        bases=tuple(bases),
        not_recoverable=tuple(not_recoverable),
        notes=tuple(notes),
    )


# ---------- outer loop ---------- #


@dataclass(frozen=True)
class ClusterState:
    """A consistent snapshot: assignments, outliers, completions, bases.

    Invariants: masks are pairwise disjoint; assigned entries plus outliers
    exactly cover the observed set.
    """

    assignments: AssignmentMasks
    outliers: np.ndarray
    completions: tuple
    bases: tuple
    observed: np.ndarray = field(repr=False)

    def __post_init__(self):
        union = self.assignments.union
        if (union & self.outliers).any():
            raise ValueError("assigned entries overlap the outlier set")
        if not np.array_equal(union | self.outliers, self.observed):
            raise ValueError(
                "assignments plus outliers do not cover the observed set"
            )


@dataclass(frozen=True)
class AmmcResult:
    """Outcome of one alternating run.

    `history[i]` counts entries whose label changed at outer iteration i
    (iteration 0 counts every observed entry).  `converged` is True only if
    two consecutive assignments were identical within the budget.
    """

    state: ClusterState
    history: tuple
    converged: bool
    outer_iters: int
    notes: tuple


def run_ammc(obs: ObservedMixture, init_bases, opts: AmmcOptions) -> AmmcResult:
    """Alternate cluster and complete steps from the given initial bases."""
    d, n = obs.shape
    bases = [_check_basis(u, opts.rank, f"init_bases[{k}]") for k, u in enumerate(init_bases)]
    if len(bases) != opts.k:
        raise ValueError(f"expected {opts.k} initial bases, got {len(bases)}")
    for k, u in enumerate(bases):
        if u.shape[0] != d:
            raise ValueError(f"init_bases[{k}] has {u.shape[0]} rows, expected {d}")

    history = []
    notes = []
    prev_labels = None
    prev_prev_labels = None
    converged = False
    cs = None
    comp = None
    for _ in range(opts.max_outer_iters):
        cs = cluster_step(obs, bases, opts)
        if prev_labels is None:
            changes = int(obs.observed.sum())
        else:
            changes = int((cs.labels != prev_labels).sum())
        history.append(changes)
        if prev_labels is not None and changes == 0:
            converged = True
            break
        if prev_prev_labels is not None and np.array_equal(cs.labels, prev_prev_labels):
            notes.append(
                "assignment two-cycle detected; stopping without convergence"
            )
            comp = complete_step(obs, cs.assignments, opts, prev_bases=tuple(bases))
            break
        comp = complete_step(obs, cs.assignments, opts, prev_bases=tuple(bases))
        bases = list(comp.bases)
        prev_prev_labels = prev_labels
        prev_labels = cs.labels

    if cs.skipped_columns:
        notes.append(
            f"{len(cs.skipped_columns)} columns skipped (< rank observations)"
        )
    notes.extend(comp.notes)
    state = ClusterState(
        assignments=cs.assignments,
        outliers=cs.outliers,
        completions=comp.completions,
        bases=comp.bases,
        observed=obs.observed,
    )
    return AmmcResult(
        state=state,
        history=tuple(history),
        converged=converged,
        outer_iters=len(history),
        notes=tuple(dict.fromkeys(notes)),
    )


def verify_mixture(candidates, obs: ObservedMixture, r: int):
    """Check whether candidate matrices explain every observed entry.

    Each candidate must have numeric rank at most r (singular value r + 1
    below 1e-8 times the largest) and every observed entry must match some
    candidate within 1e-9 absolute.  On success returns (True, assignment)
    where ties go to the lowest-indexed agreeing component; otherwise
    (False, None).
    """
    cands = [as_matrix(c) for c in candidates]
    if not cands:
        raise ValueError("need at least one candidate")
    for k, c in enumerate(cands):
        if c.shape != obs.shape:
            raise ValueError(f"candidates[{k}] shape {c.shape} != {obs.shape}")
        s = np.linalg.svd(c, compute_uv=False)
        if r < len(s) and s[r] >= 1e-8 * max(s[0], np.finfo(float).tiny):
            return False, None
    close = np.stack(
        [np.abs(obs.values - c) <= 1e-9 for c in cands], axis=0
    )
    close &= obs.observed[None, :, :]
    covered = close.any(axis=0)
    if not np.array_equal(covered, obs.observed):
        return False, None
    winner = np.argmax(close, axis=0)
    masks = tuple(
        obs.observed & (winner == k) & covered for k in range(len(cands))
    )
    return True, AssignmentMasks(masks=masks)
