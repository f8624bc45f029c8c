"""Low-rank completion of a single partially observed matrix.

Two engines behind one front door (`complete_lowrank`):

* ``alt-min`` — alternating least squares on the factors, started from the
  leading singular vectors of the zero-filled matrix.  Column and row factors
  are updated by batched normal equations; rank-deficient systems get a small
  ridge and raise a flag instead of failing.
* ``hard-svt`` — iterative hard thresholding: replace observed entries, then
  truncate to rank r, starting from the zero matrix.

Both iterate until the relative Frobenius change of the iterate drops below
``tol`` or ``max_iters`` is reached; non-convergence is reported, not raised.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ObservedMixture, as_matrix

__all__ = [
    "LrmcOptions",
    "CompletionResult",
    "complete_lowrank",
    "leading_subspace",
    "truncate_rank",
]

_METHODS = ("alt-min", "hard-svt")

# Relative size below which the smallest normal-equation eigenvalue marks the
# system rank-deficient, and the ridge then added to the diagonal.
_DEFICIENT_REL = 1e-10
_RIDGE = 1e-10


@dataclass(frozen=True)
class LrmcOptions:
    rank: int
    method: str = "alt-min"
    tol: float = 1e-12
    max_iters: int = 500

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.method not in _METHODS:
            raise ValueError(
                f"unknown method {self.method!r}; expected one of {_METHODS}"
            )
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class CompletionResult:
    """Outcome of one completion run.

    `residual` is the relative Frobenius error on the observed entries of the
    final iterate; `residual_history` holds one value per iteration.
    `ridge_flagged` reports that at least one least-squares subproblem was
    rank-deficient and solved with a ridge; `underdetermined_columns` lists
    columns with fewer than rank + 1 observations (completed anyway).
    """

    matrix: np.ndarray
    converged: bool
    iters: int
    residual: float
    residual_history: tuple
    ridge_flagged: bool
    underdetermined_columns: tuple


def leading_subspace(x, r: int) -> tuple[np.ndarray, bool]:
    """Top-r left singular subspace of x with a deterministic sign convention.

    Each singular vector is flipped so its largest-magnitude entry is
    positive.  Returns (basis, degenerate) where `degenerate` reports that
    sigma_r and sigma_{r+1} coincide within 1e-12, i.e. the subspace is not
    uniquely determined.
    """
    x = as_matrix(x)
    if not 1 <= r <= min(x.shape):
        raise ValueError(
            f"rank must satisfy 1 <= r <= min(d, n) = {min(x.shape)}, got {r}"
        )
    u, s, _ = np.linalg.svd(x, full_matrices=False)
    basis = u[:, :r].copy()
    for j in range(r):
        i = int(np.argmax(np.abs(basis[:, j])))
        if basis[i, j] < 0:
            basis[:, j] = -basis[:, j]
    degenerate = bool(r < len(s) and s[r - 1] - s[r] <= 1e-12)
    return basis, degenerate


def truncate_rank(x, r: int) -> np.ndarray:
    """Best rank-r approximation of x in Frobenius norm."""
    x = as_matrix(x)
    if not 1 <= r <= min(x.shape):
        raise ValueError(
            f"rank must satisfy 1 <= r <= min(d, n) = {min(x.shape)}, got {r}"
        )
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    return (u[:, :r] * s[:r]) @ vt[:r]


def _batched_gram_solve(basis: np.ndarray, mask_f: np.ndarray, rhs: np.ndarray):
    """Solve one normal-equation system per column of `mask_f`.

    System j is (sum_i mask[i, j] b_i b_i^T) theta_j = rhs[:, j] where b_i is
    row i of `basis`.  Rank-deficient systems (smallest eigenvalue below
    _DEFICIENT_REL times the largest) get a ridge added to the diagonal; the
    ridge must scale with the Gram's magnitude, or it is absorbed by rounding
    on large-scale systems and the factorization still hits a zero pivot.
    Returns (solutions (r x n), any_deficient).
    """
    d, r = basis.shape
    n = mask_f.shape[1]
    outer = (basis[:, :, None] * basis[:, None, :]).reshape(d, r * r)
    grams = (mask_f.T @ outer).reshape(n, r, r)
    eig = np.linalg.eigvalsh(grams)
    floor = _DEFICIENT_REL * np.maximum(eig[:, -1], np.finfo(float).tiny)
    deficient = eig[:, 0] <= floor
    if deficient.any():
        lam = np.maximum(_RIDGE, 64.0 * np.finfo(float).eps * eig[:, -1])
        grams = grams + (deficient * lam)[:, None, None] * np.eye(r)
    sols = np.linalg.solve(grams, rhs.T[:, :, None])[:, :, 0]
    return sols.T, bool(deficient.any())


def _alt_min(y: np.ndarray, mask: np.ndarray, opts: LrmcOptions):
    d, n = y.shape
    r = opts.rank
    mask_f = mask.astype(np.float64)
    obs_norm = max(np.linalg.norm(y), np.finfo(float).tiny)
    u, _ = leading_subspace(y, r)
    x_prev = None
    history = []
    ridge = False
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        theta, flag1 = _batched_gram_solve(u, mask_f, u.T @ y)
        ut, flag2 = _batched_gram_solve(theta.T, mask_f.T, theta @ y.T)
        u = ut.T
        ridge = ridge or flag1 or flag2
        x = u @ theta
        history.append(np.linalg.norm((x - y)[mask]) / obs_norm)
        if x_prev is not None:
            denom = max(np.linalg.norm(x_prev), np.finfo(float).tiny)
            if np.linalg.norm(x - x_prev) / denom < opts.tol:
                converged = True
                x_prev = x
                break
        x_prev = x
    return x_prev, converged, it, history, ridge


def _hard_svt(y: np.ndarray, mask: np.ndarray, opts: LrmcOptions):
    obs_norm = max(np.linalg.norm(y), np.finfo(float).tiny)
    x = np.zeros_like(y)
    history = []
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        x_new = truncate_rank(np.where(mask, y, x), opts.rank)
        history.append(np.linalg.norm((x_new - y)[mask]) / obs_norm)
        if it > 1:
            denom = max(np.linalg.norm(x), np.finfo(float).tiny)
            if np.linalg.norm(x_new - x) / denom < opts.tol:
                x = x_new
                converged = True
                break
        x = x_new
    return x, converged, it, history, False


def complete_lowrank(obs: ObservedMixture, opts: LrmcOptions) -> CompletionResult:
    """Complete a partially observed matrix at rank `opts.rank`.

    Requires at least one observation overall and at least one per column
    (columns with no data admit no estimate at all — the caller must drop
    them first).  Columns observed fewer than rank + 1 times are completed
    anyway but reported in `underdetermined_columns`.
    """
    d, n = obs.shape
    mask = obs.observed
    if not mask.any():
        raise ValueError("no observed entries")
    col_counts = mask.sum(axis=0)
    if (col_counts == 0).any():
        j = int(np.argmin(col_counts))
        raise ValueError(f"column {j} has no observed entries")
    if not 1 <= opts.rank <= min(d, n):
        raise ValueError(
            f"rank must satisfy 1 <= r <= min(d, n) = {min(d, n)}, "
            f"got {opts.rank}"
        )
    under = tuple(int(j) for j in np.flatnonzero(col_counts < opts.rank + 1))

    engine = _alt_min if opts.method == "alt-min" else _hard_svt
    x, converged, iters, history, ridge = engine(obs.values, mask, opts)
    return CompletionResult(
        matrix=as_matrix(x),
        converged=converged,
        iters=iters,
        residual=float(history[-1]),
        residual_history=tuple(float(h) for h in history),
        ridge_flagged=ridge,
        underdetermined_columns=under,
    )
