"""Synthetic mixture generation and controlled subspace perturbation.

The generator draws k independent rank-r Gaussian factor products and hides
each entry or hands it to one component at random: an entry is observed with
probability p and, when observed, comes from each component with probability
p/k.  Both decisions are taken from one uniform draw per entry so that the
same seed yields the same instance for every p on a grid.

`perturb_subspaces` manufactures initial subspace estimates at a prescribed
normalized distance from the truth by walking along a Grassmann geodesic
toward a random orthogonal complement and bisecting on the step length.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AssignmentMasks, MixtureProblem, ObservedMixture, as_matrix
from .seeding import substream

__all__ = [
    "SynthConfig",
    "generate_mixture",
    "generate_column_mixture",
    "sample_fixed_m",
    "subspace_distance",
    "perturb_subspaces",
    "max_perturbation",
]


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of one synthetic mixture instance."""

    d: int
    n: int
    r: int
    k: int
    p: float
    delta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1 or self.n < 1:
            raise ValueError(f"d and n must be >= 1, got d={self.d}, n={self.n}")
        if not 1 <= self.r <= min(self.d, self.n):
            raise ValueError(
                f"rank must satisfy 1 <= r <= min(d, n) = "
                f"{min(self.d, self.n)}, got {self.r}"
            )
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must be in [0, 1], got {self.delta}")


def generate_mixture(cfg: SynthConfig) -> MixtureProblem:
    """Draw a mixture instance under `cfg`.

    Each truth matrix is U Theta with U (d x r) and Theta (r x n) standard
    normal, drawn from per-component substreams.  Observation labels come
    from one uniform u per entry: observed iff u < p, attributed to component
    floor(u k / p).  All k components are exchangeable by construction.
    """
    d, n, r, k = cfg.d, cfg.n, cfg.r, cfg.k
    truth = []
    for comp in range(k):
        u = substream(cfg.seed, "basis", comp).standard_normal((d, r))
        theta = substream(cfg.seed, "coeff", comp).standard_normal((r, n))
        truth.append(u @ theta)

    uni = substream(cfg.seed, "pattern").random((d, n))
    if cfg.p > 0:
        observed = uni < cfg.p
        comp_idx = np.floor(uni * (k / cfg.p)).astype(np.int64)
        comp_idx = np.minimum(comp_idx, k - 1)
    else:
        observed = np.zeros((d, n), dtype=bool)
        comp_idx = np.zeros((d, n), dtype=np.int64)

    masks = tuple(observed & (comp_idx == comp) for comp in range(k))
    values = np.zeros((d, n))
    for comp in range(k):
        values[masks[comp]] = truth[comp][masks[comp]]

    return MixtureProblem(
        truth=tuple(truth),
        assignments=AssignmentMasks(masks=masks),
        observed=ObservedMixture(values=values, observed=observed),
        rank=r,
        seed=cfg.seed,
    )


def generate_column_mixture(cfg: SynthConfig) -> MixtureProblem:
    """Draw a mixture whose columns are pure: every observed entry of a
    column comes from the one component that owns that column.

    Column owners are uniform over the k components; each entry is then
    observed independently with probability p.  The factor substreams match
    `generate_mixture`, so with the same cfg both models mix the *same*
    truth matrices — only the attribution of entries differs.  A column-pure
    mixture stacks columns drawn from a union of k rank-r column spans, the
    regime where whole-column subspace clustering applies; it serves as the
    easier contrast to the entry-level model above.
    """
    d, n, r, k = cfg.d, cfg.n, cfg.r, cfg.k
    truth = []
    for comp in range(k):
        u = substream(cfg.seed, "basis", comp).standard_normal((d, r))
        theta = substream(cfg.seed, "coeff", comp).standard_normal((r, n))
        truth.append(u @ theta)

    owners = substream(cfg.seed, "column-owner").integers(0, k, size=n)
    observed = substream(cfg.seed, "pattern").random((d, n)) < cfg.p
    masks = tuple(observed & (owners == comp)[None, :] for comp in range(k))
    values = np.zeros((d, n))
    for comp in range(k):
        values[masks[comp]] = truth[comp][masks[comp]]

    return MixtureProblem(
        truth=tuple(truth),
        assignments=AssignmentMasks(masks=masks),
        observed=ObservedMixture(values=values, observed=observed),
        rank=r,
        seed=cfg.seed,
    )


def sample_fixed_m(d: int, n: int, m: int, seed: int = 0) -> np.ndarray:
    """Mask with exactly m observed rows per column, uniform without replacement."""
    if not 1 <= m <= d:
        raise ValueError(f"m must satisfy 1 <= m <= d = {d}, got {m}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    mask = np.zeros((d, n), dtype=bool)
    for j in range(n):
        rows = substream(seed, "fixed", j).choice(d, size=m, replace=False)
        mask[rows, j] = True
    mask.setflags(write=False)
    return mask


def _check_orthonormal(u: np.ndarray, name: str) -> np.ndarray:
    u = as_matrix(u)
    d, r = u.shape
    if r > d:
        raise ValueError(f"{name}: more columns ({r}) than rows ({d})")
    err = np.abs(u.T @ u - np.eye(r)).max()
    if err > 1e-10:
        raise ValueError(
            f"{name} is not orthonormal (max |U^T U - I| = {err:.3e})"
        )
    return u


def subspace_distance(a, b) -> float:
    """Normalized distance ||AA^T - BB^T||_F / sqrt(2 r) between column spans.

    0 for identical spans, 1 for orthogonal subspaces.  Computed as
    ||B - A (A^T B)||_F / sqrt(r), which equals the projector form exactly
    but stays accurate near zero (the residual is formed before the norm, so
    nothing cancels).
    """
    a = _check_orthonormal(a, "first basis")
    b = _check_orthonormal(b, "second basis")
    if a.shape != b.shape:
        raise ValueError(f"basis shapes differ: {a.shape} vs {b.shape}")
    r = a.shape[1]
    resid = b - a @ (a.T @ b)
    return float(min(np.linalg.norm(resid) / np.sqrt(r), 1.0))


def max_perturbation(d: int, r: int) -> float:
    """Largest distance reachable from any d x r basis: sqrt(min(d - r, r) / r)."""
    if not 1 <= r <= d:
        raise ValueError(f"need 1 <= r <= d, got r={r}, d={d}")
    return float(np.sqrt(min(d - r, r) / r))


def _geodesic_frame(u: np.ndarray, rng: np.random.Generator):
    """Random orthonormal directions in the orthogonal complement of span(u).

    Returns (q, rot) where q has min(d - r, r) columns, orthogonal to u; the
    last q.shape[1] columns of u rotate toward q while the rest stay fixed.
    """
    d, r = u.shape
    q_cols = min(d - r, r)
    g = rng.standard_normal((d, max(q_cols, 1)))
    g -= u @ (u.T @ g)
    q, _ = np.linalg.qr(g)
    return q[:, :q_cols]


def _geodesic_point(u: np.ndarray, q: np.ndarray, t: float) -> np.ndarray:
    """Point at parameter t in [0, 1] on the geodesic rotating the trailing
    columns of u into q (all moving principal angles reach pi/2 at t = 1)."""
    d, r = u.shape
    qc = q.shape[1]
    ang = t * (np.pi / 2.0)
    out = u.copy()
    out[:, r - qc:] = u[:, r - qc:] * np.cos(ang) + q * np.sin(ang)
    return out


def perturb_subspaces(bases, delta: float, seed: int = 0) -> list:
    """Return orthonormal bases at normalized distance `delta` from each input.

    delta = 0 returns exact copies; the maximum reachable distance is
    sqrt(min(d - r, r) / r) (equal to 1 whenever d >= 2 r) and asking beyond
    it raises.  The rotation target is drawn from the per-basis substream of
    `seed`, and the step length along the geodesic is bisected until the
    measured distance is within 1e-6 of delta.
    """
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    out = []
    for idx, u in enumerate(bases):
        u = _check_orthonormal(u, f"bases[{idx}]")
        d, r = u.shape
        if delta == 0.0:
            out.append(u.copy())
            continue
        dmax = max_perturbation(d, r)
        if delta > dmax + 1e-9:
            raise ValueError(
                f"bases[{idx}]: requested distance {delta} exceeds the "
                f"maximum {dmax:.6f} reachable for shape ({d}, {r})"
            )
        rng = substream(seed, "perturb", idx)
        q = _geodesic_frame(u, rng)
        if delta >= dmax - 1e-9:
            out.append(_geodesic_point(u, q, 1.0))
            continue
        lo, hi = 0.0, 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            cand = _geodesic_point(u, q, mid)
            dist = subspace_distance(u, cand)
            if abs(dist - delta) <= 1e-6:
                break
            if dist < delta:
                lo = mid
            else:
                hi = mid
        else:
            raise RuntimeError("geodesic bisection failed to converge")
        out.append(cand)
    return out
