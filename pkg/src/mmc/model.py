"""Core containers and text formats for partially observed matrix mixtures.

Conventions used throughout the package:

* matrices are 2-D float64 numpy arrays, row-major;
* masks are 2-D boolean arrays of the same shape;
* arrays held by the container types are read-only — build a new container
  instead of mutating in place;
* unobserved entries carry no information and are stored as 0.0.

The text formats are deliberately primitive (whitespace-separated values, one
matrix row per line) so files can be inspected and diffed.  Floats are written
with `repr`, i.e. the shortest string that round-trips exactly, which makes
write -> read -> write byte-identical.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

NA_TOKEN = "NA"

__all__ = [
    "NA_TOKEN",
    "as_matrix",
    "as_mask",
    "ObservedMixture",
    "AssignmentMasks",
    "LowRankFactorization",
    "MixtureProblem",
    "masks_union",
    "column_restrict",
    "read_matrix",
    "write_matrix",
    "read_observed",
    "write_observed",
    "read_mask",
    "write_mask",
    "read_assignment",
    "write_assignment",
]


# ---------- validation helpers ---------- #


def as_matrix(values) -> np.ndarray:
    """Coerce to a read-only, finite, non-empty 2-D float64 array (copies)."""
    a = np.array(values, dtype=np.float64, order="C")
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        i, j = map(int, np.argwhere(~np.isfinite(a))[0])
        raise ValueError(f"non-finite entry at ({i}, {j})")
    a.setflags(write=False)
    return a


def as_mask(values) -> np.ndarray:
    """Coerce to a read-only, non-empty 2-D boolean array (copies).

    Numeric input is accepted only if every entry is exactly 0 or 1.
    """
    a = np.asarray(values)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D mask, got shape {a.shape}")
    if a.dtype == bool:
        a = a.copy()
    else:
        if not np.isin(a, (0, 1)).all():
            bad = np.argwhere(~np.isin(a, (0, 1)))[0]
            raise ValueError(
                f"mask entries must be 0 or 1; entry ({bad[0]}, {bad[1]}) "
                f"is {a[tuple(bad)]!r}"
            )
        a = a.astype(bool)
    a.setflags(write=False)
    return a


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


# ---------- container types ---------- #


@dataclass(frozen=True)
class ObservedMixture:
    """A d x n matrix together with per-entry observation status.

    `values` is zero at unobserved positions; those zeros are placeholders,
    not data, so `values` must never be read without consulting `observed`.
    """

    values: np.ndarray
    observed: np.ndarray

    def __post_init__(self):
        mask = as_mask(self.observed)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != mask.shape:
            raise ValueError(
                f"values shape {vals.shape} != observed shape {mask.shape}"
            )
        if not np.all(np.isfinite(vals[mask])):
            raise ValueError("observed entries must be finite")
        vals = np.where(mask, vals, 0.0)
        object.__setattr__(self, "values", _freeze(vals))
        object.__setattr__(self, "observed", mask)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def count_observed(self) -> int:
        return int(self.observed.sum())


@dataclass(frozen=True)
class AssignmentMasks:
    """Pairwise-disjoint masks assigning observed entries to components.

    masks[k][i, j] is True when entry (i, j) is attributed to component k.
    The element-wise sum of the masks equals their union (no overlaps).
    """

    masks: tuple

    def __post_init__(self):
        if len(self.masks) < 1:
            raise ValueError("need at least one component mask")
        coerced = tuple(as_mask(m) for m in self.masks)
        shape = coerced[0].shape
        for k, m in enumerate(coerced):
            if m.shape != shape:
                raise ValueError(
                    f"mask {k} has shape {m.shape}, expected {shape}"
                )
        union = masks_union(coerced)  # raises on overlap
        object.__setattr__(self, "masks", coerced)
        object.__setattr__(self, "_union", union)

    @property
    def k(self) -> int:
        return len(self.masks)

    @property
    def shape(self) -> tuple[int, int]:
        return self.masks[0].shape

    @property
    def union(self) -> np.ndarray:
        return self._union

    def labels(self) -> np.ndarray:
        """Integer label matrix: 0 = unassigned, 1..k = component index + 1."""
        out = np.zeros(self.shape, dtype=np.int64)
        for idx, m in enumerate(self.masks):
            out[m] = idx + 1
        out.setflags(write=False)
        return out


def masks_union(masks) -> np.ndarray:
    """Union of a collection of same-shape disjoint masks.

    Accepts an AssignmentMasks or any iterable of mask-like arrays; raises if
    any two masks overlap, naming the first offending entry.
    """
    if isinstance(masks, AssignmentMasks):
        seq = masks.masks
    else:
        seq = [as_mask(m) for m in masks]
    if len(seq) == 0:
        raise ValueError("need at least one mask")
    total = np.zeros(seq[0].shape, dtype=np.int64)
    for m in seq:
        if m.shape != seq[0].shape:
            raise ValueError(f"mask shapes differ: {m.shape} vs {seq[0].shape}")
        total += m
    if (total > 1).any():
        i, j = map(int, np.argwhere(total > 1)[0])
        raise ValueError(f"masks overlap at ({i}, {j})")
    out = total.astype(bool)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class LowRankFactorization:
    """X = basis @ coefficients with an orthonormal d x r basis."""

    basis: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        b = as_matrix(self.basis)
        c = as_matrix(self.coefficients)
        d, r = b.shape
        if c.shape[0] != r:
            raise ValueError(
                f"coefficients have {c.shape[0]} rows, expected rank {r}"
            )
        gram_err = np.abs(b.T @ b - np.eye(r)).max()
        if gram_err > 1e-10:
            raise ValueError(
                f"basis is not orthonormal (max |B^T B - I| = {gram_err:.3e})"
            )
        object.__setattr__(self, "basis", b)
        object.__setattr__(self, "coefficients", c)

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def matrix(self) -> np.ndarray:
        return self.basis @ self.coefficients


def _numeric_rank_at_most(x: np.ndarray, r: int, rel_tol: float = 1e-8) -> bool:
    s = np.linalg.svd(x, compute_uv=False)
    if r >= len(s):
        return True
    return bool(s[r] < rel_tol * max(s[0], np.finfo(float).tiny))


@dataclass(frozen=True)
class MixtureProblem:
    """Ground truth for one mixture instance.

    Invariants checked at construction: the truth matrices have numeric rank
    at most `rank`; the assignment masks are disjoint with union equal to the
    observation mask; and the observed values equal the assigned component's
    entries exactly.
    """

    truth: tuple
    assignments: AssignmentMasks
    observed: ObservedMixture
    rank: int
    seed: int

    def __post_init__(self):
        truth = tuple(as_matrix(x) for x in self.truth)
        if len(truth) != self.assignments.k:
            raise ValueError(
                f"{len(truth)} truth matrices but {self.assignments.k} masks"
            )
        shape = self.observed.shape
        for k, x in enumerate(truth):
            if x.shape != shape:
                raise ValueError(f"truth[{k}] shape {x.shape} != {shape}")
            if not _numeric_rank_at_most(x, self.rank):
                raise ValueError(f"truth[{k}] has numeric rank > {self.rank}")
        if not np.array_equal(self.assignments.union, self.observed.observed):
            raise ValueError("assignment union differs from observation mask")
        for k, (x, m) in enumerate(zip(truth, self.assignments.masks)):
            if not np.array_equal(self.observed.values[m], x[m]):
                raise ValueError(
                    f"observed values disagree with truth[{k}] on its mask"
                )
        object.__setattr__(self, "truth", truth)

    @property
    def shape(self) -> tuple[int, int]:
        return self.observed.shape

    @property
    def k(self) -> int:
        return len(self.truth)


def column_restrict(obs: ObservedMixture, column: int, rows) -> np.ndarray:
    """Extract observed values of one column at the given row indices.

    Every requested row must be observed in that column; the first offending
    index is named in the error.
    """
    d, n = obs.shape
    if not 0 <= column < n:
        raise IndexError(f"column {column} out of range for n = {n}")
    rows = np.asarray(rows, dtype=np.int64)
    if rows.ndim != 1:
        raise ValueError("rows must be a 1-D index array")
    if rows.size and (rows.min() < 0 or rows.max() >= d):
        bad = rows[(rows < 0) | (rows >= d)][0]
        raise IndexError(f"row {bad} out of range for d = {d}")
    ok = obs.observed[rows, column]
    if not ok.all():
        bad = int(rows[~ok][0])
        raise ValueError(f"entry ({bad}, {column}) is not observed")
    return obs.values[rows, column].copy()


# ---------- text formats ---------- #


def _format_value(v: float) -> str:
    return repr(float(v))


def _write_lines(path, header: str, rows) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(" ".join(row) + "\n")


def _read_lines(path) -> tuple[tuple[int, int], list]:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{os.fspath(path)}: empty file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(
            f"{os.fspath(path)}: line 1: expected header 'd n', got {lines[0]!r}"
        )
    try:
        d, n = int(head[0]), int(head[1])
    except ValueError:
        raise ValueError(
            f"{os.fspath(path)}: line 1: non-integer dimensions {lines[0]!r}"
        ) from None
    if d < 1 or n < 1:
        raise ValueError(f"{os.fspath(path)}: line 1: dimensions must be >= 1")
    body = [ln for ln in lines[1:] if ln.strip()]
    if len(body) != d:
        raise ValueError(
            f"{os.fspath(path)}: expected {d} data lines, found {len(body)}"
        )
    rows = []
    for i, ln in enumerate(body):
        toks = ln.split()
        if len(toks) != n:
            raise ValueError(
                f"{os.fspath(path)}: line {i + 2}: expected {n} values, "
                f"found {len(toks)}"
            )
        rows.append(toks)
    return (d, n), rows


def _parse_float(tok: str, path, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise ValueError(
            f"{os.fspath(path)}: line {line}: bad value {tok!r}"
        ) from None


def write_matrix(path, matrix) -> None:
    """Write a dense matrix: header 'd n', then d lines of n floats."""
    m = as_matrix(matrix)
    d, n = m.shape
    rows = ([_format_value(v) for v in row] for row in m)
    _write_lines(path, f"{d} {n}", rows)


def read_matrix(path) -> np.ndarray:
    (d, n), rows = _read_lines(path)
    out = np.empty((d, n), dtype=np.float64)
    for i, toks in enumerate(rows):
        for j, tok in enumerate(toks):
            out[i, j] = _parse_float(tok, path, i + 2)
    return as_matrix(out)


def write_observed(path, obs: ObservedMixture) -> None:
    """Write a partially observed matrix; missing entries appear as 'NA'."""
    d, n = obs.shape
    rows = (
        [
            _format_value(obs.values[i, j]) if obs.observed[i, j] else NA_TOKEN
            for j in range(n)
        ]
        for i in range(d)
    )
    _write_lines(path, f"{d} {n}", rows)


def read_observed(path) -> ObservedMixture:
    (d, n), rows = _read_lines(path)
    values = np.zeros((d, n), dtype=np.float64)
    mask = np.zeros((d, n), dtype=bool)
    for i, toks in enumerate(rows):
        for j, tok in enumerate(toks):
            if tok == NA_TOKEN:
                continue
            values[i, j] = _parse_float(tok, path, i + 2)
            mask[i, j] = True
    return ObservedMixture(values=values, observed=mask)


def write_mask(path, mask) -> None:
    m = as_mask(mask)
    d, n = m.shape
    rows = (["1" if v else "0" for v in row] for row in m)
    _write_lines(path, f"{d} {n}", rows)


def read_mask(path) -> np.ndarray:
    (d, n), rows = _read_lines(path)
    out = np.zeros((d, n), dtype=bool)
    for i, toks in enumerate(rows):
        for j, tok in enumerate(toks):
            if tok == "1":
                out[i, j] = True
            elif tok != "0":
                raise ValueError(
                    f"{os.fspath(path)}: line {i + 2}: mask value must be "
                    f"0 or 1, got {tok!r}"
                )
    out.setflags(write=False)
    return out


def write_assignment(path, assignments: AssignmentMasks) -> None:
    """Write component labels: 0 = unassigned/unobserved, 1..k = component."""
    labels = assignments.labels()
    d, n = labels.shape
    rows = ([str(int(v)) for v in row] for row in labels)
    _write_lines(path, f"{d} {n}", rows)


def read_assignment(path, k: int | None = None) -> AssignmentMasks:
    """Read a label matrix back into masks.

    With k omitted, the number of components is the largest label present.
    """
    (d, n), rows = _read_lines(path)
    labels = np.zeros((d, n), dtype=np.int64)
    for i, toks in enumerate(rows):
        for j, tok in enumerate(toks):
            try:
                v = int(tok)
            except ValueError:
                raise ValueError(
                    f"{os.fspath(path)}: line {i + 2}: bad label {tok!r}"
                ) from None
            if v < 0:
                raise ValueError(
                    f"{os.fspath(path)}: line {i + 2}: negative label {v}"
                )
            labels[i, j] = v
    found = int(labels.max())
    if k is None:
        k = max(found, 1)
    elif found > k:
        raise ValueError(f"label {found} exceeds declared k = {k}")
    return AssignmentMasks(masks=tuple(labels == i + 1 for i in range(k)))
