"""Experiment harness: phase grids, sampling-bound campaigns, the embedded
4 x 5 counterexample, and image-mixing demonstrations.

Success for a recovery trial means every constituent is reproduced to
relative Frobenius error below `SUCCESS_THRESHOLD` after the best component
matching.  All experiment entry points are deterministic functions of their
seed: trial seeds are derived per (p, delta, trial) coordinate, so results do
not depend on grid order or on how trials are scheduled across workers.

Trial logs are JSON lines with fixed, sorted keys and no timing fields, so a
rerun with the same seed produces byte-identical files (wall-clock times stay
on the in-memory records only).
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import permutations
from time import perf_counter

import numpy as np

from .ammc import AmmcOptions, run_ammc, verify_mixture
from .lrmc import LrmcOptions, leading_subspace
from .model import (
    AssignmentMasks,
    MixtureProblem,
    ObservedMixture,
    as_matrix,
)
from .patterns import min_observation_rate, search_partition
from .seeding import derive_seed, substream
from .synth import SynthConfig, generate_mixture, perturb_subspaces

__all__ = [
    "SUCCESS_THRESHOLD",
    "MatchResult",
    "match_and_score",
    "classification_error",
    "TrialRecord",
    "PhaseGrid",
    "run_phase_grid",
    "write_grid_csv",
    "read_grid_csv",
    "write_trial_log",
    "read_trial_log",
    "desk_phase_preset",
    "full_phase_preset",
    "CampaignResult",
    "run_rate_bound_campaign",
    "counterexample_instance",
    "SuiteReport",
    "run_counterexample_suite",
    "MixedImages",
    "mix_images",
    "MixTrialResult",
    "run_mix_trial",
    "read_pgm",
    "write_pgm",
]

SUCCESS_THRESHOLD = 1e-8
_MATCH_LIMIT = 6


# ---------- component matching ---------- #


@dataclass(frozen=True)
class MatchResult:
    """Best pairing of estimates to truth.

    perm[k] is the estimate index matched to truth component k; errors[k] is
    the relative Frobenius error of that pairing.  `approximate` marks the
    greedy fallback used beyond the brute-force limit.
    """

    perm: tuple
    errors: tuple
    approximate: bool


def _rel_error(truth: np.ndarray, est: np.ndarray) -> float:
    denom = max(np.linalg.norm(truth), np.finfo(float).tiny)
    return float(np.linalg.norm(truth - est) / denom)


def match_and_score(truth, estimates, greedy: bool = False) -> MatchResult:
    """Match estimates to truth minimizing the worst relative error.

    Brute force over permutations for up to 6 components (ties resolved to
    the lexicographically smallest permutation); beyond that an explicit
    `greedy=True` opts into a best-pair-first heuristic flagged
    `approximate`.
    """
    truth = [as_matrix(x) for x in truth]
    estimates = [as_matrix(x) for x in estimates]
    if len(truth) != len(estimates):
        raise ValueError(
            f"{len(truth)} truth matrices vs {len(estimates)} estimates"
        )
    k = len(truth)
    if k == 0:
        raise ValueError("need at least one component")
    for x in truth + estimates:
        if x.shape != truth[0].shape:
            raise ValueError("all matrices must share one shape")
    errs = np.array(
        [[_rel_error(truth[a], estimates[b]) for b in range(k)] for a in range(k)]
    )
    if k > _MATCH_LIMIT and not greedy:
        raise ValueError(
            f"brute-force matching of {k} components would enumerate {k}! "
            f"permutations; pass greedy=True to accept an approximate match"
        )
    if k <= _MATCH_LIMIT:
        best_perm = None
        best_score = np.inf
        for perm in permutations(range(k)):
            score = max(errs[a, perm[a]] for a in range(k))
            if score < best_score:
                best_score = score
                best_perm = perm
        return MatchResult(
            perm=tuple(best_perm),
            errors=tuple(float(errs[a, best_perm[a]]) for a in range(k)),
            approximate=False,
        )
    remaining = errs.copy()
    perm = [-1] * k
    for _ in range(k):
        a, b = np.unravel_index(np.argmin(remaining), remaining.shape)
        perm[a] = int(b)
        remaining[a, :] = np.inf
        remaining[:, b] = np.inf
    return MatchResult(
        perm=tuple(perm),
        errors=tuple(float(errs[a, perm[a]]) for a in range(k)),
        approximate=True,
    )


def classification_error(
    truth: AssignmentMasks, estimate: AssignmentMasks, perm
) -> float:
    """Fraction of truly assigned entries whose estimated label disagrees.

    `perm` maps truth component k to estimate index perm[k] (as returned by
    match_and_score).  Entries the estimate left unassigned count as errors.
    """
    if truth.shape != estimate.shape:
        raise ValueError(
            f"assignment shapes differ: {truth.shape} vs {estimate.shape}"
        )
    if len(perm) != truth.k:
        raise ValueError(f"perm has {len(perm)} entries, expected {truth.k}")
    est_labels = estimate.labels()
    wrong = 0
    total = int(truth.union.sum())
    for k, mask in enumerate(truth.masks):
        wrong += int((est_labels[mask] != perm[k] + 1).sum())
    return wrong / total if total else 0.0


# ---------- phase-transition grid ---------- #


@dataclass(frozen=True)
class TrialRecord:
    """One recovery trial. `history` is the assignment-change count per outer
    iteration; `wall_time` is informational and never serialized."""

    d: int
    n: int
    r: int
    k: int
    p: float
    delta: float
    trial: int
    seed: int
    errors: tuple
    success: bool
    outer_iters: int
    converged: bool
    history: tuple
    wall_time: float = 0.0

    def __post_init__(self):
        expected = bool(self.errors) and max(self.errors) < SUCCESS_THRESHOLD
        if self.success != expected:
            raise ValueError(
                f"success flag {self.success} inconsistent with errors "
                f"{self.errors}"
            )


@dataclass(frozen=True)
class PhaseGrid:
    """Success rates over a (p, delta) grid; trials = 0 marks a grid read
    back from CSV, where the per-cell count is not stored."""

    p_values: tuple
    delta_values: tuple
    trials: int
    success_rate: np.ndarray

    def __post_init__(self):
        ps = tuple(float(p) for p in self.p_values)
        ds = tuple(float(x) for x in self.delta_values)
        for name, vals in (("p_values", ps), ("delta_values", ds)):
            if not vals:
                raise ValueError(f"{name} is empty")
            if any(not 0.0 <= v <= 1.0 for v in vals):
                raise ValueError(f"{name} must lie in [0, 1], got {vals}")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ValueError(f"{name} must be strictly increasing: {vals}")
        if self.trials < 0:
            raise ValueError(f"trials must be >= 0, got {self.trials}")
        rate = np.asarray(self.success_rate, dtype=np.float64)
        if rate.shape != (len(ps), len(ds)):
            raise ValueError(
                f"success_rate shape {rate.shape} != "
                f"({len(ps)}, {len(ds)})"
            )
        if ((rate < 0) | (rate > 1)).any():
            raise ValueError("success rates must lie in [0, 1]")
        rate = rate.copy()
        rate.setflags(write=False)
        object.__setattr__(self, "p_values", ps)
        object.__setattr__(self, "delta_values", ds)
        object.__setattr__(self, "success_rate", rate)


def _phase_trial(args) -> TrialRecord:
    d, n, r, k, p, delta, trial, seed, opts = args
    start = perf_counter()
    cfg = SynthConfig(d=d, n=n, r=r, k=k, p=p, delta=delta, seed=seed)
    problem = generate_mixture(cfg)
    true_bases = [leading_subspace(x, r)[0] for x in problem.truth]
    init = perturb_subspaces(true_bases, delta, seed=seed)
    result = run_ammc(problem.observed, init, opts)
    match = match_and_score(problem.truth, result.state.completions)
    success = bool(max(match.errors) < SUCCESS_THRESHOLD)
    return TrialRecord(
        d=d,
        n=n,
        r=r,
        k=k,
        p=float(p),
        delta=float(delta),
        trial=trial,
        seed=seed,
        errors=match.errors,
        success=success,
        outer_iters=result.outer_iters,
        converged=result.converged,
        history=result.history,
        wall_time=perf_counter() - start,
    )


def run_phase_grid(
    cfg: SynthConfig,
    p_values,
    delta_values,
    trials: int,
    seed: int | None = None,
    workers: int = 1,
    opts: AmmcOptions | None = None,
):
    """Run `trials` recovery trials per (p, delta) cell of the grid.

    `cfg` supplies the problem dimensions (its own p, delta and seed are
    overridden per cell and per trial).  Returns (PhaseGrid, records) with
    records ordered by (p index, delta index, trial).  The result is
    independent of `workers`.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    master = cfg.seed if seed is None else seed
    base_opts = opts if opts is not None else AmmcOptions(k=cfg.k, rank=cfg.r)
    if base_opts.k != cfg.k or base_opts.rank != cfg.r:
        raise ValueError(
            f"options are for k={base_opts.k}, rank={base_opts.rank}; "
            f"config has k={cfg.k}, r={cfg.r}"
        )
    ps = tuple(float(p) for p in p_values)
    ds = tuple(float(x) for x in delta_values)

    tasks = []
    for ip, p in enumerate(ps):
        for idl, delta in enumerate(ds):
            for t in range(trials):
                trial_seed = derive_seed(master, "trial", ip, idl, t)
                tasks.append(
                    (cfg.d, cfg.n, cfg.r, cfg.k, p, delta, t, trial_seed, base_opts)
                )

    if workers == 1:
        records = [_phase_trial(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_phase_trial, tasks, chunksize=1))

    rate = np.zeros((len(ps), len(ds)))
    idx = 0
    for ip in range(len(ps)):
        for idl in range(len(ds)):
            cell = records[idx : idx + trials]
            idx += trials
            rate[ip, idl] = sum(rec.success for rec in cell) / trials
    grid = PhaseGrid(
        p_values=ps, delta_values=ds, trials=trials, success_rate=rate
    )
    return grid, records


def _fmt(v: float) -> str:
    return repr(float(v))


def write_grid_csv(grid: PhaseGrid, path) -> None:
    """CSV with header p,delta,success_rate; rows ordered p-major."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("p,delta,success_rate\n")
        for ip, p in enumerate(grid.p_values):
            for idl, delta in enumerate(grid.delta_values):
                fh.write(
                    f"{_fmt(p)},{_fmt(delta)},{_fmt(grid.success_rate[ip, idl])}\n"
                )


def read_grid_csv(path) -> PhaseGrid:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "p,delta,success_rate":
        raise ValueError(f"{path}: missing 'p,delta,success_rate' header")
    triples = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 3:
            raise ValueError(f"{path}: line {i}: expected 3 fields")
        try:
            triples.append(tuple(float(x) for x in parts))
        except ValueError:
            raise ValueError(f"{path}: line {i}: bad value in {ln!r}") from None
    ps = tuple(sorted({t[0] for t in triples}))
    ds = tuple(sorted({t[1] for t in triples}))
    rate = np.full((len(ps), len(ds)), np.nan)
    for p, delta, v in triples:
        rate[ps.index(p), ds.index(delta)] = v
    if np.isnan(rate).any():
        raise ValueError(f"{path}: grid is not a complete p x delta product")
    return PhaseGrid(p_values=ps, delta_values=ds, trials=0, success_rate=rate)


_LOG_FIELDS = (
    "d", "n", "r", "k", "p", "delta", "trial", "seed",
    "errors", "success", "outer_iters", "converged", "history",
)


def write_trial_log(records, path) -> None:
    """JSON-lines trial log: one record per line, sorted fixed keys, no
    timing fields — reruns with the same seed are byte-identical."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for rec in records:
            payload = {
                "d": rec.d,
                "n": rec.n,
                "r": rec.r,
                "k": rec.k,
                "p": rec.p,
                "delta": rec.delta,
                "trial": rec.trial,
                "seed": rec.seed,
                "errors": list(rec.errors),
                "success": rec.success,
                "outer_iters": rec.outer_iters,
                "converged": rec.converged,
                "history": list(rec.history),
            }
            fh.write(json.dumps(payload, sort_keys=True) + "\n")


def read_trial_log(path) -> list:
    records = []
    with open(path, "r", encoding="ascii") as fh:
        for i, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: line {i}: {exc}") from None
            missing = [f for f in _LOG_FIELDS if f not in obj]
            if missing:
                raise ValueError(f"{path}: line {i}: missing fields {missing}")
            records.append(
                TrialRecord(
                    d=obj["d"],
                    n=obj["n"],
                    r=obj["r"],
                    k=obj["k"],
                    p=obj["p"],
                    delta=obj["delta"],
                    trial=obj["trial"],
                    seed=obj["seed"],
                    errors=tuple(obj["errors"]),
                    success=obj["success"],
                    outer_iters=obj["outer_iters"],
                    converged=obj["converged"],
                    history=tuple(obj["history"]),
                )
            )
    return records


def desk_phase_preset() -> dict:
    """Desk-scale phase study: 5 x 5 grid, 20 trials per cell, sized to run
    on one machine in well under half an hour."""
    return {
        "cfg": SynthConfig(d=100, n=100, r=5, k=2, p=1.0),
        "p_values": (0.6, 0.7, 0.8, 0.9, 1.0),
        "delta_values": (0.0, 0.05, 0.1, 0.2, 0.3),
        "trials": 20,
        "opts": AmmcOptions(k=2, rank=5, max_outer_iters=40),
    }


def full_phase_preset() -> dict:
    """Full-scale phase study (hours of compute): 11 x 11 grid, 100 trials."""
    return {
        "cfg": SynthConfig(d=100, n=100, r=5, k=2, p=1.0),
        "p_values": tuple(round(0.1 * i, 1) for i in range(11)),
        "delta_values": tuple(round(0.1 * i, 1) for i in range(11)),
        "trials": 100,
        "opts": AmmcOptions(k=2, rank=5, max_outer_iters=100),
    }


# ---------- sampling-rate campaign ---------- #


@dataclass(frozen=True)
class CampaignResult:
    """Partition-search outcomes for Bernoulli(p) masks at the minimum rate.

    `failure_rate` should stay below `bound` = 2 (r + 1) eps (and in
    practice sits far below it, since the bound is loose)."""

    d: int
    r: int
    eps: float
    p: float
    n_cols: int
    trials: int
    outcomes: tuple
    failure_rate: float
    bound: float
    notes: tuple


def run_rate_bound_campaign(
    d: int, r: int, eps: float, trials: int, seed: int = 0, budget: int = 4
) -> CampaignResult:
    """Sample masks at the closed-form minimum rate and search partitions.

    Each trial draws a d x (r + 1)(d - r + 1) Bernoulli(p) mask at the
    minimum observation rate and runs `search_partition`.  A trial fails when
    no passing partition is found (including masks without enough usable
    columns).
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    bound_info = min_observation_rate(d, r, eps)
    if bound_info.vacuous:
        raise ValueError(
            f"rate bound p = {bound_info.p:.4f} exceeds 1 for d={d}, "
            f"eps={eps}; increase d or eps"
        )
    p = bound_info.p
    n_cols = (r + 1) * (d - r + 1)
    outcomes = []
    notes = []
    for t in range(trials):
        mask = substream(seed, "campaign", t).random((d, n_cols)) < p
        try:
            report = search_partition(
                mask, r, budget=budget, seed=derive_seed(seed, "campaign-search", t)
            )
            outcomes.append(bool(report.passed))
        except ValueError as exc:
            outcomes.append(False)
            notes.append(f"trial {t}: {exc}")
    failure_rate = 1.0 - sum(outcomes) / trials
    return CampaignResult(
        d=d,
        r=r,
        eps=eps,
        p=p,
        n_cols=n_cols,
        trials=trials,
        outcomes=tuple(outcomes),
        failure_rate=failure_rate,
        bound=2.0 * (r + 1) * eps,
        notes=tuple(notes),
    )


# ---------- embedded counterexample ---------- #


def counterexample_instance():
    """The 5 x 4 rank-1 instance with two incompatible exact explanations.

    Returns (problem, false_truth, false_assignments): `problem` carries the
    generating pair and its assignment; the false pair is a different pair of
    rank-1 matrices that also agrees with every one of the 16 observed
    entries, under a different assignment.  Sixteen entries, four per column,
    two per column per component.
    """
    x1 = np.outer([1.0, 1.0, 1.0, 1.0, 1.0], [1.0, 2.0, 3.0, 4.0])
    x2 = np.outer([1.0, 2.0, 3.0, 4.0, 5.0], [1.0, 2.0, 3.0, 4.0])

    mask1 = np.zeros((5, 4), dtype=bool)
    for j, rows in enumerate([(0, 1), (1, 2), (2, 3), (3, 4)]):
        mask1[rows, j] = True
    mask2 = np.zeros((5, 4), dtype=bool)
    for j, rows in enumerate([(2, 3), (3, 4), (0, 4), (0, 1)]):
        mask2[rows, j] = True

    assignments = AssignmentMasks(masks=(mask1, mask2))
    values = np.where(mask1, x1, 0.0) + np.where(mask2, x2, 0.0)
    observed = ObservedMixture(values=values, observed=mask1 | mask2)
    problem = MixtureProblem(
        truth=(x1, x2),
        assignments=assignments,
        observed=observed,
        rank=1,
        seed=0,
    )

    f1 = np.outer([1.0, 1.0 / 60.0, 1.0 / 20.0, 1.0 / 5.0, 1.0],
                  [60.0, 40.0, 15.0, 4.0])
    f2 = np.outer([1.0, 8.0, 1.0, 4.0, 40.0], [1.0, 0.25, 3.0, 1.0])

    fmask1 = np.zeros((5, 4), dtype=bool)
    for i, j in [(0, 3), (1, 0), (2, 0), (2, 1), (3, 1), (3, 2), (4, 2), (4, 3)]:
        fmask1[i, j] = True
    fmask2 = np.zeros((5, 4), dtype=bool)
    for i, j in [(0, 0), (0, 2), (1, 1), (1, 3), (2, 2), (3, 0), (3, 3), (4, 1)]:
        fmask2[i, j] = True
    false_assignments = AssignmentMasks(masks=(fmask1, fmask2))

    return problem, (as_matrix(f1), as_matrix(f2)), false_assignments


@dataclass(frozen=True)
class SuiteReport:
    """Assertion-by-assertion outcome of the counterexample suite."""

    column_counts_ok: bool
    rank_one_ok: bool
    sigma_ratios: tuple
    true_pair_verifies: bool
    false_pair_verifies: bool
    assignments_differ: bool

    @property
    def passed(self) -> bool:
        return (
            self.column_counts_ok
            and self.rank_one_ok
            and self.true_pair_verifies
            and self.false_pair_verifies
            and self.assignments_differ
        )

    def lines(self) -> tuple:
        def fmt(name, ok):
            return f"{'PASS' if ok else 'FAIL'} {name}"

        worst = max(self.sigma_ratios)
        return (
            fmt("every column carries r + 1 = 2 entries per component",
                self.column_counts_ok),
            fmt(f"all four matrices are rank-1 (worst sigma2/sigma1 = {worst:.2e})",
                self.rank_one_ok),
            fmt("generating pair explains all 16 observed entries",
                self.true_pair_verifies),
            fmt("false pair also explains all 16 observed entries",
                self.false_pair_verifies),
            fmt("the two explanations assign entries differently",
                self.assignments_differ),
        )


def run_counterexample_suite() -> SuiteReport:
    """Check the embedded instance end to end.

    The suite asserts that (a) the sampling pattern has exactly r + 1 = 2
    entries per column per component, (b) all four candidate matrices are
    numerically rank-1 (sigma2/sigma1 < 1e-10), (c) the generating pair and
    the false pair both pass `verify_mixture` on the observed entries, and
    (d) the two verified assignments differ — so the observed data admit two
    genuinely different exact explanations.
    """
    problem, false_truth, _ = counterexample_instance()
    obs = problem.observed

    counts_ok = True
    for masks in (problem.assignments.masks,):
        for m in masks:
            counts_ok &= bool((m.sum(axis=0) == 2).all())
    counts_ok &= obs.count_observed() == 16
    counts_ok &= bool((obs.observed.sum(axis=0) == 4).all())

    ratios = []
    for x in (*problem.truth, *false_truth):
        s = np.linalg.svd(x, compute_uv=False)
        ratios.append(float(s[1] / s[0]))
    rank_one_ok = max(ratios) < 1e-10

    true_ok, true_assign = verify_mixture(problem.truth, obs, r=1)
    false_ok, false_assign = verify_mixture(false_truth, obs, r=1)

    differ = False
    if true_ok and false_ok:
        differ = any(
            not np.array_equal(a, b)
            for a, b in zip(true_assign.masks, false_assign.masks)
        )

    return SuiteReport(
        column_counts_ok=bool(counts_ok),
        rank_one_ok=bool(rank_one_ok),
        sigma_ratios=tuple(ratios),
        true_pair_verifies=bool(true_ok),
        false_pair_verifies=bool(false_ok),
        assignments_differ=bool(differ),
    )


# ---------- image mixing ---------- #


@dataclass(frozen=True)
class MixedImages:
    """Pixel-level mixture of two images; `identical` flags a == b, in which
    case the mixture equals both inputs and classification is undefined."""

    problem: MixtureProblem
    identical: bool


def mix_images(a, b, seed: int = 0, rank: int | None = None) -> MixedImages:
    """Mix two equal-shape images by a fair per-pixel coin (full observation).

    `rank` bounds the numeric rank of the inputs for validation; it defaults
    to min(d, n), i.e. no constraint.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    if rank is None:
        rank = min(a.shape)
    take_a = substream(seed, "mix").random(a.shape) < 0.5
    masks = (take_a, ~take_a)
    values = np.where(take_a, a, b)
    observed = np.ones(a.shape, dtype=bool)
    problem = MixtureProblem(
        truth=(a, b),
        assignments=AssignmentMasks(masks=masks),
        observed=ObservedMixture(values=values, observed=observed),
        rank=rank,
        seed=seed,
    )
    return MixedImages(problem=problem, identical=bool(np.array_equal(a, b)))


@dataclass(frozen=True)
class MixTrialResult:
    errors: tuple
    classification_error: float
    converged: bool
    outer_iters: int


def run_mix_trial(
    a, b, rank: int, seed: int = 0, opts: AmmcOptions | None = None
) -> MixTrialResult:
    """Mix two images, recover with the true subspaces as init, and score."""
    mixed = mix_images(a, b, seed=seed, rank=rank)
    if mixed.identical:
        raise ValueError("images are identical; classification is undefined")
    problem = mixed.problem
    if opts is None:
        opts = AmmcOptions(k=2, rank=rank, seed=seed)
    init = [leading_subspace(x, rank)[0] for x in problem.truth]
    result = run_ammc(problem.observed, init, opts)
    match = match_and_score(problem.truth, result.state.completions)
    cls = classification_error(
        problem.assignments, result.state.assignments, match.perm
    )
    return MixTrialResult(
        errors=match.errors,
        classification_error=cls,
        converged=result.converged,
        outer_iters=result.outer_iters,
    )


# ---------- binary PGM ---------- #


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM with maxval <= 255 into a float64 array."""
    with open(path, "rb") as fh:
        data = fh.read()

    pos = 0

    def next_token() -> bytes:
        nonlocal pos
        while pos < len(data):
            ch = data[pos : pos + 1]
            if ch == b"#":
                end = data.find(b"\n", pos)
                pos = len(data) if end < 0 else end + 1
            elif ch.isspace():
                pos += 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            if data[pos : pos + 1] == b"#":
                break
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated header")
        return data[start:pos]

    magic = next_token()
    if magic != b"P5":
        raise ValueError(f"{path}: not a binary PGM (magic {magic!r}, need P5)")
    fields = [next_token() for _ in range(3)]
    try:
        width, height, maxval = (int(tok) for tok in fields)
    except ValueError:
        raise ValueError(f"{path}: non-numeric header field") from None
    if width < 1 or height < 1:
        raise ValueError(f"{path}: bad dimensions {width} x {height}")
    if not 0 < maxval <= 255:
        raise ValueError(
            f"{path}: unsupported maxval {maxval} (only 8-bit PGMs)"
        )
    pos += 1  # exactly one whitespace byte after maxval
    expected = width * height
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise ValueError(
            f"{path}: expected {expected} raster bytes, found {len(raster)}"
        )
    img = np.frombuffer(raster, dtype=np.uint8).astype(np.float64)
    return img.reshape(height, width)


def write_pgm(path, image) -> None:
    """Write a matrix as binary (P5) 8-bit PGM, rounding and clipping."""
    img = as_matrix(image)
    h, w = img.shape
    raster = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())
