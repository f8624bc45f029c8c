import math

import numpy as np
import pytest

from mmc.patterns import (
    check_pattern_exhaustive,
    check_pattern_flow,
    min_column_samples,
    min_observation_rate,
    search_partition,
    verify_partition,
    violates,
)
from mmc.synth import sample_fixed_m


# ---------- hand instances ---------- #


def test_all_ones_pattern_passes():
    d, r = 8, 2
    mask = np.ones((d, d - r + 1), dtype=bool)
    for check in (check_pattern_exhaustive, check_pattern_flow):
        rep = check(mask, r)
        assert rep.passed, rep


def test_identical_supports_fail_with_two_column_witness():
    d, r = 8, 2
    mask = np.zeros((d, 4), dtype=bool)
    mask[:3, 0] = True  # r + 1 rows
    mask[:3, 1] = True  # same rows again
    mask[3:6, 2] = True
    mask[4:7, 3] = True
    for check in (check_pattern_exhaustive, check_pattern_flow):
        rep = check(mask, r)
        assert not rep.passed
        assert rep.witness_columns is not None
        assert violates(mask, r, rep.witness_columns)
    # the minimal witness is exactly the duplicated pair
    rep = check_pattern_exhaustive(mask, r)
    assert sorted(rep.witness_columns) == [0, 1]


def test_single_column_boundary():
    d, r = 6, 2
    col = np.zeros((d, 1), dtype=bool)
    col[: r + 1, 0] = True
    assert check_pattern_exhaustive(col, r).passed
    assert check_pattern_flow(col, r).passed
    thin = np.zeros((d, 1), dtype=bool)
    thin[:r, 0] = True  # only r entries: the singleton itself violates
    assert not check_pattern_exhaustive(thin, r).passed
    assert not check_pattern_flow(thin, r).passed


def test_empty_column_fails_immediately():
    mask = np.ones((6, 3), dtype=bool)
    mask[:, 1] = False
    for check in (check_pattern_exhaustive, check_pattern_flow):
        rep = check(mask, 1)
        assert not rep.passed
        assert violates(mask, 1, rep.witness_columns)


def test_exhaustive_refuses_wide_masks():
    mask = np.ones((30, 23), dtype=bool)
    with pytest.raises(ValueError, match="flow"):
        check_pattern_exhaustive(mask, 2)
    assert check_pattern_flow(np.ones((30, 28), dtype=bool), 2).passed


def test_staircase_pattern_passes():
    # 5 columns, 6 rows, r=1: each column observes rows (j, j+1): a connected
    # chain, every subset of s columns touches >= s+1 rows.
    d = 6
    mask = np.zeros((d, 5), dtype=bool)
    for j in range(5):
        mask[j, j] = mask[j + 1, j] = True
    assert check_pattern_exhaustive(mask, 1).passed
    assert check_pattern_flow(mask, 1).passed


def test_cycle_pattern_fails_r1():
    # 6 columns forming a closed 6-cycle on 6 rows: the full-size proper
    # subsets of 5 columns touch 6 rows (5+1, fine) but all 6 columns only
    # count as proper subsets of the 6-column instance... the failing subset
    # is any 6-cycle restricted set with |S| = 6 > c - 1 = 5, so the cycle
    # fails through its 5-subsets: 5 columns of a cycle touch 6 rows -> pass;
    # build instead two disjoint 3-cycles: 3 columns on 3 rows < 3 + 1.
    mask = np.zeros((6, 6), dtype=bool)
    for j in range(3):
        mask[j, j] = mask[(j + 1) % 3, j] = True
    for j in range(3):
        mask[3 + j, 3 + j] = mask[3 + (j + 1) % 3, 3 + j] = True
    for check in (check_pattern_exhaustive, check_pattern_flow):
        rep = check(mask, 1)
        assert not rep.passed
        assert violates(mask, 1, rep.witness_columns)
        assert len(rep.witness_columns) == 3


# ---------- oracle equivalence + witness audit ---------- #


def _random_mask(rng, d, c):
    mask = rng.random((d, c)) < rng.uniform(0.15, 0.9)
    return mask


def test_flow_matches_exhaustive_on_random_instances():
    rng = np.random.default_rng(1234)
    checked = 0
    for _ in range(300):
        d = int(rng.integers(3, 13))
        c = int(rng.integers(1, min(d, 9) + 1))
        r = int(rng.integers(1, 4))
        mask = _random_mask(rng, d, c)
        ex = check_pattern_exhaustive(mask, r)
        fl = check_pattern_flow(mask, r)
        assert ex.passed == fl.passed, (mask.astype(int), r)
        if not ex.passed:
            assert violates(mask, r, ex.witness_columns)
            assert violates(mask, r, fl.witness_columns)
        checked += 1
    assert checked == 300


def test_adding_observations_never_breaks_a_pass():
    rng = np.random.default_rng(77)
    flips = 0
    while flips < 60:
        d = int(rng.integers(4, 11))
        c = int(rng.integers(2, 8))
        r = int(rng.integers(1, 3))
        mask = _random_mask(rng, d, c)
        if not check_pattern_flow(mask, r).passed:
            continue
        zero_at = np.argwhere(~mask)
        if len(zero_at) == 0:
            continue
        i, j = zero_at[rng.integers(len(zero_at))]
        mask2 = mask.copy()
        mask2[i, j] = True
        assert check_pattern_flow(mask2, r).passed
        flips += 1


# ---------- partitions ---------- #


def test_verify_partition_all_ones():
    d, r = 7, 2
    n = (r + 1) * (d - r + 1)
    mask = np.ones((d, n), dtype=bool)
    partition = [
        list(range(t * (d - r + 1), (t + 1) * (d - r + 1)))
        for t in range(r + 1)
    ]
    rep = verify_partition(mask, r, partition)
    assert rep.passed
    assert rep.witness_partition is not None


def test_verify_partition_structural_errors():
    d, r = 7, 2
    n = (r + 1) * (d - r + 1)
    mask = np.ones((d, n), dtype=bool)
    good = [
        list(range(t * (d - r + 1), (t + 1) * (d - r + 1)))
        for t in range(r + 1)
    ]
    with pytest.raises(ValueError, match="group"):
        verify_partition(mask, r, good[:2])  # wrong group count
    dup = [list(g) for g in good]
    dup[1][0] = dup[0][0]
    with pytest.raises(ValueError, match="more than one group"):
        verify_partition(mask, r, dup)
    short = [list(g) for g in good]
    short[0] = short[0][:-1]
    with pytest.raises(ValueError, match="d - r \\+ 1"):
        verify_partition(mask, r, short)
    oob = [list(g) for g in good]
    oob[0][0] = n
    with pytest.raises(ValueError, match="range"):
        verify_partition(mask, r, oob)


def test_verify_partition_failure_names_group_and_columns():
    d, r = 6, 1
    n = (r + 1) * (d - r + 1)  # 12
    mask = np.ones((d, n), dtype=bool)
    # spoil two columns of the second group with identical 2-row support
    mask[:, 6] = False
    mask[:2, 6] = True
    mask[:, 7] = False
    mask[:2, 7] = True
    partition = [list(range(0, 6)), list(range(6, 12))]
    rep = verify_partition(mask, r, partition)
    assert not rep.passed
    assert "group 1" in rep.note
    assert violates(mask, r, rep.witness_columns)
    assert set(rep.witness_columns) <= set(range(6, 12))


def test_search_partition_all_ones_greedy():
    d, r = 6, 1
    n = (r + 1) * (d - r + 1)
    mask = np.ones((d, n), dtype=bool)
    rep = search_partition(mask, r, budget=0, seed=0)
    assert rep.passed
    assert "attempt 0" in rep.note
    groups = rep.witness_partition
    assert len(groups) == r + 1
    flat = sorted(c for g in groups for c in g)
    assert len(flat) == len(set(flat))


def test_search_partition_identical_columns_inconclusive_fail():
    d, r = 6, 1
    n = (r + 1) * (d - r + 1)
    mask = np.zeros((d, n), dtype=bool)
    mask[:2, :] = True  # every column has the same 2-row support
    rep = search_partition(mask, r, budget=3, seed=5)
    assert not rep.passed
    assert not rep.conclusive
    assert "heuristic" in rep.note


def test_search_partition_requires_enough_columns():
    d, r = 10, 2
    mask = np.ones((d, 10), dtype=bool)
    need = (r + 1) * (d - r + 1)
    with pytest.raises(ValueError, match=str(need)):
        search_partition(mask, r)


def test_search_partition_ignores_thin_columns():
    d, r = 6, 1
    n = (r + 1) * (d - r + 1)
    mask = np.ones((d, n + 4), dtype=bool)
    mask[:, n:] = False
    mask[0, n:] = True  # 4 columns with a single entry: unusable
    rep = search_partition(mask, r, budget=0, seed=0)
    assert rep.passed
    used = {c for g in rep.witness_partition for c in g}
    assert used.isdisjoint(set(range(n, n + 4)))


# ---------- sampling-rate formulas ---------- #


def test_min_observation_rate_formula_oracle():
    # independent evaluation of (2/d) max{2r, 12 (ln(d/eps) + 1)}
    d, r, eps = 10_000, 5, 0.1
    oracle = (2.0 / d) * max(2 * r, 12.0 * (math.log(d / eps) + 1.0))
    got = min_observation_rate(d, r, eps)
    assert abs(got.p - oracle) < 1e-15
    assert abs(got.p - 0.0300) < 5e-4
    assert not got.vacuous


def test_min_observation_rate_vacuous_and_errors():
    assert min_observation_rate(100, 5, 0.05).vacuous
    with pytest.raises(ValueError, match="d / 6"):
        min_observation_rate(1000, 300, 0.1)
    with pytest.raises(ValueError, match="eps"):
        min_observation_rate(100, 5, 0.0)
    with pytest.raises(ValueError, match="eps"):
        min_observation_rate(100, 5, 1.0)


def test_min_column_samples_matches_rate():
    d, r, eps = 150, 3, 0.1
    m = min_column_samples(d, r, eps)
    assert m == math.ceil(12.0 * (math.log(d / eps) + 1.0))
    rate = min_observation_rate(d, r, eps)
    assert m == math.ceil(rate.p * d / 2.0)


def test_fixed_m_masks_are_searchable_at_the_bound():
    # Columns observed on m >= the bound's count should admit a passing
    # partition nearly always at this size; one seeded draw suffices here
    # (the statistical claim lives in the acceptance campaign).
    d, r, eps = 150, 3, 0.1
    m = min_column_samples(d, r, eps)
    assert m <= d
    n = (r + 1) * (d - r + 1)
    mask = sample_fixed_m(d, n, m, seed=21)
    rep = search_partition(mask, r, budget=2, seed=3)
    assert rep.passed
    verify = verify_partition(mask, r, rep.witness_partition)
    assert verify.passed
