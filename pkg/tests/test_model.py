import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmc.model import (
    NA_TOKEN,
    AssignmentMasks,
    LowRankFactorization,
    MixtureProblem,
    ObservedMixture,
    as_mask,
    as_matrix,
    column_restrict,
    masks_union,
    read_assignment,
    read_mask,
    read_matrix,
    read_observed,
    write_assignment,
    write_mask,
    write_matrix,
    write_observed,
)


# ---------- coercion ---------- #


def test_as_matrix_copies_and_freezes():
    src = [[1.0, 2.0], [3.0, 4.0]]
    m = as_matrix(src)
    assert m.dtype == np.float64 and m.shape == (2, 2)
    with pytest.raises(ValueError):
        m[0, 0] = 9.0


def test_as_matrix_rejects_bad_shapes_and_values():
    with pytest.raises(ValueError):
        as_matrix(np.ones(3))
    with pytest.raises(ValueError):
        as_matrix(np.ones((0, 2)))
    with pytest.raises(ValueError, match=r"\(1, 1\)"):
        as_matrix([[1.0, 2.0], [3.0, np.nan]])
    with pytest.raises(ValueError, match="non-finite"):
        as_matrix([[np.inf]])


def test_as_mask_accepts_bool_and_binary_numeric():
    assert as_mask(np.array([[True, False]])).tolist() == [[True, False]]
    assert as_mask(np.array([[0.0, 1.0]])).tolist() == [[False, True]]
    assert as_mask(np.array([[0, 1], [1, 0]])).dtype == bool


def test_as_mask_rejects_non_binary():
    with pytest.raises(ValueError, match=r"\(0, 1\)"):
        as_mask(np.array([[0, 2]]))
    with pytest.raises(ValueError):
        as_mask(np.array([[0.5]]))


# ---------- ObservedMixture ---------- #


def test_observed_mixture_zero_fills_unobserved():
    vals = np.array([[1.0, 7.0], [3.0, 4.0]])
    mask = np.array([[True, False], [True, True]])
    obs = ObservedMixture(values=vals, observed=mask)
    assert obs.values[0, 1] == 0.0  # placeholder, not the 7
    assert obs.values[1, 1] == 4.0
    assert obs.count_observed() == 3
    assert obs.shape == (2, 2)


def test_observed_mixture_allows_non_finite_garbage_when_unobserved():
    vals = np.array([[1.0, np.nan]])
    mask = np.array([[True, False]])
    obs = ObservedMixture(values=vals, observed=mask)
    assert obs.values[0, 1] == 0.0


def test_observed_mixture_rejects_non_finite_observed():
    with pytest.raises(ValueError, match="finite"):
        ObservedMixture(
            values=np.array([[np.nan, 1.0]]),
            observed=np.array([[True, True]]),
        )


def test_observed_mixture_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        ObservedMixture(
            values=np.ones((2, 2)), observed=np.ones((2, 3), dtype=bool)
        )


# ---------- AssignmentMasks / masks_union ---------- #


def test_masks_union_two_disjoint_singletons():
    a = np.zeros((3, 3), dtype=bool)
    b = np.zeros((3, 3), dtype=bool)
    a[0, 0] = True
    b[2, 1] = True
    u = masks_union([a, b])
    assert u.sum() == 2 and u[0, 0] and u[2, 1]


def test_masks_union_k1_identity():
    m = np.array([[True, False], [False, True]])
    assert np.array_equal(masks_union([m]), m)


def test_masks_union_reports_first_overlap():
    a = np.zeros((2, 2), dtype=bool)
    b = np.zeros((2, 2), dtype=bool)
    a[1, 0] = b[1, 0] = True
    with pytest.raises(ValueError, match=r"overlap at \(1, 0\)"):
        masks_union([a, b])


def test_assignment_masks_disjointness_is_total():
    # constructing from overlapping masks always fails, whatever the order
    a = np.array([[True, True], [False, False]])
    b = np.array([[False, True], [True, False]])
    with pytest.raises(ValueError, match="overlap"):
        AssignmentMasks(masks=(a, b))
    with pytest.raises(ValueError, match="overlap"):
        AssignmentMasks(masks=(b, a))


def test_assignment_masks_labels():
    a = np.array([[True, False], [False, False]])
    b = np.array([[False, False], [True, False]])
    am = AssignmentMasks(masks=(a, b))
    assert am.k == 2
    assert am.labels().tolist() == [[1, 0], [2, 0]]
    assert np.array_equal(am.union, a | b)


# ---------- LowRankFactorization ---------- #


def test_factorization_requires_orthonormal_basis():
    with pytest.raises(ValueError, match="orthonormal"):
        LowRankFactorization(
            basis=np.array([[1.0], [1.0]]), coefficients=np.ones((1, 3))
        )
    f = LowRankFactorization(
        basis=np.array([[1.0], [0.0]]), coefficients=np.array([[2.0, 3.0]])
    )
    assert f.rank == 1
    assert f.matrix().tolist() == [[2.0, 3.0], [0.0, 0.0]]


def test_factorization_rejects_row_mismatch():
    q, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((5, 2)))
    with pytest.raises(ValueError, match="rows"):
        LowRankFactorization(basis=q, coefficients=np.ones((3, 4)))


# ---------- MixtureProblem ---------- #


def _tiny_problem():
    x1 = np.outer([1.0, 2.0], [1.0, 1.0, 2.0])
    x2 = np.outer([3.0, 1.0], [1.0, 2.0, 1.0])
    m1 = np.array([[True, False, True], [False, False, False]])
    m2 = np.array([[False, True, False], [True, False, True]])
    assignments = AssignmentMasks(masks=(m1, m2))
    values = np.where(m1, x1, np.where(m2, x2, 0.0))
    obs = ObservedMixture(values=values, observed=m1 | m2)
    return x1, x2, assignments, obs


def test_mixture_problem_accepts_consistent_instance():
    x1, x2, assignments, obs = _tiny_problem()
    prob = MixtureProblem(
        truth=(x1, x2), assignments=assignments, observed=obs, rank=1, seed=0
    )
    assert prob.k == 2 and prob.shape == (2, 3)


def test_mixture_problem_rejects_value_disagreement():
    x1, x2, assignments, obs = _tiny_problem()
    bad = x1.copy()
    bad[0, 0] += 1.0
    with pytest.raises(ValueError, match=r"truth\[0\]"):
        MixtureProblem(
            truth=(bad, x2), assignments=assignments, observed=obs,
            rank=1, seed=0,
        )


def test_mixture_problem_rejects_rank_violation():
    x1, x2, assignments, obs = _tiny_problem()
    with pytest.raises(ValueError, match="rank"):
        MixtureProblem(
            truth=(np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), x2),
            assignments=assignments,
            observed=obs,
            rank=1,
            seed=0,
        )


def test_mixture_problem_rejects_union_mismatch():
    x1, x2, assignments, obs = _tiny_problem()
    bigger = obs.observed.copy()
    bigger[1, 1] = True
    obs2 = ObservedMixture(
        values=np.where(bigger, np.where(obs.observed, obs.values, x2), 0.0),
        observed=bigger,
    )
    with pytest.raises(ValueError, match="union"):
        MixtureProblem(
            truth=(x1, x2), assignments=assignments, observed=obs2,
            rank=1, seed=0,
        )


# ---------- column_restrict ---------- #


def test_column_restrict_selects_in_ascending_index_order():
    vals = np.array([[1.0], [0.0], [3.0], [0.0], [5.0]])
    mask = np.array([[True], [False], [True], [False], [True]])
    obs = ObservedMixture(values=vals, observed=mask)
    out = column_restrict(obs, 0, [0, 4])
    assert out.tolist() == [1.0, 5.0]
    full = column_restrict(obs, 0, [0, 2, 4])
    assert full.tolist() == [1.0, 3.0, 5.0]


def test_column_restrict_names_unobserved_index():
    vals = np.array([[1.0], [2.0]])
    mask = np.array([[True], [False]])
    obs = ObservedMixture(values=vals, observed=mask)
    with pytest.raises(ValueError, match=r"\(1, 0\) is not observed"):
        column_restrict(obs, 0, [0, 1])
    with pytest.raises(IndexError, match="row 5"):
        column_restrict(obs, 0, [5])
    with pytest.raises(IndexError, match="column 3"):
        column_restrict(obs, 3, [0])


def test_column_restrict_on_embedded_example_first_column():
    # first column of the built-in ambiguity example starts with two 1s
    from mmc.harness import counterexample_instance

    problem, _, _ = counterexample_instance()
    out = column_restrict(problem.observed, 0, [0, 1])
    assert out.tolist() == [1.0, 1.0]


# ---------- text round-trips ---------- #


def test_matrix_round_trip_exact(tmp_path):
    m = np.array([[1.5, -0.1, 3e300], [1e-308, 0.0, -7.25]])
    p1 = tmp_path / "a.mtx.txt"
    p2 = tmp_path / "b.mtx.txt"
    write_matrix(p1, m)
    back = read_matrix(p1)
    assert np.array_equal(back, m)
    write_matrix(p2, back)
    assert p1.read_bytes() == p2.read_bytes()


def test_matrix_header_and_layout(tmp_path):
    p = tmp_path / "m.mtx.txt"
    write_matrix(p, np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
    lines = p.read_text().splitlines()
    assert lines[0] == "3 2"
    assert len(lines) == 4
    assert lines[1].split() == ["1.0", "2.0"]


def test_observed_round_trip_with_na(tmp_path):
    vals = np.array([[1.25, 0.0], [0.0, -3.5]])
    mask = np.array([[True, False], [False, True]])
    obs = ObservedMixture(values=vals, observed=mask)
    p = tmp_path / "o.mtx.txt"
    write_observed(p, obs)
    text = p.read_text()
    assert NA_TOKEN in text
    back = read_observed(p)
    assert np.array_equal(back.observed, mask)
    assert np.array_equal(back.values, obs.values)
    p2 = tmp_path / "o2.mtx.txt"
    write_observed(p2, back)
    assert p.read_bytes() == p2.read_bytes()


def test_mask_round_trip_and_strictness(tmp_path):
    mask = np.array([[True, False], [False, True]])
    p = tmp_path / "m.mtx.txt"
    write_mask(p, mask)
    assert np.array_equal(read_mask(p), mask)
    bad = tmp_path / "bad.mtx.txt"
    bad.write_text("1 2\n0 2\n")
    with pytest.raises(ValueError, match="0 or 1"):
        read_mask(bad)


def test_assignment_round_trip(tmp_path):
    a = np.array([[True, False], [False, False]])
    b = np.array([[False, True], [False, False]])
    am = AssignmentMasks(masks=(a, b))
    p = tmp_path / "assign.mtx.txt"
    write_assignment(p, am)
    assert p.read_text().splitlines()[1] == "1 2"
    back = read_assignment(p, k=2)
    assert back.k == 2
    assert np.array_equal(back.masks[0], a)
    assert np.array_equal(back.masks[1], b)
    inferred = read_assignment(p)  # k from max label
    assert inferred.k == 2


def test_assignment_rejects_labels_beyond_k(tmp_path):
    p = tmp_path / "assign.mtx.txt"
    p.write_text("1 2\n1 3\n")
    with pytest.raises(ValueError, match="label"):
        read_assignment(p, k=2)


# ---------- format errors carry file/line context ---------- #


def test_read_matrix_error_messages(tmp_path):
    p = tmp_path / "x.mtx.txt"
    p.write_text("")
    with pytest.raises(ValueError, match="empty file"):
        read_matrix(p)

    p.write_text("2\n1.0\n2.0\n")
    with pytest.raises(ValueError, match="header"):
        read_matrix(p)

    p.write_text("2 2\n1.0 2.0\n3.0\n")
    with pytest.raises(ValueError, match="line 3: expected 2 values, found 1"):
        read_matrix(p)

    p.write_text("1 2\n1.0 zap\n")
    with pytest.raises(ValueError, match="line 2: bad value 'zap'"):
        read_matrix(p)

    p.write_text("2 1\n1.0\n")
    with pytest.raises(ValueError, match="expected 2 data lines"):
        read_matrix(p)


def test_read_matrix_rejects_na_where_dense_expected(tmp_path):
    p = tmp_path / "x.mtx.txt"
    p.write_text("1 2\n1.0 NA\n")
    with pytest.raises(ValueError, match="NA"):
        read_matrix(p)


# ---------- property: serialization is exact for finite doubles ---------- #


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.lists(
            st.floats(allow_nan=False, allow_infinity=False, width=64),
            min_size=3,
            max_size=3,
        ),
        min_size=2,
        max_size=4,
    )
)
def test_round_trip_property(tmp_path_factory, rows):
    m = np.array(rows, dtype=np.float64)
    path = tmp_path_factory.mktemp("rt") / "m.mtx.txt"
    write_matrix(path, m)
    back = read_matrix(path)
    # bit-exact: repr round-trips every finite double
    assert np.array_equal(back, m)
