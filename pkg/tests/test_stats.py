import math
import random

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

import oracles
from pollsim.demographics import CrosstabKey, enumerate_cells
from pollsim.stats import (
    Grouping,
    UndefinedCorrelation,
    bootstrap_ci,
    bootstrap_means,
    cell_summary,
    compare,
    compare_question,
    gender_histograms,
    histogram,
    marginalize,
    mape,
    pearson_r,
    summarize_table,
)

finite = st.floats(-1e3, 1e3, allow_nan=False).map(lambda x: round(x, 3))


def test_cell_summary_matches_oracle():
    xs = [1, 2, 2, 4, 3, 1]
    s = cell_summary(xs, 200, 1, question_id="q", cell="c")
    assert s.n == 6
    assert s.mean == pytest.approx(oracles.float_mean(xs), abs=1e-12)
    assert s.sd == pytest.approx(oracles.sd(xs), abs=1e-12)
    assert s.sem == pytest.approx(oracles.sem(xs), abs=1e-12)
    assert s.ci_low <= s.mean <= s.ci_high


def test_empty_and_singleton_cells():
    empty = cell_summary([], 10)
    assert empty.n == 0 and empty.mean is None and empty.ci_low is None
    one = cell_summary([3], 10)
    assert (one.n, one.mean, one.sd, one.sem, one.ci_low, one.ci_high) == (1, 3.0, None, None, 3.0, 3.0)
    with pytest.raises(ValueError):
        cell_summary([1, 2], 0)


def test_bootstrap_multinomial_equals_index_resampling_in_distribution():
    scores = [1] * 30 + [2] * 50 + [4] * 20
    fast = bootstrap_means(scores, 20000, np.random.default_rng(0))
    rng = np.random.default_rng(1)
    arr = np.asarray(scores, float)
    slow = arr[rng.integers(0, arr.size, size=(20000, arr.size))].mean(axis=1)
    assert fast.mean() == pytest.approx(slow.mean(), abs=0.005)
    assert fast.std() == pytest.approx(slow.std(), rel=0.03)
    assert np.percentile(fast, 2.5) == pytest.approx(np.percentile(slow, 2.5), abs=0.02)


def test_bootstrap_is_seeded():
    xs = [1, 2, 2, 1, 1, 2]
    assert bootstrap_ci(xs, 500, 3) == bootstrap_ci(xs, 500, 3)
    a = bootstrap_means(xs, 500, np.random.default_rng(3))
    assert not np.array_equal(a, bootstrap_means(xs, 500, np.random.default_rng(4)))
    with pytest.raises(ValueError):
        bootstrap_ci([], 10)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=2, max_size=20))
def test_pearson_matches_oracle(pairs):
    xs, ys = zip(*pairs)
    assume(len(set(xs)) > 1 and len(set(ys)) > 1)
    assert pearson_r(xs, ys) == pytest.approx(oracles.pearson(xs, ys), rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.tuples(finite, finite), min_size=3, max_size=20),
    st.floats(0.1, 10), st.floats(-50, 50), st.floats(0.1, 10), st.floats(-50, 50),
)
def test_pearson_invariances(pairs, a, b, c, d):
    xs, ys = map(np.array, zip(*pairs))
    assume(np.ptp(xs) > 1e-3 and np.ptp(ys) > 1e-3)
    r = pearson_r(xs, ys)
    assert -1.0 <= r <= 1.0
    assert pearson_r(ys, xs) == pytest.approx(r, abs=1e-9)
    assert pearson_r(a * xs + b, c * ys + d) == pytest.approx(r, abs=1e-7)
    assert pearson_r(-xs, ys) == pytest.approx(-r, abs=1e-9)
    assert pearson_r(xs, xs) == pytest.approx(1.0, abs=1e-12)


def test_pearson_undefined():
    with pytest.raises(UndefinedCorrelation):
        pearson_r([1, 1, 1], [1, 2, 3])
    with pytest.raises(UndefinedCorrelation):
        pearson_r([1], [2])
    with pytest.raises(ValueError):
        pearson_r([1, 2], [1, 2, 3])


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(finite, finite.filter(lambda h: h != 0)), min_size=1, max_size=20))
def test_mape_matches_oracle_and_is_zero_iff_equal(pairs):
    ss, hs = zip(*pairs)
    assert mape(ss, hs) == pytest.approx(oracles.mape(ss, hs), rel=1e-12, abs=1e-12)
    assert mape(hs, hs) == 0.0
    assert (mape(ss, hs) == 0.0) == all(s == h for s, h in pairs)


def test_mape_is_not_symmetric_and_rejects_zero():
    assert mape([2.0], [1.0]) == 1.0
    assert mape([1.0], [2.0]) == 0.5
    with pytest.raises(ValueError):
        mape([1.0], [0.0])
    with pytest.raises(ValueError):
        mape([], [])


def test_histogram():
    h = histogram([1, 1, 2, 4], 4, split="Man", question_id="q")
    assert h.counts == (2, 1, 0, 1)
    assert h.frequencies == (0.5, 0.25, 0.0, 0.25)
    assert h.total == 4
    assert histogram([], 2).frequencies == (0.0, 0.0)


def _table(schema, value_for):
    return {c: value_for(c) for c in enumerate_cells(schema)}


def test_marginalize_pools_raw_scores_not_cell_means(schema):
    cells = enumerate_cells(schema)
    table = {cells[0]: [1, 1, 1, 1], cells[1]: [2]}  # both Very liberal
    pools = marginalize(table, Grouping.IDEOLOGY, schema)
    assert pools["Very liberal"] == [1, 1, 1, 1, 2]
    assert np.mean(pools["Very liberal"]) == pytest.approx(1.2)  # a mean of cell means would be 1.5
    assert pools["Liberal"] == []
    assert list(pools) == schema.levels("ideology")
    assert len(marginalize(table, Grouping.ALL_CROSSTABS, schema)) == 80
    assert list(marginalize(table, "gender")) == ["Man"]


def test_compare_question_identical_tables(schema):
    rng = random.Random(0)
    table = _table(schema, lambda c: [rng.choice([1, 2]) for _ in range(5)])
    res = compare_question("q", table, table, Grouping.IDEOLOGY, schema, bootstrap_reps=50)
    assert res.rho == pytest.approx(1.0)
    assert res.mape == 0.0
    assert res.n_pairs == 5
    assert all(p.delta == 0 for p in res.pairs)


def test_compare_question_exclusions_and_notes(schema):
    synth = _table(schema, lambda c: [1, 2] if c.ideology != "Moderate" else [1])
    human = _table(schema, lambda c: [] if c.ideology == "Liberal" else [2, 2])
    res = compare_question("q", synth, human, "ideology", schema, bootstrap_reps=20)
    assert res.excluded == ("Liberal",)
    assert [p.subgroup for p in res.unpaired] == ["Liberal"]
    assert res.rho is None and res.rho_note.startswith("undefined")
    no_human = compare_question("q", synth, None, "ideology", schema, bootstrap_reps=20)
    assert not no_human.has_human_data and no_human.rho_note == "no human data"
    assert no_human.mape is None and no_human.pairs == ()


def test_compare_every_question(questionnaire, schema):
    synth = {q.id: _table(schema, lambda c: [1, 2]) for q in questionnaire}
    out = compare(synth, {}, "gender", questionnaire, schema, bootstrap_reps=10)
    assert [r.question_id for r in out] == list(questionnaire.ids)
    assert all(not r.has_human_data for r in out)


def test_summaries_are_seeded_per_cell(questionnaire, schema):
    t = {"q": _table(schema, lambda c: [1, 2, 2, 1, 2])}
    a = summarize_table(t, source="synthetic", bootstrap_reps=100, seed=1)
    b = summarize_table(t, source="synthetic", bootstrap_reps=100, seed=1)
    assert a == b and len(a) == 80
    assert len({(s.ci_low, s.ci_high) for s in a}) > 1  # independent streams per cell


def test_gender_histograms(questionnaire, schema):
    table = {"abortion_ban": _table(schema, lambda c: [1] if c.gender == "Man" else [2, 2])}
    hs = gender_histograms(table, questionnaire, schema)
    assert [(h.split, h.counts) for h in hs] == [("Man", (40, 0)), ("Woman", (0, 80))]


def test_worked_summaries():
    s = cell_summary([2, 2, 2], 100)
    assert (s.mean, s.sd, s.ci_low, s.ci_high) == (2.0, 0.0, 2.0, 2.0)
    s = cell_summary([1, 2, 3], 100)
    assert (s.mean, s.sd) == (2.0, 1.0)
    assert s.sem == pytest.approx(0.5774, abs=5e-5)


def test_worked_pooling(schema):
    table = _table(schema, lambda c: [1] * 20)
    pools = marginalize(table, Grouping.IDEOLOGY, schema)
    assert [len(p) for p in pools.values()] == [320] * 5
    crosstabs = marginalize(table, Grouping.ALL_CROSSTABS, schema)
    assert len(crosstabs) == 80 and all(len(p) == 20 for p in crosstabs.values())
    from pollsim.demographics import DemographicSchema

    single = DemographicSchema(("Liberal",), ((16, 30),), ("Man",), ("white",))
    one = _table(single, lambda c: [1, 2])
    for g in Grouping:
        assert len(marginalize(one, g, single)) == 1


def test_worked_metrics():
    assert pearson_r([1, 2, 3], [2, 4, 6]) == 1.0
    assert pearson_r([1, 2, 3], [3, 2, 1]) == -1.0
    assert pearson_r([1, 2, 4], [2, 2, 5]) == pytest.approx(oracles.pearson([1, 2, 4], [2, 2, 5]), abs=1e-12)
    assert mape([1, 5], [2, 4]) == 0.375
    assert mape([3], [2]) == 0.5
    assert mape([1.5, 2.5], [1.5, 2.5]) == 0.0


def test_constant_human_side_gives_undefined_rho(schema):
    synth = _table(schema, lambda c: [1, 2] if c.ideology == "Liberal" else [1])
    human = _table(schema, lambda c: [2])
    res = compare_question("q", synth, human, "ideology", schema, bootstrap_reps=5)
    assert res.rho is None and "constant" in res.rho_note
    assert res.mape is not None
