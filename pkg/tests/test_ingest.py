import random
from fractions import Fraction

import pytest

from cbd_toolkit import bell
from cbd_toolkit.errors import AlphabetViolation, EmptyContext, SystemValidationError, UnknownContext, UnknownTag
from cbd_toolkit.ingest import (
    Design,
    TrialAccumulator,
    TrialRecord,
    build_design,
    conditionalize,
    design_of,
    estimate_system,
    load_design,
    load_trials_csv,
    simulate_trials,
    write_trials_csv,
)
from cbd_toolkit.system import Content, dump_system, with_identity_classes
from conftest import FIXTURES_DIR, load_fixture

F = Fraction
PAT_SEQUENCE = ["01", "11", "11", "10", "10", "10", "11", "11", "01"]


@pytest.fixture
def pat_design() -> Design:
    return load_design(FIXTURES_DIR / "pat-design.json")


@pytest.fixture
def bell_design(prbox) -> Design:
    return build_design(dump_system(prbox, include_pmf=False))


def test_pat_sequence_counts(pat_design):
    trials = [TrialRecord("pat", (symbol,)) for symbol in PAT_SEQUENCE]
    estimate = estimate_system(trials, pat_design)
    assert estimate.system.context("pat").pmf.masses == (F(0), F(2, 9), F(1, 3), F(4, 9))
    assert estimate.counts["pat"] == {("00",): 0, ("01",): 2, ("10",): 3, ("11",): 4}


def test_pat_sequence_csv(pat_design):
    trials = load_trials_csv(FIXTURES_DIR / "pat-sequence.csv")
    assert [t.values[0] for t in trials] == PAT_SEQUENCE
    estimate = estimate_system(trials, pat_design)
    assert estimate.system.context("pat").pmf.masses == (F(0), F(2, 9), F(1, 3), F(4, 9))


def test_permutation_invariance(pat_design):
    trials = [TrialRecord("pat", (symbol,)) for symbol in PAT_SEQUENCE]
    expected = estimate_system(trials, pat_design).system
    rng = random.Random(1)
    for _ in range(50):
        rng.shuffle(trials)
        assert estimate_system(trials, pat_design).system == expected


def test_one_trial_per_bell_context(bell_design):
    trials = [TrialRecord(ctx_id, ("+1", "+1")) for ctx_id in ("c11", "c12", "c21", "c22")]
    system = estimate_system(trials, bell_design).system
    for ctx in system.contexts:
        assert ctx.pmf.mass(("+1", "+1")) == 1


def test_unknown_context(bell_design):
    with pytest.raises(UnknownContext):
        estimate_system([TrialRecord("c99", ("+1", "+1"))], bell_design)


def test_value_outside_alphabet(bell_design):
    with pytest.raises(AlphabetViolation):
        estimate_system([TrialRecord("c11", ("+1", "0"))], bell_design)


def test_wrong_arity(bell_design):
    with pytest.raises(AlphabetViolation):
        estimate_system([TrialRecord("c11", ("+1",))], bell_design)


def test_context_without_trials(bell_design):
    with pytest.raises(EmptyContext, match="c12"):
        estimate_system([TrialRecord("c11", ("+1", "+1"))], bell_design)


def test_accumulator_stats(pat_design):
    acc = TrialAccumulator(pat_design)
    acc.add(TrialRecord("pat", ("01",)))
    with pytest.raises(AlphabetViolation):
        acc.add(TrialRecord("pat", ("22",)))
    assert acc.stats == {'trials': 1, 'rejected': 1}
    assert acc.build().system.context("pat").pmf.mass(("01",)) == 1


class TestConditionalize:
    def red_blue_design(self) -> Design:
        content = Content("C", ("00", "01", "10", "11"))
        return Design("pat-red-blue", (content,), (("red", ("C",)), ("blue", ("C",))))

    def test_alternating_tags(self):
        tagged = [("red" if k % 2 == 0 else "blue", (symbol,)) for k, symbol in enumerate(PAT_SEQUENCE)]
        system = conditionalize(tagged, self.red_blue_design()).system
        assert [c.id for c in system.contexts] == ["red", "blue"]
        # red: 01, 11, 10, 11, 01 / blue: 11, 10, 10, 11
        assert system.context("red").pmf.masses == (F(0), F(2, 5), F(1, 5), F(2, 5))
        assert system.context("blue").pmf.masses == (F(0), F(0), F(1, 2), F(1, 2))

    def test_single_tag(self):
        content = Content("C", ("00", "01", "10", "11"))
        design = Design("one", (content,), (("red", ("C",)),))
        system = conditionalize([("red", (s,)) for s in PAT_SEQUENCE], design).system
        assert len(system.contexts) == 1

    def test_unknown_tag(self):
        with pytest.raises(UnknownTag):
            conditionalize([("green", ("00",))], self.red_blue_design())

    def test_time_of_day_crossed_with_settings(self):
        signs = ("+1", "-1")
        contents = []
        shapes = []
        for t in ("morning", "daytime", "evening"):
            for i, j in bell.INDICES:
                a, b = f"A{i}{j}{t}", f"B{i}{j}{t}"
                contents += [Content(a, signs), Content(b, signs)]
                shapes.append((f"{i}{j}-{t}", (a, b)))
        design = Design("timed", tuple(contents), tuple(shapes))
        tagged = [(ctx_id, ("+1", "-1")) for ctx_id, _ in shapes]
        system = conditionalize(tagged, design).system
        assert len(system.contexts) == 12


def test_csv_round_trip(tmp_path, prbox):
    trials = simulate_trials(prbox, 20, seed=3)
    path = tmp_path / "trials.csv"
    write_trials_csv(trials, path)
    assert load_trials_csv(path) == trials


def test_csv_comments_and_ragged_rows(tmp_path):
    path = tmp_path / "mixed.csv"
    path.write_text("# recorded by hand\ncontext,v1,v2\nwide,+1,-1\nnarrow,0\n", encoding="utf-8")
    trials = load_trials_csv(path)
    assert trials == [TrialRecord("wide", ("+1", "-1")), TrialRecord("narrow", ("0",))]


def test_csv_row_wider_than_header_is_rejected(tmp_path, bell_design):
    path = tmp_path / "wide.csv"
    path.write_text("context,v1,v2\nc11,+1,-1,+1\n", encoding="utf-8")
    trials = load_trials_csv(path)
    assert trials == [TrialRecord("c11", ("+1", "-1", "+1"))]
    with pytest.raises(AlphabetViolation, match="3 values"):
        estimate_system(trials, bell_design)


def test_csv_hash_inside_value_is_kept(tmp_path):
    path = tmp_path / "hash.csv"
    path.write_text("context,v1\n  # indented comment\npat,#1\npat,a#b\n", encoding="utf-8")
    assert load_trials_csv(path) == [TrialRecord("pat", ("#1",)), TrialRecord("pat", ("a#b",))]


def test_csv_without_context_header(tmp_path):
    path = tmp_path / "noheader.csv"
    path.write_text("c11,+1,-1\n", encoding="utf-8")
    with pytest.raises(SystemValidationError, match="context"):
        load_trials_csv(path)


def test_empty_csv(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("", encoding="utf-8")
    assert load_trials_csv(path) == []


def test_simulation_is_seeded(prbox):
    assert simulate_trials(prbox, 50, seed=4) == simulate_trials(prbox, 50, seed=4)
    assert all(t.values in (("+1", "+1"), ("-1", "-1")) for t in simulate_trials(prbox, 50, 4) if t.context == "c11")


@pytest.mark.slow
def test_sampling_round_trip_converges():
    system = load_fixture("quantum-tsirelson")
    estimate = estimate_system(simulate_trials(system, 10_000, seed=12), design_of(system))
    for original, estimated in zip(system.contexts, estimate.system.contexts):
        assert original.pmf.total_variation(estimated.pmf) < F(5, 100)


def test_design_of_keeps_custom_classes(pat_red_blue):
    swapped = with_identity_classes(pat_red_blue, [["X@red", "Y@blue"], ["Y@red", "X@blue"]])
    design = design_of(swapped)
    assert design.identity_classes == (("X@red", "Y@blue"), ("Y@red", "X@blue"))
    trials = [TrialRecord("red", ("0", "0")), TrialRecord("blue", ("1", "1"))]
    assert estimate_system(trials, design).system.identity_classes == swapped.identity_classes
