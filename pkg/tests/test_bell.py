import random
import time
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbd_toolkit import bell
from cbd_toolkit.bell import Classification
from cbd_toolkit.coupling import identity_coupling_exists
from cbd_toolkit.errors import MarginalsUndefined, NotABellSystem
from conftest import BELL_FIXTURES, load_fixture, random_bell_no_signaling, random_bell_population

F = Fraction


def test_from_system_prbox(prbox):
    bs = bell.from_system(prbox)
    assert bs.p == ((F(1, 2), F(1, 2)), (F(1, 2), F(0)))
    assert bs.s == ((F(1, 2), F(1, 2)), (F(1, 2), F(0)))
    assert bs.q == ((F(0), F(0)), (F(0), F(1, 2)))
    assert bs.r == bs.q


def test_to_system_round_trip(quantum):
    bs = bell.from_system(quantum)
    assert bell.from_system(bell.to_system(bs)) == bs


@pytest.mark.parametrize("name", ["pat-red-blue", "pat-anticorrelated"])
def test_not_a_bell_system(name):
    with pytest.raises(NotABellSystem):
        bell.from_system(load_fixture(name))


def test_marginal_selectivity(prbox, signaling):
    assert bell.marginal_selectivity(bell.from_system(prbox)).holds
    report = bell.marginal_selectivity(bell.from_system(signaling))
    assert not report.holds
    assert report.discrepancies["A1"] == F(1, 4)
    assert report.discrepancies["A2"] == 0


def test_selectivity_fails_on_constructed_violation():
    grid = lambda a, b, c, d: ((F(a), F(b)), (F(c), F(d)))  # noqa: E731
    # p_11 + q_11 = 3/4 but p_12 + q_12 = 1/2
    bs = bell.BellSystem(
        p=grid("1/2", "1/4", "1/4", "1/4"),
        q=grid("1/4", "1/4", "1/4", "1/4"),
        r=grid("1/4", "1/4", "1/4", "1/4"),
        s=grid("0", "1/4", "1/4", "1/4"),
    )
    assert not bell.marginal_selectivity(bs).holds


class TestChFine:
    def test_prbox_values(self, prbox):
        report = bell.ch_fine(bell.from_system(prbox))
        assert report.expressions == {(1, 1): F(1, 2), (1, 2): F(-1, 2), (2, 1): F(-1, 2), (2, 2): F(-1, 2)}
        assert not report.satisfied
        assert report.max_violation == F(1, 2)

    def test_uniform(self, uniform):
        report = bell.ch_fine(bell.from_system(uniform))
        assert set(report.expressions.values()) == {F(-1, 2)}
        assert report.satisfied

    def test_deterministic_sits_on_the_boundary(self, deterministic):
        report = bell.ch_fine(bell.from_system(deterministic))
        assert set(report.expressions.values()) == {F(0)}
        assert report.satisfied

    def test_undefined_under_signaling(self, signaling):
        with pytest.raises(MarginalsUndefined):
            bell.ch_fine(bell.from_system(signaling))

    def test_quantum_fixture_violates(self, quantum):
        report = bell.ch_fine(bell.from_system(quantum))
        assert report.expressions[1, 1] == F(239, 1154)
        assert not report.satisfied


@pytest.mark.parametrize("name, expected", [
    ("prbox", Classification.CASE2_PURE_CONTEXTUALITY),
    ("uniform-independent", Classification.NONCONTEXTUAL),
    ("deterministic", Classification.NONCONTEXTUAL),
    ("signaling", Classification.CASE1_SIGNALING),
    ("quantum-tsirelson", Classification.CASE2_PURE_CONTEXTUALITY),
])
def test_classify_fixtures(name, expected):
    assert bell.classify(bell.from_system(load_fixture(name))) is expected


def test_classification_is_symmetric_under_swapping_parties(quantum, signaling):
    for system in (quantum, signaling):
        bs = bell.from_system(system)
        assert bell.classify(bs.transposed()) is bell.classify(bs)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_ch_fine_expressions_follow_the_party_swap(seed):
    bs = bell.from_system(random_bell_no_signaling(random.Random(seed), load_fixture("prbox")))
    original = bell.ch_fine(bs).expressions
    swapped = bell.ch_fine(bs.transposed()).expressions
    for i, j in bell.INDICES:
        assert swapped[(j, i)] == original[(i, j)]


def test_chsh_values(prbox, uniform, quantum):
    assert bell.chsh_value(bell.from_system(prbox)) == 4
    assert bell.chsh_value(bell.from_system(uniform)) == 0
    assert bell.chsh_value(bell.from_system(quantum)) == F(1632, 577)


def test_correlation_system_matches_fixture(quantum):
    e = F(408, 577)
    bs = bell.correlation_system({(1, 1): e, (1, 2): e, (2, 1): e, (2, 2): -e})
    assert bs == bell.from_system(quantum)


def test_ch_fine_threshold(prbox, uniform):
    a, b = bell.from_system(prbox), bell.from_system(uniform)
    assert bell.ch_fine_threshold(a, b) == F(1, 2)
    assert bell.ch_fine_threshold(b, a) == 0
    assert bell.ch_fine_threshold(a, a) is None


@pytest.mark.slow
def test_fine_equivalence(prbox):
    """No-signaling plus CH/Fine holds exactly when an identity coupling exists."""
    started = time.perf_counter()
    systems = [load_fixture(name) for name in BELL_FIXTURES]
    systems += random_bell_population(random.Random(2024), prbox, 1000)
    disagreements = []
    for system in systems:
        bs = bell.from_system(system)
        closed_form = bell.classify(bs) is Classification.NONCONTEXTUAL
        if closed_form != (identity_coupling_exists(system) is not None):
            disagreements.append(bs)
    assert disagreements == []
    assert time.perf_counter() - started < 60
