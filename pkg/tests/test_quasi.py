import random
from fractions import Fraction

import pytest

from cbd_toolkit.coupling import identity_coupling_exists
from cbd_toolkit.errors import NonNormalized
from cbd_toolkit.quasi import SignedMeasure, context_marginal, negativity, quasi_coupling
from cbd_toolkit.system import check_no_signaling, mix_systems
from conftest import BELL_FIXTURES, load_fixture, random_bell_population

F = Fraction


def assert_reproduces_contexts(result, system):
    for ctx in system.contexts:
        marg = context_marginal(result.measure, system, ctx.id)
        assert marg == ctx.pmf.as_dict()


class TestNegativity:
    def test_nonnegative_measure(self):
        assert negativity(SignedMeasure((("0",), ("1",)), (F(1, 2), F(1, 2)))) == 0

    def test_signed_measure(self):
        assert negativity(SignedMeasure((("0",), ("1",)), (F(3, 2), F(-1, 2)))) == F(1, 2)

    def test_masses_must_sum_to_one(self):
        with pytest.raises(NonNormalized):
            SignedMeasure((("0",), ("1",)), (F(1, 2), F(1, 4)))


class TestQuasiCoupling:
    def test_prbox(self, prbox):
        result = quasi_coupling(prbox)
        assert result.negativity == F(1, 2)
        assert negativity(result.measure) == result.negativity
        assert_reproduces_contexts(result, prbox)
        assert min(result.measure.masses) < 0

    def test_quantum_fixture(self, quantum):
        result = quasi_coupling(quantum)
        assert result.negativity == F(239, 1154)
        assert_reproduces_contexts(result, quantum)

    def test_signaling_has_none(self, signaling):
        assert quasi_coupling(signaling) is None

    @pytest.mark.parametrize("name", ["uniform-independent", "deterministic"])
    def test_noncontextual_coincides_with_reduced_coupling(self, name):
        system = load_fixture(name)
        result = quasi_coupling(system)
        assert result.negativity == 0
        assert all(m >= 0 for m in result.measure.masses)
        assert_reproduces_contexts(result, system)

    def test_negativity_shrinks_along_mixtures(self, prbox, uniform):
        base = quasi_coupling(prbox).negativity
        for k in range(5):
            weight = F(k, 4)
            mixed = quasi_coupling(mix_systems(uniform, prbox, weight)).negativity
            assert mixed <= weight * base

    @pytest.mark.slow
    def test_exists_iff_no_signaling(self, prbox):
        systems = [load_fixture(name) for name in BELL_FIXTURES]
        systems += random_bell_population(random.Random(99), prbox, 500)
        for system in systems:
            result = quasi_coupling(system)
            assert (result is not None) == check_no_signaling(system).passed
            if result is not None:
                assert (result.negativity == 0) == (identity_coupling_exists(system) is not None)
