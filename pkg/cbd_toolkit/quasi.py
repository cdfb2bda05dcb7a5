"""Signed quasi-couplings ("negative probabilities").

A quasi-coupling is a signed measure over one value per identity class that
reproduces every context pmf. Among all of them we return one of minimal
total negative mass.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

from .errors import NonNormalized, SystemValidationError
from .lp import Direction, LpStatus, ProgramBuilder, solve_optimize
from .system import System, Variable, connections, fmt_rational

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SignedMeasure:
    support: Tuple[Tuple[str, ...], ...]
    masses: Tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.support) != len(self.masses):
            raise SystemValidationError("Signed measure support and masses differ in length")
        total = sum(self.masses, Fraction(0))
        if total != 1:
            raise NonNormalized(f"Signed masses sum to {fmt_rational(total)}, not 1")

    def project(self, positions) -> dict:
        acc = {}
        for values, mass in zip(self.support, self.masses):
            key = tuple(values[p] for p in positions)
            acc[key] = acc.get(key, Fraction(0)) + mass
        return acc


@dataclass(frozen=True)
class QuasiResult:
    measure: SignedMeasure
    negativity: Fraction


def negativity(m: SignedMeasure) -> Fraction:
    """Total absolute negative mass."""
    return -sum((x for x in m.masses if x < 0), Fraction(0))


def context_marginal(m: SignedMeasure, system: System, context_id: str) -> dict:
    """Signed marginal of the measure on one context's variables."""
    owner = {v: k for k, members in enumerate(system.identity_classes) for v in members}
    ctx = system.context(context_id)
    return m.project([owner[Variable(c, ctx.id)] for c in ctx.contents])


def quasi_coupling(system: System) -> Optional[QuasiResult]:
    """Min-negativity quasi-coupling, or None when no signed measure matches the contexts.

    Each atom's mass is split as u - v with u, v >= 0 and the sum of v is
    minimized; at the optimum u * v == 0 per atom, so sum(v) is the negativity.
    """
    conns = connections(system)
    owner = {v: k for k, members in enumerate(system.identity_classes) for v in members}
    atoms = list(itertools.product(*(c.outcomes for c in conns)))

    builder = ProgramBuilder()
    pos = [builder.add_variable(f"u{k}") for k in range(len(atoms))]
    neg = [builder.add_variable(f"v{k}") for k in range(len(atoms))]
    for ctx in system.contexts:
        positions = [owner[Variable(c, ctx.id)] for c in ctx.contents]
        rows = {values: {} for values in ctx.pmf.support}
        for u, v, atom in zip(pos, neg, atoms):
            row = rows[tuple(atom[p] for p in positions)]
            row[u] = Fraction(1)
            row[v] = Fraction(-1)
        for values, mass in zip(ctx.pmf.support, ctx.pmf.masses):
            builder.add_equality(rows[values], mass)
    total = {u: Fraction(1) for u in pos}
    total.update({v: Fraction(-1) for v in neg})
    builder.add_equality(total, 1)
    builder.set_objective({v: Fraction(1) for v in neg}, Direction.MINIMIZE)

    outcome = solve_optimize(builder.build())
    if outcome.status is LpStatus.INFEASIBLE:
        logger.info(f"No quasi-coupling for {system.name!r} (context marginals are inconsistent)")
        return None
    masses = tuple(outcome.point[u] - outcome.point[v] for u, v in zip(pos, neg))
    measure = SignedMeasure(tuple(atoms), masses)
    result = QuasiResult(measure, negativity(measure))
    logger.info(f"Min-negativity quasi-coupling for {system.name!r}: negativity {fmt_rational(result.negativity)}")
    return result
