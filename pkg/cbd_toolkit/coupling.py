"""Couplings of a system: independent, identity (reduced and full) and maximal agreement.

A coupling is one joint distribution over every variable of the system whose
per-context marginals reproduce the context pmfs. An identity coupling in
addition makes the members of every identity class equal with probability 1;
its existence is what "noncontextual" means here.
"""

import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import AlphabetMismatch, NoMultiVariableClass, ShapeMismatch
from .logger import log_system_details
from .lp import Direction, LpStatus, ProgramBuilder, solve_feasibility, solve_optimize
from .system import Connection, Distribution, System, Variable, connections, fmt_rational

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Coupling:
    variables: Tuple[Variable, ...]
    joint: Distribution

    def agreement(self, members: Sequence[Variable]) -> Fraction:
        """Probability that all ``members`` take the same value."""
        idx = [self.variables.index(v) for v in members]
        return sum(
            (m for values, m in zip(self.joint.support, self.joint.masses)
             if len({values[i] for i in idx}) == 1),
            Fraction(0),
        )


@dataclass(frozen=True)
class ReducedCoupling:
    """Joint over one value per identity class."""

    classes: Tuple[Connection, ...]
    joint: Distribution

    def context_marginal(self, system: System, context_id: str) -> Distribution:
        ctx = system.context(context_id)
        owner = _class_index(system)
        positions = [owner[Variable(c, ctx.id)] for c in ctx.contents]
        acc = {values: Fraction(0) for values in ctx.pmf.support}
        for values, mass in zip(self.joint.support, self.joint.masses):
            acc[tuple(values[p] for p in positions)] += mass
        return Distribution(ctx.pmf.support, tuple(acc[v] for v in ctx.pmf.support))


@dataclass(frozen=True)
class AgreementResult:
    p_max: Fraction
    witness: Coupling
    measure: Fraction
    per_class: Tuple[Tuple[str, Fraction], ...]


@dataclass(frozen=True)
class CouplingCheck:
    ok: bool
    context: Optional[str] = None
    values: Optional[Tuple[str, ...]] = None
    expected: Optional[Fraction] = None
    actual: Optional[Fraction] = None


def _class_index(system: System) -> Dict[Variable, int]:
    return {v: k for k, members in enumerate(system.identity_classes) for v in members}


def _full_atoms(system: System) -> Tuple[Tuple[Variable, ...], List[Tuple[str, ...]]]:
    variables = system.variables()
    return variables, list(itertools.product(*(system.alphabet(v) for v in variables)))


def _context_slices(system: System) -> List[Tuple[str, List[int]]]:
    """Positions of each context's variables inside the full variable tuple."""
    slices = []
    offset = 0
    for ctx in system.contexts:
        slices.append((ctx.id, list(range(offset, offset + len(ctx.contents)))))
        offset += len(ctx.contents)
    return slices


def _add_marginal_rows(builder: ProgramBuilder, system: System, atom_vars: Sequence[int],
                       projections: Dict[str, List[Tuple[str, ...]]]) -> None:
    """One equality per (context, tuple): mass of atoms projecting onto the tuple equals the pmf."""
    for ctx in system.contexts:
        rows = {values: {} for values in ctx.pmf.support}
        for var_index, key in zip(atom_vars, projections[ctx.id]):
            if key in rows:
                rows[key][var_index] = Fraction(1)
        for values, mass in zip(ctx.pmf.support, ctx.pmf.masses):
            builder.add_equality(rows[values], mass)


def independent_coupling(system: System) -> Coupling:
    """Product of the context pmfs; always a coupling."""
    variables, atoms = _full_atoms(system)
    slices = _context_slices(system)
    lookups = [(slots, system.context(ctx_id).pmf.as_dict()) for ctx_id, slots in slices]
    masses = []
    for atom in atoms:
        mass = Fraction(1)
        for slots, pmf in lookups:
            mass *= pmf[tuple(atom[i] for i in slots)]
            if not mass:
                break
        masses.append(mass)
    return Coupling(variables, Distribution(tuple(atoms), tuple(masses)))


def verify_coupling(candidate: Coupling, system: System) -> CouplingCheck:
    """Exact check of every context marginal; reports the first mismatch."""
    if candidate.variables != system.variables():
        raise ShapeMismatch("Candidate coupling variables do not match the system's variables")
    for ctx_id, slots in _context_slices(system):
        ctx = system.context(ctx_id)
        induced = candidate.joint.project(slots).as_dict()
        for values, expected in zip(ctx.pmf.support, ctx.pmf.masses):
            actual = induced.get(values, Fraction(0))
            if actual != expected:
                logger.debug(f"Coupling violates context {ctx_id!r} at {list(values)}")
                return CouplingCheck(False, ctx_id, values, expected, actual)
    return CouplingCheck(True)


def pairwise_identity_exists(a: Distribution, b: Distribution) -> bool:
    """An identity coupling of two variables exists iff they are identically distributed."""
    if a.support != b.support:
        raise AlphabetMismatch("Distributions are over different value alphabets")
    return a.masses == b.masses


def identity_coupling_exists(system: System) -> Optional[ReducedCoupling]:
    """Reduced identity coupling (one variable per class), or None when none exists."""
    log_system_details(system, "identity coupling")
    conns = tuple(connections(system))
    owner = _class_index(system)
    atoms = list(itertools.product(*(c.outcomes for c in conns)))

    builder = ProgramBuilder()
    atom_vars = [builder.add_variable(f"x{k}") for k in range(len(atoms))]
    projections = {}
    for ctx in system.contexts:
        positions = [owner[Variable(c, ctx.id)] for c in ctx.contents]
        projections[ctx.id] = [tuple(atom[p] for p in positions) for atom in atoms]
    _add_marginal_rows(builder, system, atom_vars, projections)

    outcome = solve_feasibility(builder.build())
    if outcome.status is LpStatus.INFEASIBLE:
        logger.info(f"No identity coupling for {system.name!r}")
        return None
    joint = Distribution(tuple(atoms), tuple(outcome.point[j] for j in atom_vars))
    return ReducedCoupling(conns, joint)


def expand_reduced(reduced: ReducedCoupling, system: System) -> Coupling:
    """Lift a reduced coupling to the full variable space (class members copied)."""
    variables, atoms = _full_atoms(system)
    owner = _class_index(system)
    positions = [owner[v] for v in variables]
    acc: Dict[Tuple[str, ...], Fraction] = {}
    for values, mass in zip(reduced.joint.support, reduced.joint.masses):
        if mass:
            full = tuple(values[p] for p in positions)
            acc[full] = acc.get(full, Fraction(0)) + mass
    return Coupling(variables, Distribution(tuple(atoms), tuple(acc.get(a, Fraction(0)) for a in atoms)))


def _full_program(system: System):
    variables, atoms = _full_atoms(system)
    builder = ProgramBuilder()
    atom_vars = [builder.add_variable(f"x{k}") for k in range(len(atoms))]
    projections = {ctx_id: [tuple(atom[i] for i in slots) for atom in atoms]
                   for ctx_id, slots in _context_slices(system)}
    _add_marginal_rows(builder, system, atom_vars, projections)
    return variables, atoms, builder, atom_vars


def _diagonal(variables: Sequence[Variable], atoms, members: Sequence[Variable], atom_vars) -> Dict[int, Fraction]:
    idx = [variables.index(v) for v in members]
    return {var: Fraction(1) for var, atom in zip(atom_vars, atoms) if len({atom[i] for i in idx}) == 1}


def identity_coupling_full(system: System) -> Optional[Coupling]:
    """Identity coupling searched in the full variable space; oracle for the reduced search."""
    variables, atoms, builder, atom_vars = _full_program(system)
    for members in system.identity_classes:
        if len(members) >= 2:
            builder.add_equality(_diagonal(variables, atoms, members, atom_vars), 1)
    outcome = solve_feasibility(builder.build())
    if outcome.status is LpStatus.INFEASIBLE:
        return None
    return Coupling(variables, Distribution(tuple(atoms), tuple(outcome.point[j] for j in atom_vars)))


def max_uniform_agreement(system: System) -> Optional[AgreementResult]:
    """Largest t such that some coupling has Pr[class members all equal] = t for every multi-member class.

    Returns None when no single t works for all classes at once.
    """
    conns = [c for c in connections(system) if len(c.variables) >= 2]
    if not conns:
        raise NoMultiVariableClass(f"System {system.name!r} has no identity class with two or more variables")
    variables, atoms, builder, atom_vars = _full_program(system)
    t = builder.add_variable("t")
    for conn in conns:
        row = _diagonal(variables, atoms, conn.variables, atom_vars)
        row[t] = Fraction(-1)
        builder.add_equality(row, 0)
    builder.set_objective({t: Fraction(1)}, Direction.MAXIMIZE)

    outcome = solve_optimize(builder.build())
    if outcome.status is LpStatus.INFEASIBLE:
        logger.info(f"No uniform agreement probability for {system.name!r}")
        return None
    p_max = outcome.value
    witness = Coupling(variables, Distribution(tuple(atoms), tuple(outcome.point[j] for j in atom_vars)))
    per_class = tuple((c.class_id, witness.agreement(c.variables)) for c in conns)
    logger.info(f"Maximal uniform agreement for {system.name!r}: {fmt_rational(p_max)}")
    return AgreementResult(p_max, witness, 1 - p_max, per_class)


def noncontextual_threshold(a: System, b: System) -> Optional[Fraction]:
    """Smallest weight w in [0, 1] such that (1 - w) a + w b admits an identity coupling."""
    if not a.same_structure(b):
        raise ShapeMismatch(f"Systems {a.name!r} and {b.name!r} have different structures")
    conns = connections(a)
    owner = _class_index(a)
    atoms = list(itertools.product(*(c.outcomes for c in conns)))

    builder = ProgramBuilder()
    atom_vars = [builder.add_variable(f"x{k}") for k in range(len(atoms))]
    w = builder.add_variable("w")
    for ca, cb in zip(a.contexts, b.contexts):
        positions = [owner[Variable(c, ca.id)] for c in ca.contents]
        rows = {values: {} for values in ca.pmf.support}
        for var, atom in zip(atom_vars, atoms):
            rows[tuple(atom[p] for p in positions)][var] = Fraction(1)
        for values, pa, pb in zip(ca.pmf.support, ca.pmf.masses, cb.pmf.masses):
            row = dict(rows[values])
            if pb != pa:
                row[w] = pa - pb
            builder.add_equality(row, pa)
    builder.add_inequality({w: Fraction(1)}, 1)
    builder.set_objective({w: Fraction(1)}, Direction.MINIMIZE)

    outcome = solve_optimize(builder.build())
    if outcome.status is not LpStatus.OPTIMAL:
        return None
    return outcome.value
