"""Closed-form analysis of the 2x2 Alice/Bob (EPR/Bohm) paradigm.

Contents A1, A2 (Alice's settings) and B1, B2 (Bob's) take values +1/-1;
context (i, j) records (A_i, B_j). Per context the four masses are

    p_ij = Pr(+1, +1)   q_ij = Pr(+1, -1)   r_ij = Pr(-1, +1)   s_ij = Pr(-1, -1)

The system is noncontextual exactly when marginal selectivity holds and all
four CH/Fine expressions lie in [-1, 0].
"""

import logging
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, Optional, Tuple

from .errors import MarginalsUndefined, NotABellSystem, SystemValidationError
from .system import Content, Context, Distribution, System, default_identity_classes, fmt_rational

logger = logging.getLogger(__name__)

PLUS = "+1"
MINUS = "-1"
_SIGN_LABELS = {"+1": PLUS, "1": PLUS, "-1": MINUS}
INDICES = ((1, 1), (1, 2), (2, 1), (2, 2))

Grid = Tuple[Tuple[Fraction, Fraction], Tuple[Fraction, Fraction]]


def _grid(values: Dict[Tuple[int, int], Fraction]) -> Grid:
    return (
        (Fraction(values[1, 1]), Fraction(values[1, 2])),
        (Fraction(values[2, 1]), Fraction(values[2, 2])),
    )


@dataclass(frozen=True)
class BellSystem:
    p: Grid
    q: Grid
    r: Grid
    s: Grid

    def __post_init__(self):
        for i, j in INDICES:
            masses = self.cell(i, j)
            if any(m < 0 for m in masses):
                raise SystemValidationError(f"Context ({i},{j}) has a negative mass")
            if sum(masses) != 1:
                raise SystemValidationError(f"Context ({i},{j}) masses sum to {fmt_rational(sum(masses))}")

    def cell(self, i: int, j: int) -> Tuple[Fraction, Fraction, Fraction, Fraction]:
        return (self.p[i - 1][j - 1], self.q[i - 1][j - 1], self.r[i - 1][j - 1], self.s[i - 1][j - 1])

    def correlation(self, i: int, j: int) -> Fraction:
        p, q, r, s = self.cell(i, j)
        return p + s - q - r

    def transposed(self) -> "BellSystem":
        """Swap Alice and Bob: context (i, j) becomes (j, i), q and r trade places."""
        t = lambda g: ((g[0][0], g[1][0]), (g[0][1], g[1][1]))  # noqa: E731
        return BellSystem(t(self.p), t(self.r), t(self.q), t(self.s))

    def mix(self, other: "BellSystem", weight: Fraction) -> "BellSystem":
        weight = Fraction(weight)
        m = lambda a, b: tuple(tuple((1 - weight) * x + weight * y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))  # noqa: E731
        return BellSystem(m(self.p, other.p), m(self.q, other.q), m(self.r, other.r), m(self.s, other.s))


class Classification(Enum):
    NONCONTEXTUAL = "noncontextual"
    CASE1_SIGNALING = "case1_signaling"
    CASE2_PURE_CONTEXTUALITY = "case2_pure_contextuality"


@dataclass(frozen=True)
class SelectivityReport:
    holds: bool
    discrepancies: Dict[str, Fraction]


@dataclass(frozen=True)
class ChFineReport:
    expressions: Dict[Tuple[int, int], Fraction]
    satisfied: bool
    max_violation: Fraction


def _sign(label: str) -> str:
    try:
        return _SIGN_LABELS[label]
    except KeyError:
        raise NotABellSystem(f"Outcome {label!r} is not +1/-1")


def from_system(system: System) -> BellSystem:
    """Extract p, q, r, s from a 2x2 system with contents A1, A2, B1, B2."""
    ids = sorted(c.id for c in system.contents)
    if ids != ["A1", "A2", "B1", "B2"]:
        raise NotABellSystem(f"Expected contents A1, A2, B1, B2; got {ids}")
    for content in system.contents:
        if len(content.outcomes) != 2 or {_sign(o) for o in content.outcomes} != {PLUS, MINUS}:
            raise NotABellSystem(f"Content {content.id!r} is not binary +1/-1")
    if len(system.contexts) != 4:
        raise NotABellSystem(f"Expected 4 contexts, got {len(system.contexts)}")
    if not system.has_default_classes():
        raise NotABellSystem("Bell analysis assumes identity classes grouped by content")

    cells: Dict[Tuple[int, int], Dict[Tuple[str, str], Fraction]] = {}
    for ctx in system.contexts:
        if len(ctx.contents) != 2:
            raise NotABellSystem(f"Context {ctx.id!r} does not pair one A with one B")
        a_pos = next((k for k, c in enumerate(ctx.contents) if c.startswith("A")), None)
        b_pos = next((k for k, c in enumerate(ctx.contents) if c.startswith("B")), None)
        if a_pos is None or b_pos is None:
            raise NotABellSystem(f"Context {ctx.id!r} does not pair one A with one B")
        key = (int(ctx.contents[a_pos][1]), int(ctx.contents[b_pos][1]))
        if key in cells:
            raise NotABellSystem(f"Setting pair {key} appears in more than one context")
        cells[key] = {
            (_sign(values[a_pos]), _sign(values[b_pos])): mass
            for values, mass in zip(ctx.pmf.support, ctx.pmf.masses)
        }
    pick = lambda a, b: _grid({k: cells[k][a, b] for k in INDICES})  # noqa: E731
    return BellSystem(pick(PLUS, PLUS), pick(PLUS, MINUS), pick(MINUS, PLUS), pick(MINUS, MINUS))


def to_system(bs: BellSystem, name: str = "bell") -> System:
    """Canonical System form: contexts c11, c12, c21, c22 over (A_i, B_j)."""
    outcomes = (PLUS, MINUS)
    contents = tuple(Content(cid, outcomes) for cid in ("A1", "A2", "B1", "B2"))
    support = ((PLUS, PLUS), (PLUS, MINUS), (MINUS, PLUS), (MINUS, MINUS))
    contexts = tuple(
        Context(f"c{i}{j}", (f"A{i}", f"B{j}"), Distribution(support, bs.cell(i, j)))
        for i, j in INDICES
    )
    return System(name, contents, contexts, default_identity_classes(contents, contexts))


def correlation_system(correlations: Dict[Tuple[int, int], Fraction]) -> BellSystem:
    """Uniform-marginal system with E_ij = correlations[i, j]."""
    plus = {k: (1 + Fraction(e)) / 4 for k, e in correlations.items()}
    minus = {k: (1 - Fraction(e)) / 4 for k, e in correlations.items()}
    return BellSystem(_grid(plus), _grid(minus), _grid(minus), _grid(plus))


def marginal_selectivity(bs: BellSystem) -> SelectivityReport:
    """p_i1 + q_i1 == p_i2 + q_i2 and p_1j + r_1j == p_2j + r_2j."""
    p, q, r = bs.p, bs.q, bs.r
    discrepancies = {
        f"A{i}": (p[i - 1][0] + q[i - 1][0]) - (p[i - 1][1] + q[i - 1][1]) for i in (1, 2)
    }
    discrepancies.update({
        f"B{j}": (p[0][j - 1] + r[0][j - 1]) - (p[1][j - 1] + r[1][j - 1]) for j in (1, 2)
    })
    return SelectivityReport(all(d == 0 for d in discrepancies.values()), discrepancies)


def ch_fine(bs: BellSystem) -> ChFineReport:
    """The four CH/Fine expressions; each must lie in [-1, 0]."""
    if not marginal_selectivity(bs).holds:
        raise MarginalsUndefined("p_i. and p_.j are undefined when marginal selectivity fails")
    p, q, r = bs.p, bs.q, bs.r
    alice = {i: p[i - 1][0] + q[i - 1][0] for i in (1, 2)}  # from the j=1 context
    bob = {j: p[0][j - 1] + r[0][j - 1] for j in (1, 2)}  # from the i=1 context
    total = p[0][0] + p[0][1] + p[1][0] + p[1][1]
    expressions = {
        (i, j): total - (2 * p[2 - i][2 - j] + alice[i] + bob[j]) for i, j in INDICES
    }
    violation = max(max(Fraction(0), e, -1 - e) for e in expressions.values())
    return ChFineReport(expressions, violation == 0, violation)


def classify(bs: BellSystem) -> Classification:
    if not marginal_selectivity(bs).holds:
        return Classification.CASE1_SIGNALING
    if not ch_fine(bs).satisfied:
        return Classification.CASE2_PURE_CONTEXTUALITY
    return Classification.NONCONTEXTUAL


def chsh_value(bs: BellSystem) -> Fraction:
    """max over the four sign patterns of |E11 + E12 + E21 + E22 - 2 E_kl|."""
    e = {k: bs.correlation(*k) for k in INDICES}
    total = sum(e.values())
    return max(abs(total - 2 * e[k]) for k in INDICES)


def ch_fine_threshold(a: BellSystem, b: BellSystem) -> Optional[Fraction]:
    """Smallest w in [0, 1] with (1 - w) a + w b satisfying CH/Fine, from the affine expressions.

    Both endpoints must satisfy marginal selectivity; None if no w works.
    """
    ea = ch_fine(a).expressions
    eb = ch_fine(b).expressions
    lo, hi = Fraction(0), Fraction(1)
    for k in INDICES:
        base, slope = ea[k], eb[k] - ea[k]
        # -1 <= base + w * slope <= 0
        if slope == 0:
            if not -1 <= base <= 0:
                return None
            continue
        bounds = sorted(((-1 - base) / slope, (0 - base) / slope))
        lo, hi = max(lo, bounds[0]), min(hi, bounds[1])
    if lo > hi:
        return None
    logger.debug(f"CH/Fine threshold {fmt_rational(lo)}")
    return lo
