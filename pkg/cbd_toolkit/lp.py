"""Exact linear programming over the rationals.

Two-phase tableau simplex. Every quantity is an exact rational, so
witnesses satisfy their constraints exactly and the "exists iff" statements
about couplings can be checked literally. Tableau rows are sparse integer
numerators over a per-row denominator: coupling programs are 0/1 matrices
with a few hundred columns, and per-entry ``Fraction`` objects are too slow
there.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from math import gcd, lcm
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import MalformedProgram
from .logger import log_program_details

logger = logging.getLogger(__name__)

MAX_PIVOTS = 200_000
# consecutive degenerate pivots before pricing falls back to Bland's rule
DEGENERATE_RUN = 20

Row = Tuple[Fraction, ...]


class Direction(Enum):
    MAXIMIZE = "max"
    MINIMIZE = "min"


class LpStatus(Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    OPTIMAL = "optimal"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """``equalities``: row . x == rhs; ``inequalities``: row . x <= rhs."""

    num_vars: int
    equalities: Tuple[Tuple[Row, Fraction], ...] = ()
    inequalities: Tuple[Tuple[Row, Fraction], ...] = ()
    nonneg_mask: Tuple[bool, ...] = ()
    objective: Optional[Row] = None
    direction: Direction = Direction.MAXIMIZE

    def validate(self) -> None:
        if self.num_vars < 1:
            raise MalformedProgram("A linear program needs at least one variable")
        if len(self.nonneg_mask) != self.num_vars:
            raise MalformedProgram(
                f"nonneg_mask has {len(self.nonneg_mask)} entries for {self.num_vars} variables"
            )
        for kind, rows in (("equality", self.equalities), ("inequality", self.inequalities)):
            for k, (row, _) in enumerate(rows):
                if len(row) != self.num_vars:
                    raise MalformedProgram(f"{kind} row {k} has length {len(row)}, expected {self.num_vars}")
        if self.objective is not None and len(self.objective) != self.num_vars:
            raise MalformedProgram(f"objective has length {len(self.objective)}, expected {self.num_vars}")


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    point: Optional[Tuple[Fraction, ...]] = None
    value: Optional[Fraction] = None

    @property
    def ok(self) -> bool:
        return self.status in (LpStatus.FEASIBLE, LpStatus.OPTIMAL)


@dataclass
class ProgramBuilder:
    """Incremental construction with sparse rows keyed by variable index."""

    names: List[str] = field(default_factory=list)
    nonneg: List[bool] = field(default_factory=list)
    eq_rows: List[Tuple[Dict[int, Fraction], Fraction]] = field(default_factory=list)
    le_rows: List[Tuple[Dict[int, Fraction], Fraction]] = field(default_factory=list)
    objective: Optional[Dict[int, Fraction]] = None
    direction: Direction = Direction.MAXIMIZE

    def add_variable(self, name: str, nonneg: bool = True) -> int:
        self.names.append(name)
        self.nonneg.append(nonneg)
        return len(self.names) - 1

    def add_equality(self, coefs: Mapping[int, Fraction], rhs) -> None:
        self.eq_rows.append((dict(coefs), Fraction(rhs)))

    def add_inequality(self, coefs: Mapping[int, Fraction], rhs) -> None:
        self.le_rows.append((dict(coefs), Fraction(rhs)))

    def set_objective(self, coefs: Mapping[int, Fraction], direction: Direction) -> None:
        self.objective = dict(coefs)
        self.direction = direction

    def _dense(self, coefs: Mapping[int, Fraction]) -> Row:
        row = [Fraction(0)] * len(self.names)
        for j, v in coefs.items():
            row[j] += Fraction(v)
        return tuple(row)

    def build(self) -> LinearProgram:
        return LinearProgram(
            num_vars=len(self.names),
            equalities=tuple((self._dense(c), rhs) for c, rhs in self.eq_rows),
            inequalities=tuple((self._dense(c), rhs) for c, rhs in self.le_rows),
            nonneg_mask=tuple(self.nonneg),
            objective=self._dense(self.objective) if self.objective is not None else None,
            direction=self.direction,
        )


def satisfies(lp: LinearProgram, point: Sequence[Fraction]) -> bool:
    """Exact re-substitution check of every constraint."""
    if len(point) != lp.num_vars:
        return False
    for x, nonneg in zip(point, lp.nonneg_mask):
        if nonneg and x < 0:
            return False
    for row, rhs in lp.equalities:
        if sum((a * x for a, x in zip(row, point) if a), Fraction(0)) != rhs:
            return False
    for row, rhs in lp.inequalities:
        if sum((a * x for a, x in zip(row, point) if a), Fraction(0)) > rhs:
            return False
    return True


def _reduce(nums: Dict[int, int], rhs: int, den: int) -> Tuple[Dict[int, int], int, int]:
    """Positive denominator, lowest terms across the whole row."""
    if den < 0:
        nums = {j: -v for j, v in nums.items()}
        rhs, den = -rhs, -den
    g = gcd(den, rhs, *nums.values())
    if g > 1:
        nums = {j: v // g for j, v in nums.items()}
        rhs //= g
        den //= g
    return nums, rhs, den


def _from_fractions(coefs: Mapping[int, Fraction], rhs: Fraction) -> Tuple[Dict[int, int], int, int]:
    coefs = {j: Fraction(v) for j, v in coefs.items() if v}
    rhs = Fraction(rhs)
    den = lcm(rhs.denominator, *(v.denominator for v in coefs.values()))
    nums = {j: v.numerator * (den // v.denominator) for j, v in coefs.items()}
    return _reduce(nums, rhs.numerator * (den // rhs.denominator), den)


def _eliminate(nums: Dict[int, int], rhs: int, den: int, f: int,
               pivot_nums: Dict[int, int], pivot_rhs: int, pivot_den: int) -> Tuple[Dict[int, int], int, int]:
    """row - (f / den) * pivot_row, where the pivot row holds 1 in the pivot column."""
    new = dict(nums) if pivot_den == 1 else {j: v * pivot_den for j, v in nums.items()}
    for j, v in pivot_nums.items():
        w = new.get(j, 0) - f * v
        if w:
            new[j] = w
        else:
            new.pop(j, None)
    return _reduce(new, rhs * pivot_den - f * pivot_rhs, den * pivot_den)


class _Tableau:
    """Standard form: minimize cost . y subject to A y = b, y >= 0, b >= 0.

    Rows are sparse maps of integer numerators over one positive denominator
    per row; the cost row is kept the same way with ``z`` as its right-hand
    side (minus the objective value).
    """

    def __init__(self):
        self.rows: List[Dict[int, int]] = []
        self.rhs: List[int] = []
        self.den: List[int] = []
        self.basis: List[int] = []
        self.cost: Dict[int, int] = {}
        self.z = 0
        self.cost_den = 1
        self.pivots = 0

    def add_row(self, coefs: Mapping[int, Fraction], rhs: Fraction, basic: int) -> None:
        nums, b, den = _from_fractions(coefs, rhs)
        self.rows.append(nums)
        self.rhs.append(b)
        self.den.append(den)
        self.basis.append(basic)

    def value(self, i: int) -> Fraction:
        return Fraction(self.rhs[i], self.den[i])

    def set_cost(self, coefs: Mapping[int, Fraction], z: Fraction) -> None:
        self.cost, self.z, self.cost_den = _from_fractions(coefs, z)

    def price(self, costs: Mapping[int, Fraction]) -> None:
        """Reduced costs and objective value for the current basis."""
        reduced: Dict[int, Fraction] = dict(costs)
        z = Fraction(0)
        for i, bv in enumerate(self.basis):
            cb = costs.get(bv)
            if cb:
                d = self.den[i]
                for j, v in self.rows[i].items():
                    reduced[j] = reduced.get(j, 0) - cb * Fraction(v, d)
                z -= cb * self.value(i)
        self.set_cost(reduced, z)

    def pivot(self, r: int, col: int) -> None:
        self.pivots += 1
        if self.pivots > MAX_PIVOTS:
            raise RuntimeError(f"Simplex exceeded {MAX_PIVOTS} pivots")
        # dividing by the pivot value p/den leaves numerators over p
        nr, br, dr = _reduce(self.rows[r], self.rhs[r], self.rows[r][col])
        self.rows[r], self.rhs[r], self.den[r] = nr, br, dr
        for i, row in enumerate(self.rows):
            if i == r:
                continue
            f = row.get(col)
            if f:
                self.rows[i], self.rhs[i], self.den[i] = _eliminate(row, self.rhs[i], self.den[i], f, nr, br, dr)
        f = self.cost.get(col)
        if f:
            self.cost, self.z, self.cost_den = _eliminate(self.cost, self.z, self.cost_den, f, nr, br, dr)
        self.basis[r] = col

    def entering(self, bland: bool) -> Optional[int]:
        """Most negative reduced cost (Dantzig), or the lowest improving index (Bland)."""
        improving = [(v, j) for j, v in self.cost.items() if v < 0]
        if not improving:
            return None
        if bland:
            return min(j for _, j in improving)
        return min(improving)[1]

    def leaving(self, col: int) -> Optional[int]:
        """Minimum ratio row; ties go to the lowest basic index."""
        best = None
        for i, row in enumerate(self.rows):
            a = row.get(col, 0)
            if a <= 0:
                continue
            if best is None:
                best = i
                continue
            # b_i / a_i against b_best / a_best; row denominators cancel
            lhs = self.rhs[i] * self.rows[best][col]
            rhs = self.rhs[best] * a
            if lhs < rhs or (lhs == rhs and self.basis[i] < self.basis[best]):
                best = i
        return best

    def run(self) -> LpStatus:
        """Dantzig pricing; a run of degenerate pivots switches to Bland's rule until progress resumes."""
        degenerate = 0
        while True:
            col = self.entering(bland=degenerate >= DEGENERATE_RUN)
            if col is None:
                return LpStatus.OPTIMAL
            r = self.leaving(col)
            if r is None:
                return LpStatus.UNBOUNDED
            degenerate = degenerate + 1 if self.rhs[r] == 0 else 0
            self.pivot(r, col)

    def drop_columns_from(self, first: int, keep: Sequence[int]) -> None:
        self.rows = [{j: v for j, v in self.rows[i].items() if j < first} for i in keep]
        self.rhs = [self.rhs[i] for i in keep]
        self.den = [self.den[i] for i in keep]
        self.basis = [self.basis[i] for i in keep]


def _standard_form(lp: LinearProgram):
    """Split free variables, add slacks, flip rows to nonnegative rhs.

    Returns the sparse rows, rhs, per row the slack column that can start
    basic (None when the row needs an artificial), the column count and, per
    original variable, the (positive column, negative column or None) pair.
    """
    columns = []
    ncols = 0
    for nonneg in lp.nonneg_mask:
        if nonneg:
            columns.append((ncols, None))
            ncols += 1
        else:
            columns.append((ncols, ncols + 1))
            ncols += 2
    total = ncols + len(lp.inequalities)

    rows: List[Dict[int, Fraction]] = []
    rhs: List[Fraction] = []
    starts: List[Optional[int]] = []
    all_rows = [(row, b, None) for row, b in lp.equalities]
    all_rows += [(row, b, ncols + k) for k, (row, b) in enumerate(lp.inequalities)]
    for row, b, slack in all_rows:
        sparse: Dict[int, Fraction] = {}
        for j, a in enumerate(row):
            if a:
                pos, neg = columns[j]
                sparse[pos] = Fraction(a)
                if neg is not None:
                    sparse[neg] = -Fraction(a)
        if slack is not None:
            sparse[slack] = Fraction(1)
        b = Fraction(b)
        if b < 0:
            sparse = {j: -v for j, v in sparse.items()}
            b = -b
            slack = None
        rows.append(sparse)
        rhs.append(b)
        starts.append(slack)
    return rows, rhs, starts, total, columns


def _phase_one(lp: LinearProgram) -> Tuple[Optional[_Tableau], int, list]:
    """Find a basic feasible solution; None when the program is infeasible."""
    rows, rhs, starts, total, columns = _standard_form(lp)
    tab = _Tableau()
    cost: Dict[int, Fraction] = {}
    z = Fraction(0)
    artificial = total
    for row, b, slack in zip(rows, rhs, starts):
        if slack is not None:
            tab.add_row(row, b, slack)
            continue
        for j, v in row.items():
            cost[j] = cost.get(j, 0) - v
        z -= b
        tab.add_row({**row, artificial: Fraction(1)}, b, artificial)
        artificial += 1
    tab.set_cost(cost, z)
    tab.run()
    if tab.z != 0:
        logger.debug(f"Phase one ended with infeasibility {-Fraction(tab.z, tab.cost_den)}")
        return None, total, columns
    # artificials still basic sit at zero; pivot them out or drop their redundant rows
    keep = []
    for i in range(len(tab.rows)):
        if tab.basis[i] >= total:
            col = min((j for j in tab.rows[i] if j < total), default=None)
            if col is None:
                continue
            tab.pivot(i, col)
        keep.append(i)
    tab.drop_columns_from(total, keep)
    return tab, total, columns


def _extract(tab: _Tableau, total: int, columns) -> Tuple[Fraction, ...]:
    y = [Fraction(0)] * total
    for i, bv in enumerate(tab.basis):
        y[bv] = tab.value(i)
    return tuple(y[pos] - (y[neg] if neg is not None else 0) for pos, neg in columns)


def solve_feasibility(lp: LinearProgram) -> LpOutcome:
    """Feasible(point) or Infeasible; the objective, if any, is ignored."""
    lp.validate()
    log_program_details(lp, "feasibility program")
    tab, total, columns = _phase_one(lp)
    if tab is None:
        return LpOutcome(LpStatus.INFEASIBLE)
    point = _extract(tab, total, columns)
    if not satisfies(lp, point):
        raise RuntimeError("Solver produced a point that violates its own constraints")
    logger.debug(f"Feasible after {tab.pivots} pivots")
    return LpOutcome(LpStatus.FEASIBLE, point)


def solve_optimize(lp: LinearProgram) -> LpOutcome:
    """Optimal(point, value), Infeasible or Unbounded."""
    lp.validate()
    if lp.objective is None:
        raise MalformedProgram("solve_optimize needs an objective")
    log_program_details(lp, "optimization program")
    tab, total, columns = _phase_one(lp)
    if tab is None:
        return LpOutcome(LpStatus.INFEASIBLE)

    sign = -1 if lp.direction is Direction.MAXIMIZE else 1
    costs: Dict[int, Fraction] = {}
    for j, c in enumerate(lp.objective):
        if c:
            pos, neg = columns[j]
            costs[pos] = sign * Fraction(c)
            if neg is not None:
                costs[neg] = -sign * Fraction(c)
    tab.price(costs)
    status = tab.run()
    if status is LpStatus.UNBOUNDED:
        return LpOutcome(LpStatus.UNBOUNDED)

    point = _extract(tab, total, columns)
    if not satisfies(lp, point):
        raise RuntimeError("Solver produced a point that violates its own constraints")
    value = sum((c * x for c, x in zip(lp.objective, point) if c), Fraction(0))
    logger.debug(f"Optimal value {value} after {tab.pivots} pivots")
    return LpOutcome(LpStatus.OPTIMAL, point, value)
