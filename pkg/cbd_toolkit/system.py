"""Context-indexed systems of finite random variables.

A system is a list of contents (what is measured) and contexts (the
conditions under which a set of contents is recorded jointly). Every
(content, context) pair is its own random variable; variables that are
hypothesized to be "the same" are grouped into identity classes.

All probabilities are exact ``Fraction`` values.
"""

import itertools
import json
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .errors import (
    AlphabetViolation,
    DuplicateContentInContext,
    DuplicateId,
    EmptyKeepSet,
    InvalidContent,
    InvalidProbability,
    MixedOutcomeAlphabetInClass,
    NegativeMass,
    NonNormalized,
    PartitionError,
    ShapeMismatch,
    SystemValidationError,
    UnknownContentRef,
    UnknownContext,
    UnknownVariable,
)

logger = logging.getLogger(__name__)

Rational = Fraction
ValueTuple = Tuple[str, ...]

DEFAULT_SEPARATOR = " "


def parse_probability(raw: Union[str, int, Fraction]) -> Fraction:
    """Parse "a/b", an integer or a finite decimal exactly.

    Floats are rejected: they would smuggle binary rounding into the exact
    pipeline.
    """
    if isinstance(raw, bool) or isinstance(raw, float):
        raise InvalidProbability(f"Probability must be a string or integer, got {raw!r}")
    if isinstance(raw, (int, Fraction)):
        return Fraction(raw)
    if not isinstance(raw, str):
        raise InvalidProbability(f"Unsupported probability value {raw!r}")
    text = raw.strip()
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as e:
        raise InvalidProbability(f"Cannot parse probability {raw!r}: {str(e)}") from e
    return value


def fmt_rational(value: Fraction) -> str:
    """Serialize as "a/b", always with an explicit denominator."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class Content:
    id: str
    outcomes: Tuple[str, ...]

    def __post_init__(self):
        if len(self.outcomes) < 2:
            raise InvalidContent(f"Content {self.id!r} needs at least 2 outcomes, got {list(self.outcomes)}")
        if len(set(self.outcomes)) != len(self.outcomes):
            raise InvalidContent(f"Content {self.id!r} has repeated outcome labels {list(self.outcomes)}")


@dataclass(frozen=True)
class Variable:
    content: str
    context: str

    def __str__(self) -> str:
        return f"{self.content}@{self.context}"

    @classmethod
    def parse(cls, label: str) -> "Variable":
        content, sep, context = label.partition("@")
        if not sep or not content or not context:
            raise UnknownVariable(f"Variable reference {label!r} is not of the form content@context")
        return cls(content, context)


@dataclass(frozen=True)
class Distribution:
    """Finite probability mass function over value tuples.

    ``support`` is dense over the product alphabet in lexicographic order of
    the declared outcome order, so two distributions over the same alphabets
    are comparable position by position.
    """

    support: Tuple[ValueTuple, ...]
    masses: Tuple[Fraction, ...]

    def __post_init__(self):
        if len(self.support) != len(self.masses):
            raise SystemValidationError("Distribution support and masses differ in length")
        if len(set(self.support)) != len(self.support):
            raise SystemValidationError("Distribution support has repeated tuples")
        for values, mass in zip(self.support, self.masses):
            if mass < 0:
                raise NegativeMass(f"Negative mass {fmt_rational(mass)} at {list(values)}")
        total = sum(self.masses, Fraction(0))
        if total != 1:
            raise NonNormalized(f"Masses sum to {fmt_rational(total)}, not 1")

    @classmethod
    def over(cls, alphabets: Sequence[Sequence[str]], masses: Mapping[ValueTuple, Fraction]) -> "Distribution":
        """Dense distribution over the product of ``alphabets``; missing tuples get 0."""
        support = tuple(itertools.product(*alphabets))
        known = set(support)
        for values in masses:
            if tuple(values) not in known:
                raise AlphabetViolation(f"Tuple {list(values)} is outside the declared alphabets")
        return cls(support, tuple(Fraction(masses.get(values, 0)) for values in support))

    def mass(self, values: Sequence[str]) -> Fraction:
        try:
            return self.masses[self.support.index(tuple(values))]
        except ValueError:
            return Fraction(0)

    def as_dict(self) -> Dict[ValueTuple, Fraction]:
        return dict(zip(self.support, self.masses))

    def project(self, positions: Sequence[int]) -> "Distribution":
        """Sum out every coordinate not listed in ``positions``."""
        acc: Dict[ValueTuple, Fraction] = {}
        for values, mass in zip(self.support, self.masses):
            key = tuple(values[i] for i in positions)
            acc[key] = acc.get(key, Fraction(0)) + mass
        return Distribution(tuple(acc), tuple(acc.values()))

    def total_variation(self, other: "Distribution") -> Fraction:
        if self.support != other.support:
            raise ShapeMismatch("Total variation needs distributions over the same support")
        return sum((abs(a - b) for a, b in zip(self.masses, other.masses)), Fraction(0)) / 2

    def mix(self, other: "Distribution", weight: Fraction) -> "Distribution":
        if self.support != other.support:
            raise ShapeMismatch("Cannot mix distributions over different supports")
        weight = Fraction(weight)
        return Distribution(
            self.support,
            tuple((1 - weight) * a + weight * b for a, b in zip(self.masses, other.masses)),
        )


@dataclass(frozen=True)
class Context:
    id: str
    contents: Tuple[str, ...]
    pmf: Distribution


@dataclass(frozen=True)
class Connection:
    """One identity class with the outcome alphabet its members share."""

    class_id: str
    variables: Tuple[Variable, ...]
    outcomes: Tuple[str, ...]


@dataclass(frozen=True)
class System:
    name: str
    contents: Tuple[Content, ...]
    contexts: Tuple[Context, ...]
    identity_classes: Tuple[Tuple[Variable, ...], ...]

    def content(self, content_id: str) -> Content:
        for content in self.contents:
            if content.id == content_id:
                return content
        raise UnknownContentRef(f"Unknown content {content_id!r}")

    def context(self, context_id: str) -> Context:
        for ctx in self.contexts:
            if ctx.id == context_id:
                return ctx
        raise UnknownContext(f"Unknown context {context_id!r}")

    def variables(self) -> Tuple[Variable, ...]:
        """All variables, context by context, in each context's content order."""
        return tuple(Variable(c, ctx.id) for ctx in self.contexts for c in ctx.contents)

    def alphabet(self, variable: Variable) -> Tuple[str, ...]:
        return self.content(variable.content).outcomes

    def context_alphabets(self, ctx: Context) -> List[Tuple[str, ...]]:
        return [self.content(c).outcomes for c in ctx.contents]

    def has_default_classes(self) -> bool:
        return self.identity_classes == default_identity_classes(self.contents, self.contexts)

    def same_structure(self, other: "System") -> bool:
        return (
            self.contents == other.contents
            and [(c.id, c.contents) for c in self.contexts] == [(c.id, c.contents) for c in other.contexts]
            and self.identity_classes == other.identity_classes
        )


def default_identity_classes(contents: Sequence[Content], contexts: Sequence[Context]) -> Tuple[Tuple[Variable, ...], ...]:
    """Group variables by content id, in content declaration order."""
    classes = []
    for content in contents:
        members = tuple(Variable(content.id, ctx.id) for ctx in contexts if content.id in ctx.contents)
        if members:
            classes.append(members)
    return tuple(classes)


def _validate_classes(contents: Sequence[Content], contexts: Sequence[Context],
                      classes: Sequence[Sequence[Variable]]) -> Tuple[Tuple[Variable, ...], ...]:
    by_id = {c.id: c for c in contents}
    all_vars = [Variable(c, ctx.id) for ctx in contexts for c in ctx.contents]
    known = set(all_vars)
    seen = set()
    result = []
    for members in classes:
        members = tuple(members)
        if not members:
            raise PartitionError("Identity classes must be nonempty")
        for var in members:
            if var not in known:
                raise UnknownVariable(f"Identity class names unknown variable {var}")
            if var in seen:
                raise PartitionError(f"Variable {var} appears in more than one identity class")
            seen.add(var)
        alphabets = {by_id[v.content].outcomes for v in members}
        if len(alphabets) > 1:
            labels = [str(v) for v in members]
            # one ordered alphabet per class: reduced atoms take one value per class
            if len({frozenset(a) for a in alphabets}) == 1:
                raise MixedOutcomeAlphabetInClass(
                    f"Identity class {labels} shares one outcome set but declares it in different orders: "
                    f"{sorted(alphabets)}; list the outcomes in the same order for every content"
                )
            raise MixedOutcomeAlphabetInClass(f"Identity class {labels} mixes outcome alphabets {sorted(alphabets)}")
        result.append(members)
    missing = [str(v) for v in all_vars if v not in seen]
    if missing:
        raise PartitionError(f"Identity classes do not cover variables {missing}")
    return tuple(result)


def _build_contents(raw_contents) -> Tuple[Content, ...]:
    contents = []
    seen = set()
    for raw in raw_contents:
        try:
            content = Content(str(raw["id"]), tuple(str(o) for o in raw["outcomes"]))
        except (KeyError, TypeError) as e:
            raise SystemValidationError(f"Malformed content entry {raw!r}: {str(e)}") from e
        if content.id in seen:
            raise DuplicateId(f"Content id {content.id!r} declared twice")
        seen.add(content.id)
        contents.append(content)
    if not contents:
        raise SystemValidationError("System declares no contents")
    return tuple(contents)


def _build_context_shape(raw, by_id: Mapping[str, Content]) -> Tuple[str, Tuple[str, ...]]:
    try:
        ctx_id = str(raw["id"])
        ctx_contents = tuple(str(c) for c in raw["contents"])
    except (KeyError, TypeError) as e:
        raise SystemValidationError(f"Malformed context entry {raw!r}: {str(e)}") from e
    if not ctx_contents:
        raise SystemValidationError(f"Context {ctx_id!r} lists no contents")
    seen = set()
    for content_id in ctx_contents:
        if content_id not in by_id:
            raise UnknownContentRef(f"Context {ctx_id!r} refers to unknown content {content_id!r}")
        if content_id in seen:
            raise DuplicateContentInContext(f"Context {ctx_id!r} lists content {content_id!r} twice")
        seen.add(content_id)
    return ctx_id, ctx_contents


def _build_pmf(ctx_id: str, alphabets: Sequence[Tuple[str, ...]], raw_pmf) -> Distribution:
    masses: Dict[ValueTuple, Fraction] = {}
    for entry in raw_pmf:
        try:
            values = tuple(str(v) for v in entry["values"])
            raw_p = entry["p"]
        except (KeyError, TypeError) as e:
            raise SystemValidationError(f"Context {ctx_id!r}: malformed pmf entry {entry!r}: {str(e)}") from e
        if len(values) != len(alphabets):
            raise AlphabetViolation(
                f"Context {ctx_id!r}: tuple {list(values)} has {len(values)} values, expected {len(alphabets)}"
            )
        for value, alphabet in zip(values, alphabets):
            if value not in alphabet:
                raise AlphabetViolation(f"Context {ctx_id!r}: value {value!r} is not in {list(alphabet)}")
        if values in masses:
            raise SystemValidationError(f"Context {ctx_id!r}: tuple {list(values)} listed twice")
        try:
            masses[values] = parse_probability(raw_p)
        except InvalidProbability as e:
            raise InvalidProbability(f"Context {ctx_id!r}: {str(e)}") from e
    try:
        return Distribution.over(alphabets, masses)
    except (NegativeMass, NonNormalized) as e:
        raise type(e)(f"Context {ctx_id!r}: {str(e)}") from e


def build_system(spec: Mapping) -> System:
    """Validate a parsed System JSON document and build the System."""
    if not isinstance(spec, Mapping):
        raise SystemValidationError("System document must be a JSON object")
    name = str(spec.get("name", "system"))
    contents = _build_contents(spec.get("contents", []))
    by_id = {c.id: c for c in contents}

    contexts = []
    seen_ctx = set()
    for raw in spec.get("contexts", []):
        ctx_id, ctx_contents = _build_context_shape(raw, by_id)
        if ctx_id in seen_ctx:
            raise DuplicateId(f"Context id {ctx_id!r} declared twice")
        seen_ctx.add(ctx_id)
        alphabets = [by_id[c].outcomes for c in ctx_contents]
        if "pmf" not in raw:
            raise SystemValidationError(f"Context {ctx_id!r} has no pmf")
        contexts.append(Context(ctx_id, ctx_contents, _build_pmf(ctx_id, alphabets, raw["pmf"])))
    if not contexts:
        raise SystemValidationError("System declares no contexts")

    raw_classes = spec.get("identity_classes")
    if raw_classes is None:
        classes = default_identity_classes(contents, contexts)
    else:
        classes = _validate_classes(
            contents, contexts, [[Variable.parse(str(label)) for label in members] for members in raw_classes]
        )
    system = System(name, contents, tuple(contexts), classes)
    logger.debug(f"Built system {name!r}: {len(contents)} contents, {len(contexts)} contexts, {len(classes)} classes")
    return system


def make_system(name: str, contents: Sequence[Content], contexts: Sequence[Context],
                identity_classes: Optional[Sequence[Sequence[Variable]]] = None) -> System:
    """Build a System from already constructed parts, running the same validation as build_system."""
    return build_system(dump_system(System(
        name,
        tuple(contents),
        tuple(contexts),
        tuple(tuple(c) for c in identity_classes) if identity_classes is not None else default_identity_classes(contents, contexts),
    )))


def with_identity_classes(system: System, classes: Sequence[Sequence[str]]) -> System:
    """Re-validate ``system`` under another identity hypothesis ("content@context" labels)."""
    parsed = _validate_classes(system.contents, system.contexts,
                               [[Variable.parse(label) for label in members] for members in classes])
    return System(system.name, system.contents, system.contexts, parsed)


def marginal(system: System, context: str, keep: Iterable[str]) -> Distribution:
    """Marginal of one context's pmf on a subset of its contents (context order kept)."""
    ctx = system.context(context)
    keep = list(keep)
    if not keep:
        raise EmptyKeepSet(f"Nothing to keep when marginalizing context {context!r}")
    for content_id in keep:
        if content_id not in ctx.contents:
            raise UnknownContentRef(f"Content {content_id!r} is not measured in context {context!r}")
    positions = [i for i, c in enumerate(ctx.contents) if c in keep]
    return ctx.pmf.project(positions)


def relabel_with_condition(dist: Distribution, tag: str, separator: str = DEFAULT_SEPARATOR) -> Distribution:
    """Make the recording condition part of every value ("red" + "00" -> "red 00")."""
    if not tag:
        return dist
    support = tuple(tuple(f"{tag}{separator}{v}" for v in values) for values in dist.support)
    return Distribution(support, dist.masses)


def connections(system: System) -> List[Connection]:
    """One entry per identity class, in class order.

    Classes made of a single content are named after it; anything else gets a
    positional name.
    """
    result = []
    content_counts: Dict[str, int] = {}
    for members in system.identity_classes:
        ids = {v.content for v in members}
        if len(ids) == 1:
            content_counts[next(iter(ids))] = content_counts.get(next(iter(ids)), 0) + 1
    for k, members in enumerate(system.identity_classes, start=1):
        ids = {v.content for v in members}
        if len(ids) == 1 and content_counts[next(iter(ids))] == 1:
            class_id = next(iter(ids))
        else:
            class_id = f"class{k}"
        result.append(Connection(class_id, members, system.alphabet(members[0])))
    return result


def variable_marginal(system: System, variable: Variable) -> Distribution:
    return marginal(system, variable.context, [variable.content])


@dataclass(frozen=True)
class ClassSignaling:
    class_id: str
    passed: bool
    discrepancy: Fraction
    marginals: Tuple[Tuple[Variable, Distribution], ...]


@dataclass(frozen=True)
class NoSignalingReport:
    passed: bool
    classes: Tuple[ClassSignaling, ...]

    @property
    def max_discrepancy(self) -> Fraction:
        return max((c.discrepancy for c in self.classes), default=Fraction(0))


def check_no_signaling(system: System) -> NoSignalingReport:
    """Marginal selectivity: each class's members must be identically distributed."""
    results = []
    for conn in connections(system):
        margs = tuple((v, variable_marginal(system, v)) for v in conn.variables)
        worst = Fraction(0)
        for (_, a), (_, b) in itertools.combinations(margs, 2):
            worst = max(worst, a.total_variation(b))
        results.append(ClassSignaling(conn.class_id, worst == 0, worst, margs))
    report = NoSignalingReport(all(r.passed for r in results), tuple(results))
    if not report.passed:
        logger.info(f"System {system.name!r} violates no-signaling (max discrepancy {fmt_rational(report.max_discrepancy)})")
    return report


def mix_systems(a: System, b: System, weight: Union[Fraction, int, str]) -> System:
    """Context-wise convex combination (1 - weight) * a + weight * b."""
    weight = parse_probability(weight) if isinstance(weight, str) else Fraction(weight)
    if not 0 <= weight <= 1:
        raise InvalidProbability(f"Mixture weight {fmt_rational(weight)} outside [0, 1]")
    if not a.same_structure(b):
        raise ShapeMismatch(f"Systems {a.name!r} and {b.name!r} have different structures")
    contexts = tuple(
        Context(ca.id, ca.contents, ca.pmf.mix(cb.pmf, weight)) for ca, cb in zip(a.contexts, b.contexts)
    )
    return System(f"{a.name}+{b.name}@{fmt_rational(weight)}", a.contents, contexts, a.identity_classes)


def product_system(name: str, contents: Sequence[Content], marginals: Mapping[str, Sequence[Fraction]],
                   context_shapes: Sequence[Tuple[str, Sequence[str]]]) -> System:
    """Every context pmf is the product of fixed per-content marginals."""
    by_id = {c.id: c for c in contents}
    contexts = []
    for ctx_id, ctx_contents in context_shapes:
        alphabets = [by_id[c].outcomes for c in ctx_contents]
        masses = {}
        for values in itertools.product(*alphabets):
            mass = Fraction(1)
            for content_id, value in zip(ctx_contents, values):
                mass *= Fraction(marginals[content_id][by_id[content_id].outcomes.index(value)])
            masses[values] = mass
        contexts.append(Context(ctx_id, tuple(ctx_contents), Distribution.over(alphabets, masses)))
    return make_system(name, contents, contexts)


def from_joint(name: str, contents: Sequence[Content], joint: Distribution,
               context_shapes: Sequence[Tuple[str, Sequence[str]]]) -> System:
    """Contexts as marginals of one joint over all contents (noncontextual by construction)."""
    order = [c.id for c in contents]
    contexts = []
    for ctx_id, ctx_contents in context_shapes:
        pmf = joint.project([order.index(c) for c in ctx_contents])
        contexts.append(Context(ctx_id, tuple(ctx_contents), pmf))
    return make_system(name, contents, contexts)


def context_product_system(system: System) -> System:
    """Replace every context pmf by the product of its own one-dimensional marginals."""
    contexts = []
    for ctx in system.contexts:
        margs = [ctx.pmf.project([i]).as_dict() for i in range(len(ctx.contents))]
        masses = {}
        for values in ctx.pmf.support:
            mass = Fraction(1)
            for i, value in enumerate(values):
                mass *= margs[i][(value,)]
            masses[values] = mass
        contexts.append(Context(ctx.id, ctx.contents, Distribution(ctx.pmf.support, tuple(masses[v] for v in ctx.pmf.support))))
    return System(f"{system.name}-product", system.contents, tuple(contexts), system.identity_classes)


def dump_system(system: System, include_pmf: bool = True) -> dict:
    """System JSON document with canonical ordering and "a/b" probabilities."""
    doc = {
        "name": system.name,
        "contents": [{"id": c.id, "outcomes": list(c.outcomes)} for c in system.contents],
        "contexts": [],
    }
    for ctx in system.contexts:
        entry = {"id": ctx.id, "contents": list(ctx.contents)}
        if include_pmf:
            entry["pmf"] = [
                {"values": list(values), "p": fmt_rational(mass)}
                for values, mass in zip(ctx.pmf.support, ctx.pmf.masses)
                if mass != 0
            ]
        doc["contexts"].append(entry)
    if not system.has_default_classes():
        doc["identity_classes"] = [[str(v) for v in members] for members in system.identity_classes]
    return doc


def load_system(path: Union[str, Path]) -> System:
    """Read and validate a System JSON file.

    I/O and JSON errors propagate unchanged (``OSError``, ``json.JSONDecodeError``);
    structural problems raise ``SystemValidationError`` subclasses.
    """
    path = Path(path)
    with path.open(encoding="utf-8") as f:
        spec = json.load(f)
    logger.info(f"Loaded system document {path}")
    return build_system(spec)


def save_system(system: System, path: Union[str, Path]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        json.dump(dump_system(system), f, indent=2)
        f.write("\n")
    logger.info(f"Wrote system {system.name!r} to {path}")
