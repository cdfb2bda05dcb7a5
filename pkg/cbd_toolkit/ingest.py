"""Estimating systems from recorded trials.

Each trial names the context it was recorded in and one outcome per content
of that context. Relative frequencies are kept as exact fractions; trial
order is ignored.
"""

import io
import json
import logging
import traceback
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import AlphabetViolation, DuplicateId, EmptyContext, SystemValidationError, UnknownContext, UnknownTag
from .system import Content, Context, Distribution, System, Variable, _build_contents, _build_context_shape, make_system

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrialRecord:
    context: str
    values: Tuple[str, ...]


@dataclass(frozen=True)
class Design:
    """Contents and context shapes of a system, without pmfs."""

    name: str
    contents: Tuple[Content, ...]
    contexts: Tuple[Tuple[str, Tuple[str, ...]], ...]
    identity_classes: Optional[Tuple[Tuple[str, ...], ...]] = None

    def shape(self, context_id: str) -> Tuple[str, ...]:
        for ctx_id, ctx_contents in self.contexts:
            if ctx_id == context_id:
                return ctx_contents
        raise UnknownContext(f"Design {self.name!r} has no context {context_id!r}")

    def alphabets(self, context_id: str) -> List[Tuple[str, ...]]:
        by_id = {c.id: c for c in self.contents}
        return [by_id[c].outcomes for c in self.shape(context_id)]


@dataclass(frozen=True)
class Estimate:
    system: System
    counts: Dict[str, Dict[Tuple[str, ...], int]]


def build_design(spec: Mapping) -> Design:
    """Design from a System JSON document; any pmf present is ignored."""
    if not isinstance(spec, Mapping):
        raise SystemValidationError("Design document must be a JSON object")
    contents = _build_contents(spec.get("contents", []))
    by_id = {c.id: c for c in contents}
    shapes = []
    for raw in spec.get("contexts", []):
        ctx_id, ctx_contents = _build_context_shape(raw, by_id)
        if any(ctx_id == s[0] for s in shapes):
            raise DuplicateId(f"Context id {ctx_id!r} declared twice")
        shapes.append((ctx_id, ctx_contents))
    if not shapes:
        raise SystemValidationError("Design declares no contexts")
    classes = spec.get("identity_classes")
    return Design(
        str(spec.get("name", "estimated")),
        contents,
        tuple(shapes),
        tuple(tuple(str(v) for v in members) for members in classes) if classes is not None else None,
    )


def load_design(path: Union[str, Path]) -> Design:
    with Path(path).open(encoding="utf-8") as f:
        return build_design(json.load(f))


class TrialAccumulator:
    """Single-writer streaming counter of trials per context."""

    def __init__(self, design: Design):
        self.design = design
        self.counts: Dict[str, Counter] = {ctx_id: Counter() for ctx_id, _ in design.contexts}
        self.stats = {'trials': 0, 'rejected': 0}
        self.logger = logging.getLogger(__name__)

    def add(self, trial: TrialRecord) -> None:
        if trial.context not in self.counts:
            self.stats['rejected'] += 1
            raise UnknownContext(f"Trial names unknown context {trial.context!r}")
        alphabets = self.design.alphabets(trial.context)
        values = tuple(trial.values)
        if len(values) != len(alphabets):
            self.stats['rejected'] += 1
            raise AlphabetViolation(
                f"Trial in context {trial.context!r} has {len(values)} values, expected {len(alphabets)}"
            )
        for value, alphabet in zip(values, alphabets):
            if value not in alphabet:
                self.stats['rejected'] += 1
                raise AlphabetViolation(f"Value {value!r} in context {trial.context!r} is not in {list(alphabet)}")
        self.counts[trial.context][values] += 1
        self.stats['trials'] += 1

    def build(self) -> Estimate:
        by_id = {c.id: c for c in self.design.contents}
        contexts = []
        counts = {}
        for ctx_id, ctx_contents in self.design.contexts:
            counter = self.counts[ctx_id]
            total = sum(counter.values())
            if total == 0:
                raise EmptyContext(f"Context {ctx_id!r} has no trials")
            alphabets = [by_id[c].outcomes for c in ctx_contents]
            pmf = Distribution.over(alphabets, {v: Fraction(n, total) for v, n in counter.items()})
            contexts.append(Context(ctx_id, ctx_contents, pmf))
            counts[ctx_id] = {values: counter.get(values, 0) for values in pmf.support}
            self.logger.info(f"Context {ctx_id}: {total} trials")
        classes = None
        if self.design.identity_classes is not None:
            classes = [[Variable.parse(label) for label in members] for members in self.design.identity_classes]
        system = make_system(self.design.name, self.design.contents, contexts, classes)
        return Estimate(system, counts)


def estimate_system(trials: Iterable[TrialRecord], design: Design) -> Estimate:
    """Exact relative frequencies per context."""
    acc = TrialAccumulator(design)
    for trial in trials:
        acc.add(trial)
    return acc.build()


def conditionalize(trials: Iterable[Tuple[str, Sequence[str]]], design: Design) -> Estimate:
    """Split a tagged stream by its condition tag; each tag is a context of ``design``.

    How often each tag occurred is discarded: only the per-tag distributions
    characterize the system.
    """
    known = {ctx_id for ctx_id, _ in design.contexts}
    records = []
    for tag, values in trials:
        if tag not in known:
            raise UnknownTag(f"Condition tag {tag!r} has no context in the design")
        records.append(TrialRecord(tag, tuple(values)))
    return estimate_system(records, design)


def _is_comment(line: str) -> bool:
    return line.lstrip().startswith('#')


def load_trials_csv(path: Union[str, Path]) -> List[TrialRecord]:
    """Trials CSV: header "context,v1,v2,..."; lines starting with '#' are comments.

    Rows keep their own width: short rows are allowed and a row wider than the
    header keeps every value, so the arity check happens when it is counted.
    """
    path = Path(path)
    lines = [line for line in path.read_text(encoding='utf-8').splitlines() if line.strip() and not _is_comment(line)]
    if not lines:
        logger.warning(f"Trials file {path} is empty")
        return []
    # upper bound on the row width; surplus columns come back empty
    width = max(line.count(',') for line in lines) + 1
    try:
        df = pd.read_csv(io.StringIO("\n".join(lines)), header=None, names=list(range(width)), dtype=str,
                         keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        logger.warning(f"Trials file {path} is empty")
        return []
    except pd.errors.ParserError as e:
        logger.error(f"Error parsing trials file {path}: {str(e)}")
        logger.debug(traceback.format_exc())
        raise SystemValidationError(f"Malformed trials file {path}: {str(e)}") from e
    df = df.fillna('')
    if str(df.iat[0, 0]).strip() != 'context':
        raise SystemValidationError(f"Trials file {path} has no 'context' column")
    trials = []
    for row in df.iloc[1:].itertuples(index=False):
        values = [str(v).strip() for v in row[1:]]
        while values and values[-1] == "":
            values.pop()
        trials.append(TrialRecord(str(row[0]).strip(), tuple(values)))
    logger.info(f"Loaded {len(trials)} trials from {path}")
    return trials


def write_trials_csv(trials: Sequence[TrialRecord], path: Union[str, Path]) -> None:
    width = max((len(t.values) for t in trials), default=1)
    rows = [[t.context] + list(t.values) + [""] * (width - len(t.values)) for t in trials]
    df = pd.DataFrame(rows, columns=['context'] + [f"v{k}" for k in range(1, width + 1)])
    df.to_csv(path, index=False)
    logger.info(f"Wrote {len(trials)} trials to {path}")


def simulate_trials(system: System, n_per_context: int, seed: int) -> List[TrialRecord]:
    """Draw i.i.d. trials from every context pmf; deterministic for a fixed seed."""
    rng = np.random.default_rng(seed)
    trials = []
    for ctx in system.contexts:
        probs = np.array([float(m) for m in ctx.pmf.masses])
        probs = probs / probs.sum()
        draws = rng.choice(len(ctx.pmf.support), size=n_per_context, p=probs)
        trials.extend(TrialRecord(ctx.id, ctx.pmf.support[k]) for k in draws)
    return trials


def design_of(system: System) -> Design:
    """Design carrying the structure (and non-default identity classes) of ``system``."""
    classes = None
    if not system.has_default_classes():
        classes = tuple(tuple(str(v) for v in members) for members in system.identity_classes)
    return Design(system.name, system.contents, tuple((c.id, c.contents) for c in system.contexts), classes)
