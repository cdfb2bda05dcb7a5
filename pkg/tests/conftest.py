import itertools
import random
from fractions import Fraction
from pathlib import Path

import pytest

from cbd_toolkit import bell
from cbd_toolkit.system import Content, Context, Distribution, System, from_joint, load_system, make_system

FIXTURES_DIR = Path(__file__).resolve().parent.parent / "cbd_toolkit" / "fixtures"
BELL_FIXTURES = ("prbox", "uniform-independent", "deterministic", "signaling", "quantum-tsirelson")
PAT_FIXTURES = ("pat-red-blue", "pat-anticorrelated")

SIGNS = ("+1", "-1")
BELL_CONTENTS = tuple(Content(cid, SIGNS) for cid in ("A1", "A2", "B1", "B2"))
BELL_SHAPES = tuple((f"c{i}{j}", (f"A{i}", f"B{j}")) for i, j in bell.INDICES)
BINARY = ("0", "1")
PAT_CONTENTS = (Content("X", BINARY), Content("Y", BINARY))


def fixture_path(name: str) -> Path:
    return FIXTURES_DIR / f"{name}.json"


def load_fixture(name: str) -> System:
    return load_system(fixture_path(name))


@pytest.fixture
def prbox() -> System:
    return load_fixture("prbox")


@pytest.fixture
def uniform() -> System:
    return load_fixture("uniform-independent")


@pytest.fixture
def deterministic() -> System:
    return load_fixture("deterministic")


@pytest.fixture
def signaling() -> System:
    return load_fixture("signaling")


@pytest.fixture
def quantum() -> System:
    return load_fixture("quantum-tsirelson")


@pytest.fixture
def pat_red_blue() -> System:
    return load_fixture("pat-red-blue")


@pytest.fixture
def pat_anticorrelated() -> System:
    return load_fixture("pat-anticorrelated")


# Seeded generators for the rational populations used by the property tests.

def random_masses(rng: random.Random, n: int, denominator: int = 12, zeros: bool = True):
    """n nonnegative rationals summing to 1, with small denominators."""
    low = 0 if zeros else 1
    weights = [rng.randint(low, denominator) for _ in range(n)]
    if not any(weights):
        weights[rng.randrange(n)] = 1
    total = sum(weights)
    return [Fraction(w, total) for w in weights]


def random_joint(rng: random.Random, contents, denominator: int = 12) -> Distribution:
    alphabets = [c.outcomes for c in contents]
    support = tuple(itertools.product(*alphabets))
    return Distribution(support, tuple(random_masses(rng, len(support), denominator)))


def random_context_system(rng: random.Random, name: str, contents, shapes, denominator: int = 12) -> System:
    """Every context pmf drawn independently; signaling in general."""
    by_id = {c.id: c for c in contents}
    contexts = []
    for ctx_id, ctx_contents in shapes:
        joint = random_joint(rng, [by_id[c] for c in ctx_contents], denominator)
        contexts.append(Context(ctx_id, tuple(ctx_contents), joint))
    return make_system(name, contents, contexts)


def random_bell_signaling(rng: random.Random) -> System:
    return random_context_system(rng, "random-bell", BELL_CONTENTS, BELL_SHAPES)


def random_bell_noncontextual(rng: random.Random) -> System:
    return from_joint("random-joint", BELL_CONTENTS, random_joint(rng, BELL_CONTENTS), BELL_SHAPES)


def random_bell_no_signaling(rng: random.Random, prbox: System) -> System:
    """Mixture of a noncontextual system with the PR box (or its relabeled twin)."""
    base = bell.from_system(random_bell_noncontextual(rng))
    box = bell.from_system(prbox)
    if rng.random() < 0.5:
        box = bell.BellSystem(box.q, box.p, box.s, box.r)
    weight = Fraction(rng.randint(0, 12), 12)
    return bell.to_system(base.mix(box, weight), "random-mixture")


def random_bell_population(rng: random.Random, prbox: System, size: int):
    """Signaling, noncontextual and PR-mixture systems in equal thirds."""
    makers = (
        random_bell_signaling,
        random_bell_noncontextual,
        lambda r: random_bell_no_signaling(r, prbox),
    )
    return [makers[k % 3](rng) for k in range(size)]


def random_pat_system(rng: random.Random, no_signaling: bool = True) -> System:
    """Two binary contents X, Y recorded jointly under "red" and "blue"."""
    if not no_signaling:
        return random_context_system(rng, "random-pat", PAT_CONTENTS,
                                     (("red", ("X", "Y")), ("blue", ("X", "Y"))))
    a = Fraction(rng.randint(0, 6), 6)
    b = Fraction(rng.randint(0, 6), 6)
    low, high = max(Fraction(0), a + b - 1), min(a, b)
    contexts = []
    for ctx_id in ("red", "blue"):
        p00 = low + (high - low) * Fraction(rng.randint(0, 4), 4)
        masses = (p00, a - p00, b - p00, 1 - a - b + p00)
        support = tuple(itertools.product(BINARY, BINARY))
        contexts.append(Context(ctx_id, ("X", "Y"), Distribution(support, masses)))
    return make_system("random-pat", PAT_CONTENTS, contexts)
