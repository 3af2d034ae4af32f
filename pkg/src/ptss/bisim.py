"""Probabilistic bisimilarity over finite transition relations.

States are equivalent when they enable the same labels and, per label, the
same set of block-mass profiles; the partition refiner iterates that test
to a fixpoint.  A congruence probe plugs equivalent states into random
contexts and checks the equivalence survives.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .dist import FiniteDistribution
from .rules import PTSS
from .semantics import TransitionRelation
from .terms import App, Signature, Term, term_key, term_size


class Partition:
    """Equivalence classes of terms, queried by term key."""

    def __init__(self, blocks: Iterable[Iterable[Term]]) -> None:
        self.blocks: list[tuple[Term, ...]] = [
            tuple(sorted(b, key=term_key)) for b in blocks if b
        ]
        self.blocks.sort(key=lambda b: term_key(b[0]))
        self._of = {term_key(t): i for i, b in enumerate(self.blocks) for t in b}

    def block_of(self, t: Term) -> int | None:
        return self._of.get(term_key(t))

    def same_block(self, t1: Term, t2: Term) -> bool:
        b1, b2 = self.block_of(t1), self.block_of(t2)
        return b1 is not None and b1 == b2

    def __len__(self) -> int:
        return len(self.blocks)

    def __eq__(self, other) -> bool:
        return isinstance(other, Partition) and self.blocks == other.blocks

    def __hash__(self):
        return hash(tuple(self.blocks))


def block_masses(pi: FiniteDistribution, part: Partition) -> tuple[tuple[int, Fraction], ...]:
    """Mass the distribution puts on each block, sparse and sorted.

    Terms outside the partition are pooled under block -1.
    """
    acc: dict[int, Fraction] = {}
    for t in pi.support:
        b = part.block_of(t)
        key = -1 if b is None else b
        acc[key] = acc.get(key, Fraction(0)) + pi.prob(t)
    return tuple(sorted(acc.items()))


def lift_equal(pi1: FiniteDistribution, pi2: FiniteDistribution, part: Partition) -> bool:
    """Do two distributions agree on every block of the partition?"""
    return block_masses(pi1, part) == block_masses(pi2, part)


def _signature(rel: TransitionRelation, labels: Sequence[str], t: Term, part: Partition):
    return tuple(
        frozenset(block_masses(pi, part) for pi in rel.dists(t, a)) for a in labels
    )


def bisimilarity(
    rel: TransitionRelation, states: Sequence[Term], labels: Sequence[str]
) -> Partition:
    """Coarsest partition where related states have matching transitions.

    Each step regroups states by, per label, the set of block-mass profiles
    of their enabled distributions; distributions are compared under the
    lifting of the current partition.
    """
    part = Partition([list(states)])
    while True:
        groups: dict[tuple, list[Term]] = {}
        for b in part.blocks:
            for t in b:
                groups.setdefault((part.block_of(t), _signature(rel, labels, t, part)), []).append(t)
        new = Partition(groups.values())
        if len(new) == len(part):
            return new
        part = new


def bisimilar(
    rel: TransitionRelation, states: Sequence[Term], labels: Sequence[str], t1: Term, t2: Term
) -> bool:
    return bisimilarity(rel, states, labels).same_block(t1, t2)


# -- congruence probing ----------------------------------------------------------------


@dataclass
class Counterexample:
    left: Term
    right: Term
    context_left: Term
    context_right: Term


@dataclass
class CongruenceReport:
    pairs: int
    contexts_tried: int
    checked: int
    counterexamples: list[Counterexample] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.counterexamples

    def summary(self) -> str:
        if self.ok:
            return (
                f"no counterexample within bound: {self.checked} context instances "
                f"over {self.pairs} equivalent pairs"
            )
        c = self.counterexamples[0]
        return f"congruence broken: {c.context_left} vs {c.context_right}"


def _contexts(
    sig: Signature, rng: random.Random, fillers: Sequence[Term], depth: int
) -> Callable[[Term], Term]:
    """A random context builder: nested function applications with one hole."""
    funcs = [(f, n) for f, n in sig.functions if n > 0]

    def build(d: int) -> Callable[[Term], Term]:
        if d == 0 or not funcs:
            return lambda t: t
        f, n = rng.choice(funcs)
        pos = rng.randrange(n)
        args = [rng.choice(fillers) for _ in range(n)]
        inner = build(d - 1)

        def ctx(t: Term) -> Term:
            filled = list(args)
            filled[pos] = inner(t)
            return App(f, tuple(filled))

        return ctx

    return build(depth)


def congruence_probe(
    rel: TransitionRelation,
    universe: Sequence[Term],
    labels: Sequence[str],
    sig: Signature,
    samples: int = 200,
    depth: int = 3,
    seed: int = 0,
) -> CongruenceReport:
    """Check random contexts preserve bisimilarity, within the universe.

    Context instances falling outside the universe are skipped: the bounded
    relation says nothing about them.
    """
    part = bisimilarity(rel, universe, labels)
    keys = {term_key(t) for t in universe}
    pairs = [
        (t1, t2)
        for b in part.blocks
        for t1, t2 in itertools.combinations(b, 2)
    ]
    rng = random.Random(seed)
    report = CongruenceReport(pairs=len(pairs), contexts_tried=0, checked=0)
    if not pairs:
        return report
    fillers = sorted(universe, key=term_size)[: max(4, len(universe) // 2)]
    for _ in range(samples):
        t1, t2 = rng.choice(pairs)
        ctx = _contexts(sig, rng, fillers, rng.randint(1, depth))
        c1, c2 = ctx(t1), ctx(t2)
        report.contexts_tried += 1
        if term_key(c1) not in keys or term_key(c2) not in keys:
            continue
        report.checked += 1
        if not part.same_block(c1, c2):
            report.counterexamples.append(Counterexample(t1, t2, c1, c2))
    return report
