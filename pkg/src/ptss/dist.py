"""Distribution expressions and finite distributions over closed terms.

A distribution expression is a distribution variable, an instantiable point
mass ``Dirac(t)``, or a convex combination whose entries push a product of
argument expressions through a linear term context (every hole used exactly
once, no variables).  All probabilities are exact ``Fraction`` values; no
floating point is ever introduced here.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .terms import App, DistVar, Term, Var, term_key


@dataclass(frozen=True)
class Hole:
    """Numbered context hole, 1-based."""

    index: int


CtxNode = Hole | App  # contexts contain no variables


@dataclass(frozen=True)
class Context:
    """Linear term context: each hole 1..n occurs exactly once."""

    skeleton: "CtxNode"

    def __post_init__(self) -> None:
        seen: list[int] = []

        def walk(node: CtxNode) -> None:
            if isinstance(node, Hole):
                seen.append(node.index)
                return
            if isinstance(node, Var):
                raise ValueError("contexts may not contain variables")
            for a in node.args:
                walk(a)  # type: ignore[arg-type]

        walk(self.skeleton)
        if sorted(seen) != list(range(1, len(seen) + 1)):
            raise ValueError(f"holes must be 1..n, each exactly once: {seen}")

    @property
    def holes(self) -> int:
        def count(node: CtxNode) -> int:
            if isinstance(node, Hole):
                return 1
            return sum(count(a) for a in node.args)  # type: ignore[arg-type]

        return count(self.skeleton)

    def fill(self, args: tuple[Term, ...]) -> Term:
        if len(args) != self.holes:
            raise ValueError(f"context has {self.holes} hole(s), got {len(args)}")

        def go(node: CtxNode) -> Term:
            if isinstance(node, Hole):
                return args[node.index - 1]
            return App(node.func, tuple(go(a) for a in node.args))  # type: ignore[arg-type]

        return go(self.skeleton)


IDENTITY_CTX = Context(Hole(1))


def pair_context(func: str) -> Context:
    """Binary context ``func(_1, _2)``."""
    return Context(App(func, (Hole(1), Hole(2))))


@dataclass(frozen=True)
class Dirac:
    """Instantiable point mass on a (possibly open) term."""

    term: Term


@dataclass(frozen=True)
class ConvexPart:
    weight: Fraction
    context: Context
    args: tuple["DistTerm", ...]

    def __post_init__(self) -> None:
        if not isinstance(self.weight, Fraction):
            raise TypeError("weights must be exact Fractions")
        if not (0 < self.weight <= 1):
            raise ValueError(f"weight out of (0,1]: {self.weight}")
        if len(self.args) != self.context.holes:
            raise ValueError("argument count does not match context holes")


@dataclass(frozen=True)
class Convex:
    """Convex combination of context-pushed products."""

    parts: tuple[ConvexPart, ...]

    def __post_init__(self) -> None:
        if not self.parts:
            raise ValueError("empty convex combination")
        total = sum(p.weight for p in self.parts)
        if total != 1:
            raise ValueError(f"weights must sum to 1 exactly, got {total}")


DistTerm = DistVar | Dirac | Convex


def parallel(left: DistTerm, right: DistTerm, func: str = "||") -> Convex:
    """Sugar for pushing two expressions through ``func(_1, _2)``."""
    return Convex((ConvexPart(Fraction(1), pair_context(func), (left, right)),))


def dist_vars_of(dt: DistTerm) -> set[DistVar]:
    if isinstance(dt, DistVar):
        return {dt}
    if isinstance(dt, Dirac):
        return set()
    out: set[DistVar] = set()
    for p in dt.parts:
        for a in p.args:
            out |= dist_vars_of(a)
    return out


def dist_term_vars_of(dt: DistTerm) -> set[Var]:
    """Term variables occurring inside instantiable point masses."""
    from .terms import term_vars

    if isinstance(dt, DistVar):
        return set()
    if isinstance(dt, Dirac):
        return term_vars(dt.term)
    out: set[Var] = set()
    for p in dt.parts:
        for a in p.args:
            out |= dist_term_vars_of(a)
    return out


def is_closed_dist(dt: DistTerm) -> bool:
    return not dist_vars_of(dt) and not dist_term_vars_of(dt)


def context_key(ctx: Context):
    def go(node: CtxNode):
        if isinstance(node, Hole):
            return (0, node.index)
        return (1, node.func, tuple(go(a) for a in node.args))  # type: ignore[arg-type]

    return go(ctx.skeleton)


def dist_term_key(dt: DistTerm):
    if isinstance(dt, DistVar):
        return (0, dt.name)
    if isinstance(dt, Dirac):
        return (1, term_key(dt.term))
    return (
        2,
        tuple(
            (p.weight, context_key(p.context), tuple(dist_term_key(a) for a in p.args))
            for p in dt.parts
        ),
    )


# -- finite distributions ----------------------------------------------------


@dataclass(frozen=True)
class FiniteDistribution:
    """Probability distribution with finite support over closed terms.

    Entries are normalised: sorted by term, zero masses dropped, duplicate
    terms merged, total mass exactly 1.
    """

    entries: tuple[tuple[Term, Fraction], ...]

    def __post_init__(self) -> None:
        merged: dict[Term, Fraction] = {}
        for t, p in self.entries:
            if not isinstance(p, Fraction):
                raise TypeError("probabilities must be exact Fractions")
            if p < 0:
                raise ValueError(f"negative probability {p}")
            if p == 0:
                continue
            merged[t] = merged.get(t, Fraction(0)) + p
        total = sum(merged.values(), Fraction(0))
        if total != 1:
            raise ValueError(f"total mass must be 1 exactly, got {total}")
        norm = tuple(sorted(merged.items(), key=lambda e: term_key(e[0])))
        object.__setattr__(self, "entries", norm)

    @property
    def support(self) -> tuple[Term, ...]:
        return tuple(t for t, _ in self.entries)

    def prob(self, t: Term) -> Fraction:
        for s, p in self.entries:
            if s == t:
                return p
        return Fraction(0)

    def mass(self, terms: Iterable[Term]) -> Fraction:
        wanted = set(terms)
        return sum((p for t, p in self.entries if t in wanted), Fraction(0))

    def key(self):
        return tuple((term_key(t), p) for t, p in self.entries)


def dirac(t: Term) -> FiniteDistribution:
    return FiniteDistribution(((t, Fraction(1)),))


def weighted_sum(parts: Iterable[tuple[Fraction, FiniteDistribution]]) -> FiniteDistribution:
    acc: dict[Term, Fraction] = {}
    for w, d in parts:
        for t, p in d.entries:
            acc[t] = acc.get(t, Fraction(0)) + w * p
    return FiniteDistribution(tuple(acc.items()))


def push_product(ctx: Context, dists: tuple[FiniteDistribution, ...]) -> FiniteDistribution:
    """Image of the product of ``dists`` under filling ``ctx``.

    Collisions merge: distinct support tuples mapping to one term add up.
    """
    if len(dists) != ctx.holes:
        raise ValueError("distribution count does not match context holes")
    acc: dict[Term, Fraction] = {}

    def go(i: int, picked: tuple[Term, ...], w: Fraction) -> None:
        if i == len(dists):
            t = ctx.fill(picked)
            acc[t] = acc.get(t, Fraction(0)) + w
            return
        for t, p in dists[i].entries:
            go(i + 1, picked + (t,), w * p)

    go(0, (), Fraction(1))
    return FiniteDistribution(tuple(acc.items()))


def product(d1: FiniteDistribution, d2: FiniteDistribution, func: str = "||") -> FiniteDistribution:
    """Product distribution pushed through the binary context ``func(_1,_2)``."""
    return push_product(pair_context(func), (d1, d2))


class UnboundVariable(ValueError):
    """Raised when evaluation meets a variable with no binding."""


def _close_term(t: Term, term_env: Mapping[Var, Term]) -> Term:
    if isinstance(t, Var):
        try:
            return term_env[t]
        except KeyError:
            raise UnboundVariable(f"unbound term variable {t.name}") from None
    if not t.args:
        return t
    return App(t.func, tuple(_close_term(a, term_env) for a in t.args))


def eval_dist(
    dt: DistTerm,
    dist_env: Mapping[DistVar, FiniteDistribution] | None = None,
    term_env: Mapping[Var, Term] | None = None,
) -> FiniteDistribution:
    """Evaluate a distribution expression to a finite distribution.

    ``dist_env`` supplies distribution-variable bindings, ``term_env`` closes
    the terms under point masses.  Raises UnboundVariable when something is
    left open.
    """
    dist_env = dist_env or {}
    term_env = term_env or {}

    def go(d: DistTerm) -> FiniteDistribution:
        if isinstance(d, DistVar):
            try:
                return dist_env[d]
            except KeyError:
                raise UnboundVariable(f"unbound distribution variable {d.name}") from None
        if isinstance(d, Dirac):
            t = _close_term(d.term, term_env)
            from .terms import is_closed_term

            if not is_closed_term(t):
                raise UnboundVariable(f"point mass on open term after closing: {t}")
            return dirac(t)
        return weighted_sum(
            (p.weight, push_product(p.context, tuple(go(a) for a in p.args)))
            for p in d.parts
        )

    return go(dt)
