"""Rule syntax: literals, premise families, rules and whole rule systems.

A premise family ``forall y in Y: ...`` stands for one premise per member of
the index set ``Y``; the binder variable is the generic member and target
distribution variables written ``mu[y]`` stand for one fresh variable per
member.  Binding the binder through a substitution collapses the family to a
single concrete literal, which is how whole-family matching is expressed.
Materialising a finite image set instead produces one literal per canonical
member ``Y[i]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .dist import (
    Convex,
    ConvexPart,
    Dirac,
    DistTerm,
    context_key,
    dist_term_vars_of,
    dist_vars_of,
)
from .subst import Substitution
from .terms import (
    App,
    DistVar,
    FreshNames,
    Signature,
    Term,
    Var,
    indexed_dist_var,
    member_var,
    split_indexed,
    split_member,
    term_key,
    term_vars,
)

COMPARISONS = (">", ">=", "<", "<=")


@dataclass(frozen=True)
class PositiveLit:
    source: Term
    label: str
    target: DistTerm


@dataclass(frozen=True)
class NegativeLit:
    source: Term
    label: str


@dataclass(frozen=True)
class SetRef:
    """Reference to a declared family of indexing variables."""

    name: str


@dataclass(frozen=True)
class QuantLit:
    """Mass constraint: the expression's mass on the witness set vs a bound."""

    dist: DistTerm
    witnesses: SetRef | tuple[Term, ...]
    cmp: str
    bound: Fraction

    def __post_init__(self) -> None:
        if self.cmp not in COMPARISONS:
            raise ValueError(f"unknown comparison {self.cmp!r}")
        if not isinstance(self.bound, Fraction):
            raise TypeError("bounds must be exact Fractions")
        if not (0 <= self.bound <= 1):
            raise ValueError(f"bound out of [0,1]: {self.bound}")


Literal = PositiveLit | NegativeLit | QuantLit


def compare(cmp: str, lhs: Fraction, rhs: Fraction) -> bool:
    if cmp == ">":
        return lhs > rhs
    if cmp == ">=":
        return lhs >= rhs
    if cmp == "<":
        return lhs < rhs
    if cmp == "<=":
        return lhs <= rhs
    raise ValueError(cmp)


@dataclass(frozen=True)
class FamilyPremise:
    """A premise per member of one or more index sets, diagonally synchronised."""

    binders: tuple[tuple[Var, str], ...]
    literal: PositiveLit | NegativeLit

    def __post_init__(self) -> None:
        if not self.binders:
            raise ValueError("family premise needs at least one binder")
        names = [b.name for b, _ in self.binders]
        if len(names) != len(set(names)):
            raise ValueError("duplicate binder")

    @property
    def is_positive(self) -> bool:
        return isinstance(self.literal, PositiveLit)

    def indexed_bases(self) -> set[str]:
        """Distribution-variable bases indexed by one of the binders."""
        binder_names = {b.name for b, _ in self.binders}
        out = set()
        if isinstance(self.literal, PositiveLit):
            for dv in dist_vars_of(self.literal.target):
                parts = split_indexed(dv.name)
                if parts and parts[1] in binder_names:
                    out.add(parts[0])
        return out


Premise = PositiveLit | NegativeLit | QuantLit | FamilyPremise


@dataclass(frozen=True)
class Rule:
    name: str
    pprem: tuple[PositiveLit | FamilyPremise, ...]
    nprem: tuple[NegativeLit | FamilyPremise, ...]
    qprem: tuple[QuantLit, ...]
    conclusion: PositiveLit

    def __post_init__(self) -> None:
        for p in self.pprem:
            ok = isinstance(p, PositiveLit) or (isinstance(p, FamilyPremise) and p.is_positive)
            if not ok:
                raise ValueError("positive premise slot holds a non-positive literal")
        for p in self.nprem:
            ok = isinstance(p, NegativeLit) or (isinstance(p, FamilyPremise) and not p.is_positive)
            if not ok:
                raise ValueError("negative premise slot holds a non-negative literal")

    def premises(self) -> tuple[Premise, ...]:
        return self.pprem + self.nprem + self.qprem

    def families(self) -> set[str]:
        """Index sets the rule quantifies or measures over."""
        out: set[str] = set()
        for p in self.pprem + self.nprem:
            if isinstance(p, FamilyPremise):
                out |= {fam for _, fam in p.binders}
        for q in self.qprem:
            if isinstance(q.witnesses, SetRef):
                out.add(q.witnesses.name)
        return out

    def binders_of(self, family: str) -> tuple[Var, ...]:
        out: list[Var] = []
        for p in self.pprem + self.nprem:
            if isinstance(p, FamilyPremise):
                out.extend(b for b, fam in p.binders if fam == family)
        return tuple(out)


@dataclass(frozen=True)
class PTSS:
    """A signature together with its transition rules."""

    signature: Signature
    rules: tuple[Rule, ...]
    families: frozenset[str] = frozenset()
    varsets: tuple[tuple[str, tuple[Term, ...]], ...] = ()

    def __post_init__(self) -> None:
        names = [r.name for r in self.rules]
        if len(names) != len(set(names)):
            raise ValueError("duplicate rule name")

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    def varset(self, name: str) -> tuple[Term, ...] | None:
        for n, vs in self.varsets:
            if n == name:
                return vs
        return None


# -- variable inventory -------------------------------------------------------


def literal_term_vars(lit: Literal) -> set[Var]:
    if isinstance(lit, PositiveLit):
        return term_vars(lit.source) | dist_term_vars_of(lit.target)
    if isinstance(lit, NegativeLit):
        return term_vars(lit.source)
    out = dist_term_vars_of(lit.dist)
    if not isinstance(lit.witnesses, SetRef):
        for w in lit.witnesses:
            out |= term_vars(w)
    return out


def literal_dist_vars(lit: Literal) -> set[DistVar]:
    if isinstance(lit, PositiveLit):
        return dist_vars_of(lit.target)
    if isinstance(lit, NegativeLit):
        return set()
    return dist_vars_of(lit.dist)


def premise_term_vars(p: Premise) -> set[Var]:
    if isinstance(p, FamilyPremise):
        return literal_term_vars(p.literal)
    return literal_term_vars(p)


def premise_dist_vars(p: Premise) -> set[DistVar]:
    if isinstance(p, FamilyPremise):
        return literal_dist_vars(p.literal)
    return literal_dist_vars(p)


def rule_term_vars(r: Rule) -> set[Var]:
    out = literal_term_vars(r.conclusion)
    for p in r.premises():
        out |= premise_term_vars(p)
    return out


def rule_dist_vars(r: Rule) -> set[DistVar]:
    out = literal_dist_vars(r.conclusion)
    for p in r.premises():
        out |= premise_dist_vars(p)
    return out


# -- substitution over literals and rules --------------------------------------


def subst_literal(s: Substitution, lit: Literal) -> Literal:
    if isinstance(lit, PositiveLit):
        return PositiveLit(s.apply_term(lit.source), lit.label, s.apply_dist(lit.target))
    if isinstance(lit, NegativeLit):
        return NegativeLit(s.apply_term(lit.source), lit.label)
    wit = lit.witnesses
    if not isinstance(wit, SetRef):
        imgs = []
        for w in wit:
            img = s.apply_term(w)
            if img not in imgs:
                imgs.append(img)
        wit = tuple(imgs)
    return QuantLit(s.apply_dist(lit.dist), wit, lit.cmp, lit.bound)


def subst_premise(s: Substitution, p: Premise, collapsed: dict[str, tuple[Term, ...]]) -> Premise:
    """Apply a substitution to a premise.

    ``collapsed`` maps index-set names to their (whole-set) images when the
    substitution binds the set's binders; a family premise over a collapsed
    set becomes the concrete literal of its image.
    """
    if isinstance(p, FamilyPremise):
        dom_t, _ = s.domain()
        bound = [b for b, _ in p.binders if b in dom_t]
        if not bound:
            return FamilyPremise(p.binders, subst_literal(s, p.literal))  # type: ignore[arg-type]
        if len(bound) != len(p.binders):
            raise ValueError("partial family collapse is not supported")
        return subst_literal(s, p.literal)  # type: ignore[return-value]
    if isinstance(p, QuantLit) and isinstance(p.witnesses, SetRef):
        name = p.witnesses.name
        if name in collapsed:
            return QuantLit(
                s.apply_dist(p.dist), tuple(collapsed[name]), p.cmp, p.bound
            )
        return QuantLit(s.apply_dist(p.dist), p.witnesses, p.cmp, p.bound)
    return subst_literal(s, p)  # type: ignore[return-value]


def collapsed_images(r: Rule, s: Substitution) -> dict[str, tuple[Term, ...]]:
    """Index sets whose binders the substitution closes, with their images."""
    dom_t, _ = s.domain()
    out: dict[str, tuple[Term, ...]] = {}
    for fam in sorted(r.families()):
        binders = r.binders_of(fam)
        if binders and all(b in dom_t for b in binders):
            imgs: list[Term] = []
            for b in binders:
                img = s.apply_term(b)
                if img not in imgs:
                    imgs.append(img)
            out[fam] = tuple(sorted(imgs, key=term_key))
    return out


def subst_rule(s: Substitution, r: Rule) -> Rule:
    collapsed = collapsed_images(r, s)
    pp: list[PositiveLit | FamilyPremise] = []
    np: list[NegativeLit | FamilyPremise] = []
    qp: list[QuantLit] = []
    for p in r.pprem:
        pp.append(subst_premise(s, p, collapsed))  # type: ignore[arg-type]
    for p in r.nprem:
        np.append(subst_premise(s, p, collapsed))  # type: ignore[arg-type]
    for q in r.qprem:
        qp.append(subst_premise(s, q, collapsed))  # type: ignore[arg-type]
    return Rule(r.name, tuple(pp), tuple(np), tuple(qp), subst_literal(s, r.conclusion))  # type: ignore[arg-type]


# -- family materialisation -----------------------------------------------------


def _rewrite_dist_vars(dt: DistTerm, ren: dict[DistVar, DistVar]) -> DistTerm:
    if isinstance(dt, DistVar):
        return ren.get(dt, dt)
    if isinstance(dt, Dirac):
        return dt
    return Convex(tuple(
        ConvexPart(p.weight, p.context, tuple(_rewrite_dist_vars(a, ren) for a in p.args))
        for p in dt.parts
    ))


def materialize_member(p: FamilyPremise, index: int) -> PositiveLit | NegativeLit:
    """The premise instance for canonical member ``index`` of each binder's set."""
    tm = {b: member_var(fam, index) for b, fam in p.binders}
    s = Substitution.of(term_map=tm)
    lit = subst_literal(s, p.literal)
    if isinstance(lit, PositiveLit):
        ren: dict[DistVar, DistVar] = {}
        for dv in dist_vars_of(lit.target):
            parts = split_indexed(dv.name)
            if parts:
                base, member_part = parts
                for b, fam in p.binders:
                    if member_part == b.name:
                        ren[dv] = indexed_dist_var(base, member_var(fam, index))
        lit = PositiveLit(lit.source, lit.label, _rewrite_dist_vars(lit.target, ren))
    return lit  # type: ignore[return-value]


# -- renaming -------------------------------------------------------------------


def _rename_var(v: Var, term_ren: dict[str, str], fam_ren: dict[str, str]) -> Var:
    parts = split_member(v.name)
    if parts is not None:
        fam, idx = parts
        return member_var(fam_ren.get(fam, fam), idx)
    return Var(term_ren.get(v.name, v.name))


def _rename_dist_var(
    dv: DistVar, term_ren: dict[str, str], dist_ren: dict[str, str], fam_ren: dict[str, str]
) -> DistVar:
    parts = split_indexed(dv.name)
    if parts is not None:
        base, member_part = parts
        new_member = _rename_var(Var(member_part), term_ren, fam_ren)
        return indexed_dist_var(dist_ren.get(base, base), new_member)
    return DistVar(dist_ren.get(dv.name, dv.name))


def rename_rule(
    r: Rule,
    term_ren: dict[str, str],
    dist_ren: dict[str, str],
    fam_ren: dict[str, str],
) -> Rule:
    def on_term(t: Term) -> Term:
        if isinstance(t, Var):
            return _rename_var(t, term_ren, fam_ren)
        if not t.args:
            return t
        return App(t.func, tuple(on_term(a) for a in t.args))

    def on_dist(dt: DistTerm) -> DistTerm:
        if isinstance(dt, DistVar):
            return _rename_dist_var(dt, term_ren, dist_ren, fam_ren)
        if isinstance(dt, Dirac):
            return Dirac(on_term(dt.term))
        return Convex(tuple(
            ConvexPart(p.weight, p.context, tuple(on_dist(a) for a in p.args))
            for p in dt.parts
        ))

    def on_lit(lit: Literal) -> Literal:
        if isinstance(lit, PositiveLit):
            return PositiveLit(on_term(lit.source), lit.label, on_dist(lit.target))
        if isinstance(lit, NegativeLit):
            return NegativeLit(on_term(lit.source), lit.label)
        wit = lit.witnesses
        if isinstance(wit, SetRef):
            wit = SetRef(fam_ren.get(wit.name, wit.name))
        else:
            wit = tuple(on_term(w) for w in wit)
        return QuantLit(on_dist(lit.dist), wit, lit.cmp, lit.bound)

    def on_prem(p: Premise) -> Premise:
        if isinstance(p, FamilyPremise):
            binders = tuple(
                (_rename_var(b, term_ren, fam_ren), fam_ren.get(fam, fam))
                for b, fam in p.binders
            )
            return FamilyPremise(binders, on_lit(p.literal))  # type: ignore[arg-type]
        return on_lit(p)

    return Rule(
        r.name,
        tuple(on_prem(p) for p in r.pprem),  # type: ignore[arg-type]
        tuple(on_prem(p) for p in r.nprem),  # type: ignore[arg-type]
        tuple(on_prem(q) for q in r.qprem),  # type: ignore[arg-type]
        on_lit(r.conclusion),  # type: ignore[arg-type]
    )


def freshen_rule(
    r: Rule,
    namer: FreshNames,
    tag: str | None = None,
    fam_log: dict[str, str] | None = None,
) -> Rule:
    """A copy of ``r`` sharing no variable, base or index-set name with others.

    ``namer`` must be shared across all copies that need to stay disjoint.
    ``fam_log`` collects the index-set renamings as fresh name to old name.
    """
    suffix = tag if tag is not None else ""
    term_ren: dict[str, str] = {}
    for v in sorted(rule_term_vars(r), key=lambda v: v.name):
        if split_member(v.name) is not None:
            continue
        term_ren[v.name] = namer.fresh(v.name + suffix)
    dist_ren: dict[str, str] = {}
    bases: set[str] = set()
    for dv in sorted(rule_dist_vars(r), key=lambda d: d.name):
        parts = split_indexed(dv.name)
        bases.add(parts[0] if parts else dv.name)
    for base in sorted(bases):
        dist_ren[base] = namer.fresh(base + suffix)
    fam_ren: dict[str, str] = {}
    for fam in sorted(r.families()):
        fam_ren[fam] = namer.fresh(fam + suffix)
        if fam_log is not None:
            fam_log[fam_ren[fam]] = fam
    return rename_rule(r, term_ren, dist_ren, fam_ren)


# -- canonical keys (dedup modulo renaming) --------------------------------------


def literal_shape_key(lit: Literal):
    """Renaming-invariant ordering key for literals."""

    def tshape(t: Term):
        if isinstance(t, Var):
            return (0,)
        return (1, t.func, tuple(tshape(a) for a in t.args))

    def dshape(dt: DistTerm):
        if isinstance(dt, DistVar):
            return (0,)
        if isinstance(dt, Dirac):
            return (1, tshape(dt.term))
        return (2, tuple((p.weight, tuple(dshape(a) for a in p.args)) for p in dt.parts))

    if isinstance(lit, PositiveLit):
        return (0, lit.label, tshape(lit.source), dshape(lit.target))
    if isinstance(lit, NegativeLit):
        return (1, lit.label, tshape(lit.source))
    wshape = (0,) if isinstance(lit.witnesses, SetRef) else (1, tuple(tshape(w) for w in lit.witnesses))
    return (2, lit.cmp, lit.bound, dshape(lit.dist), wshape)


def _rule_key_for_order(
    r: Rule,
    pp: Sequence[Premise],
    np: Sequence[Premise],
    qp: Sequence[Premise],
):
    tnum: dict[str, int] = {}
    dnum: dict[str, int] = {}
    fnum: dict[str, int] = {}

    def tn(name: str) -> int:
        return tnum.setdefault(name, len(tnum))

    def dn(name: str) -> int:
        return dnum.setdefault(name, len(dnum))

    def fn(name: str) -> int:
        return fnum.setdefault(name, len(fnum))

    def kt(t: Term):
        if isinstance(t, Var):
            parts = split_member(t.name)
            if parts:
                return (0, fn(parts[0]), parts[1])
            return (1, tn(t.name))
        return (2, t.func, tuple(kt(a) for a in t.args))

    def kd(dt: DistTerm):
        if isinstance(dt, DistVar):
            parts = split_indexed(dt.name)
            if parts:
                return (0, dn(parts[0]), kt(Var(parts[1])))
            return (1, dn(dt.name))
        if isinstance(dt, Dirac):
            return (2, kt(dt.term))
        return (3, tuple(
            (p.weight, context_key(p.context), tuple(kd(a) for a in p.args))
            for p in dt.parts
        ))

    def kl(lit: Literal):
        if isinstance(lit, PositiveLit):
            return (0, lit.label, kt(lit.source), kd(lit.target))
        if isinstance(lit, NegativeLit):
            return (1, lit.label, kt(lit.source))
        wit = lit.witnesses
        wk = (0, fn(wit.name)) if isinstance(wit, SetRef) else (1, tuple(kt(w) for w in wit))
        return (2, lit.cmp, lit.bound, kd(lit.dist), wk)

    def kp(p: Premise):
        if isinstance(p, FamilyPremise):
            return (0, tuple((kt(b), fn(fam)) for b, fam in p.binders), kl(p.literal))
        return (1, kl(p))

    ck = kl(r.conclusion)
    return (ck, tuple(kp(p) for p in pp), tuple(kp(p) for p in np), tuple(kp(q) for q in qp))


def _shape_orders(prems: Sequence[Premise]) -> Iterator[list[Premise]]:
    """All premise orders compatible with the shape sort (ties permuted)."""
    ordered = sorted(prems, key=literal_premise_sort_key)
    groups: list[list[Premise]] = []
    for p in ordered:
        if groups and literal_premise_sort_key(groups[-1][0]) == literal_premise_sort_key(p):
            groups[-1].append(p)
        else:
            groups.append([p])
    for pick in itertools.product(*(itertools.permutations(g) for g in groups)):
        yield [p for g in pick for p in g]


def _tie_combinations(prems: Sequence[Premise]) -> int:
    ordered = sorted(prems, key=literal_premise_sort_key)
    total, run = 1, 1
    for a, b in zip(ordered, ordered[1:]):
        if literal_premise_sort_key(a) == literal_premise_sort_key(b):
            run += 1
        else:
            total *= math.factorial(run)
            run = 1
    return total * math.factorial(run)


_CANON_BUDGET = 20000


def canonical_rule_key(r: Rule):
    """Structural key invariant under consistent renaming.

    Premises sort by shape and variables are numbered in traversal order.  A
    tie between equal-shaped premises is broken by taking the least key over
    their permutations, so the key does not depend on the order in which a
    rule was assembled.  Past a permutation budget ties keep the input order.
    """
    combos = (
        _tie_combinations(r.pprem) * _tie_combinations(r.nprem) * _tie_combinations(r.qprem)
    )
    if combos > _CANON_BUDGET:
        return _rule_key_for_order(
            r,
            sorted(r.pprem, key=literal_premise_sort_key),
            sorted(r.nprem, key=literal_premise_sort_key),
            sorted(r.qprem, key=literal_premise_sort_key),
        )
    return min(
        _rule_key_for_order(r, pp, np, qp)
        for pp in _shape_orders(r.pprem)
        for np in _shape_orders(r.nprem)
        for qp in _shape_orders(r.qprem)
    )


def literal_premise_sort_key(p: Premise):
    if isinstance(p, FamilyPremise):
        return (0, len(p.binders), literal_shape_key(p.literal))
    return (1, literal_shape_key(p))
