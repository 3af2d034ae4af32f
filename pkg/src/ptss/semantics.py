"""Model-level semantics: transition relations, rule instantiation, models.

The instantiation engine enumerates proper closed instantiations of a rule
over a bounded universe of closed terms.  Distribution variables are bound
semantically, straight to finite distributions, so a closed instantiation is
a pair of environments rather than a syntactic substitution.  Premise
families are instantiated by choosing a finite image set: when the family is
measured by a quantitative premise the image ranges over nonempty subsets of
that expression's support (properness forces this), otherwise over a small
capped subset of the universe.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence

from .dist import (
    DistTerm,
    FiniteDistribution,
    UnboundVariable,
    dirac,
    dist_vars_of,
    eval_dist,
)
from .rules import (
    FamilyPremise,
    NegativeLit,
    PTSS,
    PositiveLit,
    QuantLit,
    Rule,
    SetRef,
    compare,
    literal_dist_vars,
    literal_term_vars,
    materialize_member,
    rule_term_vars,
)
from .terms import (
    App,
    DistVar,
    Signature,
    Term,
    Var,
    closed_terms,
    is_closed_term,
    member_var,
    split_indexed,
    split_member,
    term_key,
)

# -- transitions ---------------------------------------------------------------


@dataclass(frozen=True)
class Transition:
    source: Term
    label: str
    dist: FiniteDistribution

    def key(self):
        return (term_key(self.source), self.label, self.dist.key())


class TransitionRelation:
    """Immutable set of transitions, indexed by source and label."""

    def __init__(self, transitions: Iterable[Transition] = ()) -> None:
        self._set = frozenset(transitions)
        index: dict[tuple[Term, str], list[FiniteDistribution]] = {}
        for tr in sorted(self._set, key=Transition.key):
            index.setdefault((tr.source, tr.label), []).append(tr.dist)
        self._index = index

    def __contains__(self, tr: Transition) -> bool:
        return tr in self._set

    def __len__(self) -> int:
        return len(self._set)

    def __iter__(self) -> Iterator[Transition]:
        return iter(sorted(self._set, key=Transition.key))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, TransitionRelation) and self._set == other._set

    def __hash__(self) -> int:
        return hash(self._set)

    def dists(self, source: Term, label: str) -> tuple[FiniteDistribution, ...]:
        return tuple(self._index.get((source, label), ()))

    def enables(self, source: Term, label: str) -> bool:
        return (source, label) in self._index

    def with_label(self, label: str) -> tuple[Transition, ...]:
        return tuple(t for t in self if t.label == label)

    def sources(self) -> tuple[Term, ...]:
        seen: dict[Term, None] = {}
        for t in self:
            seen.setdefault(t.source, None)
        return tuple(seen)

    def union(self, other: "TransitionRelation | Iterable[Transition]") -> "TransitionRelation":
        extra = other._set if isinstance(other, TransitionRelation) else frozenset(other)
        return TransitionRelation(self._set | extra)

    @property
    def transitions(self) -> frozenset[Transition]:
        return self._set


EMPTY_RELATION = TransitionRelation()


# -- universes -----------------------------------------------------------------


@dataclass(frozen=True)
class UniverseSpec:
    init: tuple[Term, ...] = ()
    depth: int = 1


def build_universe(
    sig: Signature, spec: UniverseSpec | None = None, depth: int | None = None
) -> tuple[Term, ...]:
    """Closed terms of bounded height, plus any declared seed terms."""
    if spec is None:
        spec = UniverseSpec()
    d = spec.depth if depth is None else depth
    terms = list(closed_terms(sig, d))
    for t in spec.init:
        if t not in terms:
            terms.append(t)
    terms.sort(key=term_key)
    return tuple(terms)


# -- closed literals and satisfaction --------------------------------------------


def eval_closed_quant(q: QuantLit) -> bool:
    """Truth of a closed quantitative literal; independent of any relation."""
    if isinstance(q.witnesses, SetRef):
        raise ValueError("quantitative literal over an index set is not closed")
    pi = eval_dist(q.dist)
    for w in q.witnesses:
        if not is_closed_term(w):
            raise ValueError("witness term is open")
    return compare(q.cmp, pi.mass(q.witnesses), q.bound)


def is_closed_literal(lit) -> bool:
    if isinstance(lit, PositiveLit):
        return not literal_term_vars(lit) and not literal_dist_vars(lit)
    if isinstance(lit, NegativeLit):
        return is_closed_term(lit.source)
    if isinstance(lit, QuantLit):
        return (
            not isinstance(lit.witnesses, SetRef)
            and not literal_term_vars(lit)
            and not literal_dist_vars(lit)
        )
    return False


def holds(rel: TransitionRelation, lit) -> bool:
    """Satisfaction of a closed literal.

    Quantitative literals are judged by exact rational comparison and do not
    consult the relation at all.
    """
    if isinstance(lit, PositiveLit):
        pi = eval_dist(lit.target)
        return pi in rel.dists(lit.source, lit.label)
    if isinstance(lit, NegativeLit):
        return not rel.enables(lit.source, lit.label)
    if isinstance(lit, QuantLit):
        return eval_closed_quant(lit)
    raise TypeError(f"not a literal: {lit!r}")


# -- instantiation engine ---------------------------------------------------------


@dataclass
class Instance:
    """One proper closed instantiation of a rule."""

    rule: Rule
    terms: dict[Var, Term]
    dists: dict[DistVar, FiniteDistribution]
    images: dict[str, tuple[Term, ...]]
    positives: tuple[Transition, ...]
    negatives: tuple[tuple[Term, str], ...]
    conclusion: Transition


@dataclass
class EngineConfig:
    max_ungoverned_image: int = 2
    work_budget: int | None = None


class EngineWarnings:
    def __init__(self) -> None:
        self.universe_too_small: list[Term] = []
        self.unanchored = False

    def merge(self, other: "EngineWarnings") -> None:
        self.universe_too_small.extend(other.universe_too_small)
        self.unanchored = self.unanchored or other.unanchored


def match_term(pattern: Term, subject: Term, env: dict[Var, Term]) -> dict[Var, Term] | None:
    """One-way matching of an open pattern against a closed subject."""
    if isinstance(pattern, Var):
        bound = env.get(pattern)
        if bound is None:
            out = dict(env)
            out[pattern] = subject
            return out
        return env if bound == subject else None
    if isinstance(subject, Var):
        return None
    if pattern.func != subject.func or len(pattern.args) != len(subject.args):
        return None
    for pa, sa in zip(pattern.args, subject.args):
        nxt = match_term(pa, sa, env)
        if nxt is None:
            return None
        env = nxt
    return env


def _close(t: Term, env: Mapping[Var, Term]) -> Term:
    if isinstance(t, Var):
        return env.get(t, t)
    if not t.args:
        return t
    return App(t.func, tuple(_close(a, env) for a in t.args))


def _subsets(items: Sequence[Term], max_size: int | None = None) -> Iterator[tuple[Term, ...]]:
    """Nonempty subsets, smallest first, deterministic."""
    top = len(items) if max_size is None else min(len(items), max_size)
    for k in range(1, top + 1):
        yield from itertools.combinations(items, k)


class _Search:
    """Backtracking enumeration of proper instantiations of one rule."""

    def __init__(
        self,
        rule: Rule,
        universe: Sequence[Term],
        pool: Sequence[FiniteDistribution],
        pos: TransitionRelation | None,
        neg: TransitionRelation | None,
        conclusion: Transition | None,
        config: EngineConfig,
        warnings: EngineWarnings,
    ) -> None:
        self.rule = rule
        self.universe = list(universe)
        self.pool = list(pool)
        self.pos = pos
        self.neg = neg
        self.want = conclusion
        self.config = config
        self.warnings = warnings
        self.plain_pos = [p for p in rule.pprem if isinstance(p, PositiveLit)]
        self.fam_pos = [p for p in rule.pprem if isinstance(p, FamilyPremise)]
        self.plain_neg = [p for p in rule.nprem if isinstance(p, NegativeLit)]
        self.fam_neg = [p for p in rule.nprem if isinstance(p, FamilyPremise)]
        self.governors: dict[str, list[QuantLit]] = {}
        for q in rule.qprem:
            if isinstance(q.witnesses, SetRef):
                self.governors.setdefault(q.witnesses.name, []).append(q)
        self.families = sorted(rule.families())
        self.distinguished = {f: self._distinguished_members(f) for f in self.families}
        self._work = 0

    def _tick(self) -> None:
        self._work += 1
        if self.config.work_budget is not None and self._work > self.config.work_budget:
            raise SearchSpaceTooLarge(
                f"instantiating rule {self.rule.name} exceeded the work budget"
            )

    def _distinguished_members(self, fam: str) -> list[int]:
        """Canonical member indices of ``fam`` referenced outside its family."""
        idx: set[int] = set()
        for v in rule_term_vars(self.rule):
            parts = split_member(v.name)
            if parts and parts[0] == fam:
                idx.add(parts[1])
        for lit in [self.rule.conclusion, *self.rule.qprem]:
            for dv in literal_dist_vars(lit):
                parts = split_indexed(dv.name)
                if parts:
                    member = split_member(parts[1])
                    if member and member[0] == fam:
                        idx.add(member[1])
        return sorted(idx)

    # -- stage 1: conclusion matching and plain positives -------------------------

    def run(self) -> Iterator[Instance]:
        env_t: dict[Var, Term] = {}
        env_d: dict[DistVar, FiniteDistribution] = {}
        if self.want is not None:
            if self.rule.conclusion.label != self.want.label:
                return
            m = match_term(self.rule.conclusion.source, self.want.source, env_t)
            if m is None:
                return
            env_t = m
            tgt = self.rule.conclusion.target
            if isinstance(tgt, DistVar):
                env_d = {tgt: self.want.dist}
        yield from self._positives(0, env_t, env_d, [], [])

    def _positives(self, i: int, env_t, env_d, pos_acc, defer) -> Iterator[Instance]:
        if i == len(self.plain_pos):
            yield from self._families(0, env_t, env_d, {}, pos_acc, [], defer)
            return
        prem = self.plain_pos[i]
        src = _close(prem.source, env_t)
        for cand_src, pi in self._candidates(src, prem.label, env_t):
            self._tick()
            if is_closed_term(src):
                m = env_t if src == cand_src else None
            else:
                m = match_term(src, cand_src, env_t)
            if m is None:
                continue
            for e_d, d2 in self._bind_target(prem.target, pi, m, env_d, defer):
                tr = Transition(cand_src, prem.label, pi)
                yield from self._positives(i + 1, m, e_d, pos_acc + [tr], d2)

    def _candidates(self, src: Term, label: str, env_t) -> Iterator[tuple[Term, FiniteDistribution]]:
        """Pairs (closed source, distribution) a positive premise may use."""
        if self.pos is not None:
            if is_closed_term(src):
                for pi in self.pos.dists(src, label):
                    yield src, pi
            else:
                for tr in self.pos.with_label(label):
                    yield tr.source, tr.dist
            return
        self.warnings.unanchored = True
        if is_closed_term(src):
            sources = [src]
        else:
            sources = [u for u in self.universe if match_term(src, u, dict(env_t)) is not None]
        for s in sources:
            for pi in self.pool:
                yield s, pi

    def _bind_target(self, target: DistTerm, pi, env_t, env_d, defer):
        """Ways to reconcile a premise target with a concrete distribution."""
        if isinstance(target, DistVar):
            bound = env_d.get(target)
            if bound is None:
                out = dict(env_d)
                out[target] = pi
                yield out, defer
            elif bound == pi:
                yield env_d, defer
            return
        try:
            val = eval_dist(target, env_d, env_t)
        except UnboundVariable:
            yield env_d, defer + [(target, pi)]
            return
        if val == pi:
            yield env_d, defer

    # -- stage 2: families ----------------------------------------------------

    def _families(self, fi: int, env_t, env_d, images, pos_acc, neg_acc, defer) -> Iterator[Instance]:
        if fi == len(self.families):
            yield from self._finalize(env_t, env_d, images, pos_acc, neg_acc, defer)
            return
        order = self._family_order(env_d, env_t, images)
        fam = order[fi]
        govs = self.governors.get(fam, [])
        base = self._image_base(fam, govs, env_t, env_d)
        if base is None:
            return
        max_size = None if govs else self.config.max_ungoverned_image
        mpos = [p for p in self.fam_pos if any(f == fam for _, f in p.binders)]
        mneg = [p for p in self.fam_neg if any(f == fam for _, f in p.binders)]
        for image in _subsets(base, max_size):
            self._tick()
            ok = True
            for q in govs:
                pi = eval_dist(q.dist, env_d, env_t)
                if any(pi.prob(w) == 0 for w in image):
                    ok = False
                    break
                if not compare(q.cmp, pi.mass(image), q.bound):
                    ok = False
                    break
            if not ok:
                continue
            imgs2 = dict(images)
            imgs2[fam] = image
            yield from self._members(
                fam, image, mpos, mneg, fi, env_t, env_d, imgs2, pos_acc, neg_acc, defer
            )

    def _family_order(self, env_d, env_t, images) -> list[str]:
        """Process families whose governors are already evaluable first."""
        done = [f for f in self.families if f in images]
        rest = [f for f in self.families if f not in images]

        def ready(f: str) -> int:
            for q in self.governors.get(f, []):
                try:
                    eval_dist(q.dist, env_d, env_t)
                except UnboundVariable:
                    return 1
            return 0

        rest.sort(key=lambda f: (ready(f), f))
        return done + rest

    def _image_base(self, fam, govs, env_t, env_d) -> list[Term] | None:
        if govs:
            supports: list[set[Term]] = []
            for q in govs:
                try:
                    pi = eval_dist(q.dist, env_d, env_t)
                except UnboundVariable:
                    return None
                supports.append(set(pi.support))
            return sorted(set.intersection(*supports), key=term_key)
        return list(self.universe)

    def _members(
        self, fam, image, mpos, mneg, fi, env_t, env_d, images, pos_acc, neg_acc, defer
    ) -> Iterator[Instance]:
        """Satisfy member literals: distinguished members get free images in
        the image set, coverage members pin each image element."""
        distinguished = self.distinguished.get(fam, [])
        offset = max(distinguished) + 1 if distinguished else 0
        jobs: list[tuple[int, Term | None]] = [(j, None) for j in distinguished]
        jobs += [(offset + k, t) for k, t in enumerate(image)]

        def do_jobs(ji, env_t, env_d, pacc, nacc, defer) -> Iterator[Instance]:
            if ji == len(jobs):
                yield from self._families(fi + 1, env_t, env_d, images, pacc, nacc, defer)
                return
            midx, pinned = jobs[ji]
            mv = member_var(fam, midx)
            if pinned is not None:
                choices = [pinned]
            elif mv in env_t:
                choices = [env_t[mv]] if env_t[mv] in image else []
            else:
                choices = list(image)
            exhaustive = pinned is None  # distinguished choices are referenced elsewhere
            for t in choices:
                self._tick()
                e_t = dict(env_t)
                e_t[mv] = t
                yield from do_lits(ji, 0, midx, exhaustive, e_t, env_d, pacc, nacc, defer)

        def do_lits(ji, li, midx, exhaustive, env_t, env_d, pacc, nacc, defer) -> Iterator[Instance]:
            if li == len(mpos) + len(mneg):
                yield from do_jobs(ji + 1, env_t, env_d, pacc, nacc, defer)
                return
            if li < len(mpos):
                lit = materialize_member(mpos[li], midx)
                src = _close(lit.source, env_t)
                produced = False
                for cand_src, pi in self._candidates(src, lit.label, env_t):
                    if is_closed_term(src):
                        m = env_t if src == cand_src else None
                    else:
                        m = match_term(src, cand_src, env_t)
                    if m is None:
                        continue
                    for e_d, d2 in self._bind_target(lit.target, pi, m, env_d, defer):
                        produced = True
                        tr = Transition(cand_src, lit.label, pi)
                        yield from do_lits(ji, li + 1, midx, exhaustive, m, e_d, pacc + [tr], nacc, d2)
                    if produced and not exhaustive:
                        break  # witness existence suffices for coverage members
                return
            lit = materialize_member(mneg[li - len(mpos)], midx)
            src = _close(lit.source, env_t)
            if not is_closed_term(src):
                return
            yield from do_lits(ji, li + 1, midx, exhaustive, env_t, env_d, pacc, nacc + [(src, lit.label)], defer)

        yield from do_jobs(0, dict(env_t), env_d, pos_acc, neg_acc, defer)

    # -- stage 3: leftovers and final checks ----------------------------------

    def _finalize(self, env_t, env_d, images, pos_acc, neg_acc, defer) -> Iterator[Instance]:
        needed_t = set(literal_term_vars(self.rule.conclusion))
        for p in self.plain_neg:
            needed_t |= literal_term_vars(p)
        for q in self.rule.qprem:
            needed_t |= literal_term_vars(q)
        for tgt, _ in defer:
            from .dist import dist_term_vars_of

            needed_t |= dist_term_vars_of(tgt)
        unbound_t = sorted(
            (v for v in needed_t if v not in env_t and split_member(v.name) is None),
            key=lambda v: v.name,
        )
        needed_d = set(literal_dist_vars(self.rule.conclusion))
        for q in self.rule.qprem:
            needed_d |= literal_dist_vars(q)
        for tgt, _ in defer:
            needed_d |= dist_vars_of(tgt)
        unbound_d = sorted((d for d in needed_d if d not in env_d), key=lambda d: d.name)
        if unbound_d:
            self.warnings.unanchored = True

        for t_assign in itertools.product(self.universe, repeat=len(unbound_t)):
            e_t = dict(env_t)
            e_t.update(zip(unbound_t, t_assign))
            for d_assign in itertools.product(self.pool, repeat=len(unbound_d)):
                self._tick()
                e_d = dict(env_d)
                e_d.update(zip(unbound_d, d_assign))
                inst = self._check(e_t, e_d, images, pos_acc, neg_acc, defer)
                if inst is not None:
                    yield inst

    def _check(self, env_t, env_d, images, pos_acc, neg_acc, defer) -> Instance | None:
        for tgt, pi in defer:
            try:
                if eval_dist(tgt, env_d, env_t) != pi:
                    return None
            except UnboundVariable:
                return None
        negs = list(neg_acc)
        for p in self.plain_neg:
            src = _close(p.source, env_t)
            if not is_closed_term(src):
                return None
            negs.append((src, p.label))
        if self.neg is not None:
            for src, label in negs:
                if self.neg.enables(src, label):
                    return None
        for q in self.rule.qprem:
            try:
                pi = eval_dist(q.dist, env_d, env_t)
            except UnboundVariable:
                return None
            if isinstance(q.witnesses, SetRef):
                image = images.get(q.witnesses.name)
                if image is None:
                    return None
                wset = list(image)
            else:
                wset = [_close(w, env_t) for w in q.witnesses]
                if any(not is_closed_term(w) for w in wset):
                    return None
            if any(pi.prob(w) == 0 for w in wset):
                return None  # properness
            if not compare(q.cmp, pi.mass(wset), q.bound):
                return None
        src = _close(self.rule.conclusion.source, env_t)
        if not is_closed_term(src):
            return None
        try:
            cpi = eval_dist(self.rule.conclusion.target, env_d, env_t)
        except UnboundVariable:
            return None
        concl = Transition(src, self.rule.conclusion.label, cpi)
        if self.want is not None and concl != self.want:
            return None
        return Instance(
            rule=self.rule,
            terms=dict(env_t),
            dists=dict(env_d),
            images={k: tuple(v) for k, v in images.items()},
            positives=tuple(pos_acc),
            negatives=tuple(negs),
            conclusion=concl,
        )


def rule_instances(
    rule: Rule,
    universe: Sequence[Term],
    pool: Sequence[FiniteDistribution],
    pos: TransitionRelation | None,
    neg: TransitionRelation | None,
    conclusion: Transition | None = None,
    config: EngineConfig | None = None,
    warnings: EngineWarnings | None = None,
) -> Iterator[Instance]:
    """Proper closed instantiations of ``rule``.

    ``pos`` supplies the transitions positive premises may use (None means
    unconstrained: sources and pool distributions are enumerated).  ``neg``
    is the relation negative premises are checked against (None skips the
    check and merely records the demands).  With ``conclusion`` given, only
    instances concluding exactly that transition are produced.
    """
    search = _Search(
        rule, universe, pool, pos, neg, conclusion,
        config or EngineConfig(), warnings or EngineWarnings(),
    )
    yield from search.run()


# -- candidate distributions -------------------------------------------------------


def candidate_distributions(
    ptss: PTSS,
    universe: Sequence[Term],
    rounds: int = 3,
    cap: int = 64,
) -> tuple[FiniteDistribution, ...]:
    """Bounded pool of distributions that can label transitions.

    Point masses on the universe seed the pool; conclusion targets evaluated
    over the pool extend it until a fixpoint or the round/size cap.
    """
    pool: dict[FiniteDistribution, None] = {dirac(t): None for t in universe}
    for _ in range(rounds):
        added = False
        snapshot = list(pool)
        for rule in ptss.rules:
            tgt = rule.conclusion.target
            tvars = sorted(
                (v for v in literal_term_vars(rule.conclusion) if split_member(v.name) is None),
                key=lambda v: v.name,
            )
            dvars = sorted(dist_vars_of(tgt), key=lambda d: d.name)
            for t_assign in itertools.product(universe, repeat=len(tvars)):
                env_t = dict(zip(tvars, t_assign))
                for d_assign in itertools.product(snapshot, repeat=len(dvars)):
                    env_d = dict(zip(dvars, d_assign))
                    try:
                        pi = eval_dist(tgt, env_d, env_t)
                    except UnboundVariable:
                        continue
                    if pi not in pool:
                        pool[pi] = None
                        added = True
                    if len(pool) >= cap:
                        return tuple(sorted(pool, key=lambda d: d.key()))
        if not added:
            break
    return tuple(sorted(pool, key=lambda d: d.key()))


# -- stratifications ---------------------------------------------------------------


@dataclass(frozen=True)
class StratPattern:
    source: Term
    label: str | None  # None matches any label
    stratum: int


@dataclass(frozen=True)
class Stratification:
    """Pattern-based measure on closed positive literals.

    First matching pattern wins; the measure ignores the target distribution,
    which keeps the negative-premise condition decidable.
    """

    patterns: tuple[StratPattern, ...] = ()
    default: int = 0
    strict: bool = False

    def stratum(self, source: Term, label: str) -> int:
        for p in self.patterns:
            if p.label is not None and p.label != label:
                continue
            if match_term(p.source, source, {}) is not None:
                return p.stratum
        return self.default

    def values(self) -> tuple[int, ...]:
        return tuple(sorted({p.stratum for p in self.patterns} | {self.default}))


@dataclass(frozen=True)
class StratViolation:
    rule: str
    kind: str  # "positive" or "negative"
    premise_source: Term
    premise_label: str
    premise_stratum: int
    conclusion_source: Term
    conclusion_label: str
    conclusion_stratum: int


def check_stratification(
    ptss: PTSS,
    strat: Stratification,
    universe: Sequence[Term],
) -> list[StratViolation]:
    """All violations of the stratification conditions over the universe.

    Instantiations are over-approximated: every assignment of universe terms
    to the rule's term variables and binders is considered, without the
    properness filter.  A clean result is therefore conclusive; violations on
    quantitatively constrained rules may name improper instantiations.
    """
    out: list[StratViolation] = []
    strict = strat.strict
    for rule in ptss.rules:
        prem_templates: list[tuple[str, Term, str]] = []
        for p in rule.pprem:
            lit = p.literal if isinstance(p, FamilyPremise) else p
            prem_templates.append(("positive", lit.source, lit.label))
        for p in rule.nprem:
            lit = p.literal if isinstance(p, FamilyPremise) else p
            prem_templates.append(("negative", lit.source, lit.label))
        tvars = sorted(
            {v for v in rule_term_vars(rule) if split_member(v.name) is None},
            key=lambda v: v.name,
        )
        for assign in itertools.product(universe, repeat=len(tvars)):
            env = dict(zip(tvars, assign))
            csrc = _close(rule.conclusion.source, env)
            if not is_closed_term(csrc):
                continue
            cs = strat.stratum(csrc, rule.conclusion.label)
            for kind, src_t, label in prem_templates:
                src = _close(src_t, env)
                candidates = [src] if is_closed_term(src) else [
                    u for u in universe if match_term(src, u, dict(env)) is not None
                ]
                for s in candidates:
                    ps = strat.stratum(s, label)
                    bad = (
                        ps >= cs if kind == "negative"
                        else (ps > cs if not strict else ps >= cs)
                    )
                    if bad:
                        out.append(StratViolation(
                            rule.name, kind, s, label, ps, csrc, rule.conclusion.label, cs
                        ))
    return _dedup_violations(out)


def _dedup_violations(vs: list[StratViolation]) -> list[StratViolation]:
    seen = set()
    out = []
    for v in vs:
        k = (v.rule, v.kind, term_key(v.premise_source), v.premise_label,
             term_key(v.conclusion_source), v.conclusion_label)
        if k not in seen:
            seen.add(k)
            out.append(v)
    return out


# -- stratified model ---------------------------------------------------------------


@dataclass
class StratifiedTrace:
    per_stratum: list[tuple[int, tuple[Transition, ...]]]
    warnings: EngineWarnings


def build_stratified_model(
    ptss: PTSS,
    strat: Stratification,
    universe: Sequence[Term],
    pool: Sequence[FiniteDistribution] | None = None,
    config: EngineConfig | None = None,
) -> tuple[TransitionRelation, StratifiedTrace]:
    """Least model built stratum by stratum.

    Within a stratum, positive premises may use transitions of lower strata
    and the part of the current stratum derived so far; negative premises are
    judged against lower strata only.  Iteration runs to a fixpoint.
    """
    if pool is None:
        pool = candidate_distributions(ptss, universe)
    warnings = EngineWarnings()
    config = config or EngineConfig()
    lower = EMPTY_RELATION
    trace: list[tuple[int, tuple[Transition, ...]]] = []
    for level in strat.values():
        current: set[Transition] = set()
        while True:
            effective = lower.union(current)
            new: set[Transition] = set()
            for rule in ptss.rules:
                for inst in rule_instances(
                    rule, universe, pool, pos=effective, neg=lower,
                    config=config, warnings=warnings,
                ):
                    c = inst.conclusion
                    if strat.stratum(c.source, c.label) != level:
                        continue
                    if c.source not in universe:
                        warnings.universe_too_small.append(c.source)
                        continue
                    if c not in current:
                        new.add(c)
            if not new:
                break
            current |= new
        trace.append((level, tuple(sorted(current, key=Transition.key))))
        lower = lower.union(current)
    return lower, StratifiedTrace(trace, warnings)


# -- supported models -----------------------------------------------------------------


@dataclass
class SupportReport:
    is_model: bool
    is_supported: bool
    missing_conclusions: tuple[Transition, ...]
    unsupported: tuple[Transition, ...]
    warnings: EngineWarnings

    @property
    def is_supported_model(self) -> bool:
        return self.is_model and self.is_supported


def check_supported_model(
    ptss: PTSS,
    rel: TransitionRelation,
    universe: Sequence[Term],
    pool: Sequence[FiniteDistribution] | None = None,
    config: EngineConfig | None = None,
) -> SupportReport:
    """Is ``rel`` a model, and is every transition in it rule-supported?"""
    if pool is None:
        pool = candidate_distributions(ptss, universe)
        pool = tuple(sorted(set(pool) | {t.dist for t in rel}, key=lambda d: d.key()))
    warnings = EngineWarnings()
    config = config or EngineConfig()
    missing: set[Transition] = set()
    for rule in ptss.rules:
        for inst in rule_instances(
            rule, universe, pool, pos=rel, neg=rel, config=config, warnings=warnings
        ):
            c = inst.conclusion
            if c in rel:
                continue
            if c.source not in universe:
                warnings.universe_too_small.append(c.source)
                continue
            missing.add(c)
    unsupported: set[Transition] = set()
    for tr in rel:
        found = False
        for rule in ptss.rules:
            for _ in rule_instances(
                rule, universe, pool, pos=rel, neg=rel, conclusion=tr,
                config=config, warnings=warnings,
            ):
                found = True
                break
            if found:
                break
        if not found:
            unsupported.add(tr)
    return SupportReport(
        is_model=not missing,
        is_supported=not unsupported,
        missing_conclusions=tuple(sorted(missing, key=Transition.key)),
        unsupported=tuple(sorted(unsupported, key=Transition.key)),
        warnings=warnings,
    )


class SearchSpaceTooLarge(RuntimeError):
    pass


def candidate_transitions(
    ptss: PTSS,
    universe: Sequence[Term],
    pool: Sequence[FiniteDistribution] | None = None,
) -> tuple[Transition, ...]:
    """Every transition any rule conclusion can instantiate to, in-universe."""
    if pool is None:
        pool = candidate_distributions(ptss, universe)
    out: dict[Transition, None] = {}
    for rule in ptss.rules:
        concl = rule.conclusion
        tvars = sorted(
            {v for v in literal_term_vars(concl) if split_member(v.name) is None},
            key=lambda v: v.name,
        )
        dvars = sorted(literal_dist_vars(concl), key=lambda d: d.name)
        for t_assign in itertools.product(universe, repeat=len(tvars)):
            env_t = dict(zip(tvars, t_assign))
            src = _close(concl.source, env_t)
            if not is_closed_term(src) or src not in universe:
                continue
            for d_assign in itertools.product(pool, repeat=len(dvars)):
                env_d = dict(zip(dvars, d_assign))
                try:
                    pi = eval_dist(concl.target, env_d, env_t)
                except UnboundVariable:
                    continue
                out.setdefault(Transition(src, concl.label, pi), None)
    return tuple(sorted(out, key=Transition.key))


def supported_models(
    ptss: PTSS,
    universe: Sequence[Term],
    pool: Sequence[FiniteDistribution] | None = None,
    max_candidates: int = 16,
    config: EngineConfig | None = None,
) -> list[TransitionRelation]:
    """Exhaustive search for supported models over the candidate transitions.

    Raises SearchSpaceTooLarge when more than ``max_candidates`` candidate
    transitions would make the subset search intractable.
    """
    if pool is None:
        pool = candidate_distributions(ptss, universe)
    cands = candidate_transitions(ptss, universe, pool)
    if len(cands) > max_candidates:
        raise SearchSpaceTooLarge(
            f"{len(cands)} candidate transitions exceed the limit of {max_candidates}"
        )
    models: list[TransitionRelation] = []
    for k in range(len(cands) + 1):
        for combo in itertools.combinations(cands, k):
            rel = TransitionRelation(combo)
            report = check_supported_model(ptss, rel, universe, pool, config)
            if report.is_supported_model:
                models.append(rel)
    return models
