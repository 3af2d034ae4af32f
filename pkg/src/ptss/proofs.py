"""Provable rules: proof structures, the recursive closure, and
well-supported proofs of closed literals.

A proof structure stitches variable-disjoint rule copies into a DAG; a
substitution matching all its links turns it into one derived rule.  The
same rule set is obtained bottom-up by resolving rule premises against
previously derived conclusions; both constructions are depth-bounded here
and the test suite checks they enumerate the same rules.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .dist import FiniteDistribution, UnboundVariable, eval_dist
from .rules import (
    FamilyPremise,
    NegativeLit,
    PTSS,
    PositiveLit,
    QuantLit,
    Rule,
    SetRef,
    canonical_rule_key,
    collapsed_images,
    compare,
    freshen_rule,
    literal_dist_vars,
    literal_premise_sort_key,
    literal_term_vars,
    rule_dist_vars,
    rule_term_vars,
    subst_literal,
    subst_premise,
    subst_rule,
)
from .semantics import (
    EngineConfig,
    Transition,
    match_term,
    rule_instances,
)
from .subst import NotUnifiable, Substitution, unify
from .terms import (
    DistVar,
    FreshNames,
    Term,
    Var,
    is_closed_term,
    split_indexed,
    split_member,
    term_key,
    term_vars,
)


class StructureError(ValueError):
    pass


class MatchError(ValueError):
    pass


class InvalidQuantitative(ValueError):
    """A closed quantitative premise instance that does not hold."""


@dataclass(frozen=True)
class Link:
    """The conclusion of rule ``child`` justifies ``pprem[slot]`` of ``parent``."""

    child: int
    parent: int
    slot: int


@dataclass(frozen=True)
class ProofStructure:
    rules: tuple[Rule, ...]
    root: int
    links: tuple[Link, ...]

    def __post_init__(self) -> None:
        n = len(self.rules)
        if not (0 <= self.root < n):
            raise StructureError("root index out of range")
        children = [l.child for l in self.links]
        if len(set(children)) != len(children):
            raise StructureError("a rule is linked to more than one premise")
        if self.root in children:
            raise StructureError("the root cannot justify a premise")
        if set(children) != set(range(n)) - {self.root}:
            raise StructureError("every non-root rule must justify exactly one premise")
        slots = [(l.parent, l.slot) for l in self.links]
        if len(set(slots)) != len(slots):
            raise StructureError("two rules linked to the same premise occurrence")
        for l in self.links:
            if not (0 <= l.parent < n):
                raise StructureError("parent index out of range")
            if not (0 <= l.slot < len(self.rules[l.parent].pprem)):
                raise StructureError("premise slot out of range")
        self._check_acyclic()
        self._check_disjoint()

    def _check_acyclic(self) -> None:
        kids: dict[int, list[int]] = {}
        for l in self.links:
            kids.setdefault(l.parent, []).append(l.child)
        seen: set[int] = set()
        stack = [self.root]
        while stack:
            b = stack.pop()
            if b in seen:
                raise StructureError("cyclic justification chain")
            seen.add(b)
            stack.extend(kids.get(b, []))
        if seen != set(range(len(self.rules))):
            raise StructureError("a rule is not reachable from the root")

    def _check_disjoint(self) -> None:
        tseen: set[str] = set()
        dseen: set[str] = set()
        for r in self.rules:
            tv = {v.name for v in _rule_all_term_vars(r)}
            dv = {d.name for d in _rule_all_dist_bases(r)}
            if tseen & tv or dseen & dv:
                raise StructureError("rules in a structure must not share variables")
            tseen |= tv
            dseen |= dv

    def children_of(self, b: int) -> tuple[Link, ...]:
        return tuple(l for l in self.links if l.parent == b)

    def topo_order(self) -> tuple[int, ...]:
        """Rules ordered so every child precedes its parent."""
        order: list[int] = []

        def walk(b: int) -> None:
            for l in self.children_of(b):
                walk(l.child)
            order.append(b)

        walk(self.root)
        return tuple(order)

    def depth(self) -> int:
        def d(b: int) -> int:
            ls = self.children_of(b)
            return 1 + (max(d(l.child) for l in ls) if ls else 0)

        return d(self.root)


def _rule_all_term_vars(r: Rule) -> set[Var]:
    from .rules import rule_term_vars

    return rule_term_vars(r)


def _rule_all_dist_bases(r: Rule) -> set[DistVar]:
    from .rules import rule_dist_vars
    from .terms import split_indexed

    out = set()
    for dv in rule_dist_vars(r):
        parts = split_indexed(dv.name)
        out.add(DistVar(parts[0]) if parts else dv)
    return out


@dataclass(frozen=True)
class ProvableRule:
    """A rule derivable from a system, with its derivation depth."""

    rule: Rule
    depth: int
    via: str = ""

    def key(self):
        return canonical_rule_key(self.rule)


def _is_closed_quant(q: QuantLit) -> bool:
    return (
        not isinstance(q.witnesses, SetRef)
        and not literal_term_vars(q)
        and not literal_dist_vars(q)
    )


def _eval_closed_quant(q: QuantLit) -> bool:
    pi = eval_dist(q.dist)
    if any(pi.prob(w) == 0 for w in q.witnesses):
        return False  # improper listing: a witness outside the support
    return compare(q.cmp, pi.mass(q.witnesses), q.bound)


def _member_references(rule: Rule, family: str) -> set[int]:
    """Indices of the family's members the rule spells out anywhere."""
    out: set[int] = set()
    for v in rule_term_vars(rule):
        parts = split_member(v.name)
        if parts and parts[0] == family:
            out.add(parts[1])
    for dv in rule_dist_vars(rule):
        parts = split_indexed(dv.name)
        if parts:
            m = split_member(parts[1])
            if m and m[0] == family:
                out.add(m[1])
    return out


def member_extension(sigma: Substitution, rule: Rule) -> Substitution | None:
    """Bind the distinguished members of families the substitution collapses.

    A collapse pins a one-element image, so member 0 becomes the image term
    and its distribution the collapsed target.  References to later members
    of a collapsed family cannot denote anything; that fails the match.
    """
    tm = dict(sigma.terms())
    dm = dict(sigma.dists())
    for p in rule.pprem + rule.nprem:
        if not isinstance(p, FamilyPremise):
            continue
        if not all(b in tm for b, _ in p.binders):
            continue
        for b, fam in p.binders:
            if any(i > 0 for i in _member_references(rule, fam)):
                return None
            tm.setdefault(Var(f"{fam}[0]"), sigma.apply_term(b))
            if isinstance(p.literal, PositiveLit) and isinstance(p.literal.target, DistVar):
                parts = split_indexed(p.literal.target.name)
                if parts and parts[1] == b.name:
                    base = parts[0]
                    dm.setdefault(
                        DistVar(f"{base}[{fam}[0]]"),
                        sigma.apply_dist(DistVar(f"{base}[{b.name}]")),
                    )
    return Substitution.of(tm, dm)


def match_proof_structure(ps: ProofStructure, sigma: Substitution) -> bool:
    """Does the substitution equate every linked conclusion/premise pair?"""
    for l in ps.links:
        child = ps.rules[l.child]
        parent = ps.rules[l.parent]
        prem = parent.pprem[l.slot]
        img = subst_premise(sigma, prem, collapsed_images(parent, sigma))
        if not isinstance(img, PositiveLit):
            return False  # an uncollapsed family cannot match a single conclusion
        if img != subst_literal(sigma, child.conclusion):
            return False
    return True


def provable_rule_of(
    ps: ProofStructure, sigma: Substitution, name: str = "derived"
) -> ProvableRule:
    """The rule a matching substitution extracts from a proof structure.

    Premises are collected bottom-up.  A premise image equal to the
    substituted conclusion of an already processed rule is derivable with the
    same hypotheses, so it is dropped rather than hypothesised; closed
    quantitative images must hold and are discharged.
    """
    for rule in ps.rules:
        ext = member_extension(sigma, rule)
        if ext is None:
            raise MatchError("collapsed family leaves a member reference dangling")
        sigma = ext
    if not match_proof_structure(ps, sigma):
        raise MatchError("substitution does not match the proof structure")
    established: list[PositiveLit] = []
    hp: list[PositiveLit | FamilyPremise] = []
    hn: list[NegativeLit | FamilyPremise] = []
    hq: list[QuantLit] = []
    for b in ps.topo_order():
        rule = ps.rules[b]
        collapsed = collapsed_images(rule, sigma)
        linked = {l.slot for l in ps.children_of(b)}
        for slot, p in enumerate(rule.pprem):
            if slot in linked:
                continue
            img = subst_premise(sigma, p, collapsed)
            if isinstance(img, PositiveLit) and img in established:
                continue
            if img not in hp:
                hp.append(img)
        for p in rule.nprem:
            img = subst_premise(sigma, p, collapsed)
            if img not in hn:
                hn.append(img)
        for q in rule.qprem:
            img = subst_premise(sigma, q, collapsed)
            assert isinstance(img, QuantLit)
            if _is_closed_quant(img):
                if not _eval_closed_quant(img):
                    raise InvalidQuantitative(f"closed quantitative premise fails: {img}")
                continue
            if img not in hq:
                hq.append(img)
        established.append(subst_literal(sigma, rule.conclusion))  # type: ignore[arg-type]
    concl = subst_literal(sigma, ps.rules[ps.root].conclusion)
    derived = Rule(
        name=name,
        pprem=tuple(sorted(hp, key=literal_premise_sort_key)),
        nprem=tuple(sorted(hn, key=literal_premise_sort_key)),
        qprem=tuple(sorted(hq, key=literal_premise_sort_key)),
        conclusion=concl,  # type: ignore[arg-type]
    )
    return ProvableRule(derived, depth=ps.depth(), via="structure")


# -- structure enumeration ----------------------------------------------------------


def _link_equations(prem, concl: PositiveLit):
    """Unification problem equating a premise with a justifying conclusion."""
    if isinstance(prem, FamilyPremise):
        lit = prem.literal
        if not isinstance(lit, PositiveLit):
            return None
        if lit.label != concl.label:
            return None
        return [(lit.source, concl.source)], [(lit.target, concl.target)]
    if isinstance(prem, PositiveLit):
        if prem.label != concl.label:
            return None
        return [(prem.source, concl.source)], [(prem.target, concl.target)]
    return None


def enumerate_provable(ptss: PTSS, fuel: int, max_rules: int = 5000) -> list[ProvableRule]:
    """Most general rules derivable by proof structures of bounded depth.

    Structures are enumerated as trees (each premise justified by its own
    subtree); the matching substitution is the most general unifier of the
    link equations.  Trees are built as skeletons sharing rule objects and
    only the finally assembled structure gets variable-disjoint copies.
    """
    out: dict[tuple, ProvableRule] = {}
    namer = FreshNames()
    Skeleton = tuple[list[Rule], int, list[Link]]
    levels: dict[int, list[Skeleton]] = {}

    def trees(depth: int) -> list[Skeleton]:
        if depth in levels:
            return levels[depth]
        res: list[Skeleton] = [([base], 0, []) for base in ptss.rules]
        if depth > 1:
            subs = trees(depth - 1)
            for base in ptss.rules:
                cands = [
                    [t for t in subs if _quick_feasible(p, t[0][t[1]].conclusion)]
                    for p in base.pprem
                ]
                for choice in itertools.product([0, 1], repeat=len(base.pprem)):
                    if not any(choice):
                        continue
                    picked = [s for s, c in enumerate(choice) if c]
                    for combo in itertools.product(*(cands[s] for s in picked)):
                        rules = [base]
                        links: list[Link] = []
                        for slot, (srules, sroot, slinks) in zip(picked, combo):
                            offset = len(rules)
                            rules.extend(srules)
                            links.extend(
                                Link(l.child + offset, l.parent + offset, l.slot)
                                for l in slinks
                            )
                            links.append(Link(sroot + offset, 0, slot))
                        res.append((rules, 0, links))
        levels[depth] = res
        return res

    for rules, root, links in trees(fuel):
        if len(out) >= max_rules:
            break
        try:
            ps = ProofStructure(
                tuple(freshen_rule(r, namer) for r in rules), root, tuple(links)
            )
        except StructureError:
            continue
        term_eqs: list[tuple[Term, Term]] = []
        dist_eqs = []
        prefer: list[Var] = []
        feasible = True
        for l in ps.links:
            prem = ps.rules[l.parent].pprem[l.slot]
            if isinstance(prem, FamilyPremise):
                prefer.extend(b for b, _ in prem.binders)
            eqs = _link_equations(prem, ps.rules[l.child].conclusion)
            if eqs is None:
                feasible = False
                break
            term_eqs.extend(eqs[0])
            dist_eqs.extend(eqs[1])
        if not feasible:
            continue
        try:
            sigma = unify(term_eqs, dist_eqs, bind_first=prefer)
        except NotUnifiable:
            continue
        try:
            derived = provable_rule_of(ps, sigma, name=f"d{len(out)}")
        except (MatchError, InvalidQuantitative):
            continue
        k = derived.key()
        if k not in out or derived.depth < out[k].depth:
            out[k] = derived
    return sorted(out.values(), key=lambda d: (d.depth, d.key()))


# -- recursive closure ---------------------------------------------------------------


@dataclass
class ClosureResult:
    rules: list[ProvableRule]
    complete: bool
    family_origin: dict[str, str] = field(default_factory=dict)

    def keys(self) -> set[tuple]:
        return {d.key() for d in self.rules}


def _resolve_slot(current: Rule, slot: int, justifier: Rule) -> Rule | None:
    """Replace ``pprem[slot]`` of ``current`` by the justifier's premises,
    unifying the premise with the justifier's conclusion most generally."""
    prem = current.pprem[slot]
    eqs = _link_equations(prem, justifier.conclusion)
    if eqs is None:
        return None
    prefer = tuple(b for b, _ in prem.binders) if isinstance(prem, FamilyPremise) else ()
    try:
        sigma = unify(eqs[0], eqs[1], bind_first=prefer)
    except NotUnifiable:
        return None
    sigma = member_extension(sigma, current)
    if sigma is None:
        return None
    cur = subst_rule(sigma, current)
    jus = subst_rule(sigma, justifier)
    pp = [p for i, p in enumerate(cur.pprem) if i != slot]
    for p in jus.pprem:
        if p not in pp:
            pp.append(p)
    np = list(cur.nprem)
    for p in jus.nprem:
        if p not in np:
            np.append(p)
    qp = list(cur.qprem)
    for q in jus.qprem:
        if q not in qp:
            qp.append(q)
    return Rule(cur.name, tuple(pp), tuple(np), tuple(qp), cur.conclusion)


def _settle_quantitative(rule: Rule) -> Rule | None:
    """Discharge closed quantitative premises; None if one fails."""
    kept = []
    for q in rule.qprem:
        if _is_closed_quant(q):
            if not _eval_closed_quant(q):
                return None
            continue
        kept.append(q)
    if len(kept) == len(rule.qprem):
        return rule
    return Rule(rule.name, rule.pprem, rule.nprem, tuple(kept), rule.conclusion)


def _quick_feasible(prem, concl: PositiveLit) -> bool:
    """Cheap necessary test for a premise to unify with a conclusion."""
    lit = prem.literal if isinstance(prem, FamilyPremise) else prem
    if not isinstance(lit, PositiveLit):
        return False
    if lit.label != concl.label:
        return False
    s, c = lit.source, concl.source
    if not isinstance(s, Var) and not isinstance(c, Var):
        if s.func != c.func or len(s.args) != len(c.args):
            return False
    return True


def _canonical_shape(rule: Rule, name: str) -> Rule:
    return Rule(
        name,
        tuple(sorted(rule.pprem, key=literal_premise_sort_key)),
        tuple(sorted(rule.nprem, key=literal_premise_sort_key)),
        tuple(sorted(rule.qprem, key=literal_premise_sort_key)),
        rule.conclusion,
    )


def provable_closure(
    ptss: PTSS, fuel: int, max_rules: int = 5000, work_budget: int = 500_000
) -> ClosureResult:
    """Rules derivable by at most ``fuel`` nested resolution levels.

    Level 1 holds the rules themselves (closed quantitative premises
    settled); level d resolves each positive premise of a rule against a
    level-(d-1) conclusion or keeps it as a hypothesis.  Hitting either the
    rule cap or the work budget marks the result incomplete.
    """
    namer = FreshNames()
    fam_log: dict[str, str] = {}
    work = 0
    complete = True
    levels: list[dict[tuple, ProvableRule]] = []
    base: dict[tuple, ProvableRule] = {}
    for r in ptss.rules:
        settled = _settle_quantitative(freshen_rule(r, namer, fam_log=fam_log))
        if settled is None:
            continue
        d = ProvableRule(_canonical_shape(settled, r.name), depth=1, via="closure")
        base.setdefault(d.key(), d)
    levels.append(base)
    seen: dict[tuple, ProvableRule] = dict(base)
    for depth in range(2, fuel + 1):
        prev = [d for lv in levels for d in lv.values()]
        level: dict[tuple, ProvableRule] = {}
        for r in ptss.rules:
            start = freshen_rule(r, namer, fam_log=fam_log)
            nslots = len(start.pprem)
            slot_cands: list[list[int | None]] = [
                [None]
                + [
                    j
                    for j in range(len(prev))
                    if _quick_feasible(start.pprem[s], prev[j].rule.conclusion)
                ]
                for s in range(nslots)
            ]
            for assignment in itertools.product(*slot_cands):
                if all(a is None for a in assignment):
                    continue
                work += 1
                if work > work_budget:
                    complete = False
                    break
                current: Rule | None = start
                for slot in reversed(range(nslots)):
                    j = assignment[slot]
                    if j is None or current is None:
                        continue
                    jus = freshen_rule(prev[j].rule, namer, fam_log=fam_log)
                    current = _resolve_slot(current, slot, jus)
                if current is None:
                    continue
                current = _settle_quantitative(current)
                if current is None:
                    continue
                d = ProvableRule(_canonical_shape(current, f"{r.name}@{depth}"), depth, "closure")
                k = d.key()
                if k not in seen:
                    level[k] = d
                    seen[k] = d
                if len(seen) >= max_rules:
                    complete = False
                    break
            if not complete:
                break
        levels.append(level)
        if not level or not complete:
            break
    return ClosureResult(
        sorted(seen.values(), key=lambda d: (d.depth, d.key())), complete, fam_log
    )


def negative_only_rules(ptss: PTSS, fuel: int, max_rules: int = 5000) -> list[ProvableRule]:
    """Closure rules whose hypotheses are negative literals only."""
    closure = provable_closure(ptss, fuel, max_rules)
    return [d for d in closure.rules if not d.rule.pprem and not d.rule.qprem]


# -- well-supported proofs ------------------------------------------------------------


PROVED = "proved"
FAILED = "failed"
EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class WsNode:
    """One node of a well-supported proof tree."""

    literal: str
    source: Term
    label: str
    dist: FiniteDistribution | None
    children: tuple["WsNode", ...]

    @staticmethod
    def positive(source: Term, label: str, dist: FiniteDistribution, children=()):
        return WsNode("positive", source, label, dist, tuple(children))

    @staticmethod
    def negative(source: Term, label: str, children=()):
        return WsNode("negative", source, label, None, tuple(children))


@dataclass
class WsResult:
    status: str  # proved | refuted | notfound | exhausted
    tree: WsNode | None = None


class WsProver:
    """Depth-bounded search for well-supported proofs over a universe.

    Negative nodes are discharged against the rules with purely negative
    hypotheses from the bounded closure: every closed instance concluding a
    denial of the node must itself have a hypothesis denied above the node.
    """

    def __init__(
        self,
        ptss: PTSS,
        universe: Sequence[Term],
        pool: Sequence[FiniteDistribution],
        depth: int = 6,
        closure_fuel: int = 3,
        config: EngineConfig | None = None,
    ) -> None:
        self.ptss = ptss
        self.universe = list(universe)
        self.pool = list(pool)
        self.depth = depth
        self.config = config or EngineConfig()
        self.neg_rules = negative_only_rules(ptss, closure_fuel)
        self.memo: dict[tuple, tuple[str, WsNode | None]] = {}
        self.exhausted_any = False

    # keys for closed literals
    @staticmethod
    def _pos_key(t: Term, a: str, pi: FiniteDistribution):
        return ("+", term_key(t), a, pi.key())

    @staticmethod
    def _neg_key(t: Term, a: str):
        return ("-", term_key(t), a)

    def prove_positive(self, t: Term, a: str, pi: FiniteDistribution) -> WsResult:
        status, tree = self._pos(t, a, pi, self.depth, frozenset())
        if status == PROVED:
            return WsResult("proved", tree)
        if self._neg(t, a, self.depth, frozenset())[0] == PROVED:
            return WsResult("refuted")
        return WsResult("exhausted" if status == EXHAUSTED else "notfound")

    def prove_negative(self, t: Term, a: str) -> WsResult:
        status, tree = self._neg(t, a, self.depth, frozenset())
        if status == PROVED:
            return WsResult("proved", tree)
        for pi in self.pool:
            if self._pos(t, a, pi, self.depth, frozenset())[0] == PROVED:
                return WsResult("refuted")
        return WsResult("exhausted" if status == EXHAUSTED else "notfound")

    def _pos(self, t, a, pi, budget, path) -> tuple[str, WsNode | None]:
        key = self._pos_key(t, a, pi)
        if key in self.memo:
            return self.memo[key]
        if key in path:
            return FAILED, None  # a well-founded tree cannot repeat a goal
        if budget <= 0:
            self.exhausted_any = True
            return EXHAUSTED, None
        path = path | {key}
        want = Transition(t, a, pi)
        saw_exhausted = False
        for rule in self.ptss.rules:
            for inst in rule_instances(
                rule, self.universe, self.pool, pos=None, neg=None,
                conclusion=want, config=self.config,
            ):
                children: list[WsNode] = []
                ok = True
                for tr in inst.positives:
                    st, node = self._pos(tr.source, tr.label, tr.dist, budget - 1, path)
                    if st != PROVED:
                        ok = False
                        saw_exhausted |= st == EXHAUSTED
                        break
                    children.append(node)  # type: ignore[arg-type]
                if ok:
                    for src, lab in inst.negatives:
                        st, node = self._neg(src, lab, budget - 1, path)
                        if st != PROVED:
                            ok = False
                            saw_exhausted |= st == EXHAUSTED
                            break
                        children.append(node)  # type: ignore[arg-type]
                if ok:
                    node = WsNode.positive(t, a, pi, children)
                    self.memo[key] = (PROVED, node)
                    return PROVED, node
        if saw_exhausted:
            return EXHAUSTED, None
        self.memo[key] = (FAILED, None)
        return FAILED, None

    def _neg(self, t, a, budget, path) -> tuple[str, WsNode | None]:
        key = self._neg_key(t, a)
        if key in self.memo:
            return self.memo[key]
        if key in path:
            return FAILED, None
        if budget <= 0:
            self.exhausted_any = True
            return EXHAUSTED, None
        path = path | {key}
        obligations = self._denial_obligations(t, a)
        children: list[WsNode] = []
        saw_exhausted = False
        for pairs in obligations:
            done = False
            for src, lab in pairs:
                for pi in self.pool:
                    st, node = self._pos(src, lab, pi, budget - 1, path)
                    saw_exhausted |= st == EXHAUSTED
                    if st == PROVED:
                        children.append(node)  # type: ignore[arg-type]
                        done = True
                        break
                if done:
                    break
            if not done:
                if saw_exhausted:
                    return EXHAUSTED, None
                self.memo[key] = (FAILED, None)
                return FAILED, None
        node = WsNode.negative(t, a, children)
        self.memo[key] = (PROVED, node)
        return PROVED, node

    def _denial_obligations(self, t: Term, a: str) -> list[list[tuple[Term, str]]]:
        """Per provable denial of ``t -a-/->``, the literals a child may deny."""
        out: list[list[tuple[Term, str]]] = []
        for d in self.neg_rules:
            rule = d.rule
            if rule.conclusion.label != a:
                continue
            m = match_term(rule.conclusion.source, t, {})
            if m is None:
                continue
            free = sorted(
                {
                    v
                    for p in rule.nprem
                    for v in _negative_source_vars(p)
                    if v not in m and split_member(v.name) is None and _binder_of(rule, v) is None
                },
                key=lambda v: v.name,
            )
            for assign in itertools.product(self.universe, repeat=len(free)):
                env = dict(m)
                env.update(zip(free, assign))
                pairs: list[tuple[Term, str]] = []
                grounded = True
                for p in rule.nprem:
                    if isinstance(p, FamilyPremise):
                        lit = p.literal
                        assert isinstance(lit, NegativeLit)
                        binders = [b for b, _ in p.binders]
                        for member in self.universe:
                            e = dict(env)
                            for b in binders:
                                e[b] = member
                            src = _close_term(lit.source, e)
                            if is_closed_term(src):
                                pairs.append((src, lit.label))
                    else:
                        assert isinstance(p, NegativeLit)
                        src = _close_term(p.source, env)
                        if not is_closed_term(src):
                            grounded = False
                            break
                        pairs.append((src, p.label))
                if grounded:
                    out.append(sorted(set(pairs), key=lambda x: (term_key(x[0]), x[1])))
        return out


def _negative_source_vars(p) -> set[Var]:
    if isinstance(p, FamilyPremise):
        binders = {b for b, _ in p.binders}
        return term_vars(p.literal.source) - binders
    return term_vars(p.source)


def _binder_of(rule: Rule, v: Var):
    for p in rule.pprem + rule.nprem:
        if isinstance(p, FamilyPremise):
            for b, fam in p.binders:
                if b == v:
                    return fam
    return None


def _close_term(t: Term, env: Mapping[Var, Term]) -> Term:
    from .semantics import _close

    return _close(t, env)


# -- completeness and consistency -----------------------------------------------------


@dataclass
class PairVerdict:
    source: Term
    label: str
    dists: list[FiniteDistribution]
    negative: bool
    exhausted: bool

    @property
    def positive(self) -> bool:
        return bool(self.dists)

    @property
    def decided(self) -> bool:
        return self.positive or self.negative

    @property
    def inconsistent(self) -> bool:
        return self.positive and self.negative


@dataclass
class CompletenessReport:
    verdicts: list[PairVerdict]
    complete: bool
    consistent: bool
    exhausted: bool

    def ws_transitions(self) -> set[Transition]:
        return {
            Transition(v.source, v.label, pi)
            for v in self.verdicts
            for pi in v.dists
        }


def check_complete_consistent(
    ptss: PTSS,
    universe: Sequence[Term],
    pool: Sequence[FiniteDistribution],
    depth: int = 6,
    closure_fuel: int = 3,
) -> CompletenessReport:
    """Classify every (term, label) pair as positively or negatively provable."""
    prover = WsProver(ptss, universe, pool, depth, closure_fuel)
    verdicts: list[PairVerdict] = []
    for t in universe:
        for a in ptss.signature.labels:
            dists = []
            exhausted = False
            for pi in pool:
                st, _ = prover._pos(t, a, pi, depth, frozenset())
                if st == PROVED:
                    dists.append(pi)
                exhausted |= st == EXHAUSTED
            st, _ = prover._neg(t, a, depth, frozenset())
            neg = st == PROVED
            exhausted |= st == EXHAUSTED
            verdicts.append(PairVerdict(t, a, dists, neg, exhausted))
    return CompletenessReport(
        verdicts,
        complete=all(v.decided for v in verdicts),
        consistent=not any(v.inconsistent for v in verdicts),
        exhausted=any(v.exhausted for v in verdicts),
    )


def ws_prove(
    ptss: PTSS,
    source: Term,
    label: str,
    dist: FiniteDistribution | None,
    universe: Sequence[Term],
    pool: Sequence[FiniteDistribution],
    depth: int = 6,
    closure_fuel: int = 3,
    config: EngineConfig | None = None,
) -> WsResult:
    """Prove one closed literal; ``dist=None`` asks about the negative one."""
    prover = WsProver(ptss, universe, pool, depth, closure_fuel, config)
    if dist is None:
        return prover.prove_negative(source, label)
    return prover.prove_positive(source, label, dist)
