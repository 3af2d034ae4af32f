"""Syntactic rule formats and the analyses behind them.

The checks here grade rules into a lattice of shapes: premise targets that
are distribution variables, conclusion sources built from distinct
variables, variable dependencies without infinite descent, and the absence
of free variables.  Reduction and the congruence results key off these
grades.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .dist import dist_term_vars_of, dist_vars_of
from .rules import (
    FamilyPremise,
    NegativeLit,
    PTSS,
    PositiveLit,
    QuantLit,
    Rule,
    SetRef,
    premise_dist_vars,
    premise_term_vars,
    rule_dist_vars,
    rule_term_vars,
)
from .terms import App, DistVar, Term, Var, split_indexed, split_member, term_vars

Vertex = Var | DistVar


@dataclass(frozen=True)
class DependencyGraph:
    """Which variables a rule determines from which."""

    vertices: frozenset[Vertex]
    edges: frozenset[tuple[Vertex, Vertex]]

    def successors(self, v: Vertex) -> list[Vertex]:
        return sorted((b for a, b in self.edges if a == v), key=_vkey)

    def predecessors(self, v: Vertex) -> list[Vertex]:
        return sorted((a for a, b in self.edges if b == v), key=_vkey)

    def is_well_founded(self) -> bool:
        """True when no dependency chain loops back on itself."""
        return self.ranks() is not None

    def ranks(self) -> dict[Vertex, int] | None:
        """Longest-path rank per vertex, or None when the graph has a cycle."""
        order = self.topological()
        if order is None:
            return None
        rank: dict[Vertex, int] = {}
        for v in order:
            preds = self.predecessors(v)
            rank[v] = 1 + max(rank[p] for p in preds) if preds else 0
        return rank

    def topological(self) -> list[Vertex] | None:
        indeg = {v: 0 for v in self.vertices}
        for _, b in self.edges:
            indeg[b] += 1
        ready = sorted((v for v, d in indeg.items() if d == 0), key=_vkey)
        out: list[Vertex] = []
        while ready:
            v = ready.pop(0)
            out.append(v)
            for w in self.successors(v):
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
            ready.sort(key=_vkey)
        return out if len(out) == len(self.vertices) else None

    def reachable_from(self, starts: Iterable[Vertex]) -> set[Vertex]:
        seen = set()
        stack = [v for v in starts if v in self.vertices]
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(b for a, b in self.edges if a == v)
        return seen


def _vkey(v: Vertex):
    return (isinstance(v, DistVar), v.name)


def _spelled_members(rule: Rule) -> set[Var]:
    """Member variables written out anywhere, including inside indexed
    distribution-variable names."""
    out: set[Var] = set()
    for v in rule_term_vars(rule):
        if split_member(v.name):
            out.add(v)
    for dv in rule_dist_vars(rule):
        parts = split_indexed(dv.name)
        if parts and split_member(parts[1]):
            out.add(Var(parts[1]))
    return out


def _family_index_vars(rule: Rule, family: str) -> set[Var]:
    """Binders of the family's premises plus its spelled-out members."""
    out: set[Var] = set()
    for p in rule.pprem + rule.nprem:
        if isinstance(p, FamilyPremise):
            for b, fam in p.binders:
                if fam == family:
                    out.add(b)
    for v in _spelled_members(rule):
        parts = split_member(v.name)
        if parts and parts[0] == family:
            out.add(v)
    return out


def _witness_vars(rule: Rule, q: QuantLit) -> set[Var]:
    if isinstance(q.witnesses, SetRef):
        return _family_index_vars(rule, q.witnesses.name)
    out: set[Var] = set()
    for w in q.witnesses:
        out |= term_vars(w)
    return out


def dependency_graph(rule: Rule) -> DependencyGraph:
    """Edges run source var -> target var per positive premise, and
    quantitative-expression var -> witness var per mass constraint."""
    vertices: set[Vertex] = set()
    edges: set[tuple[Vertex, Vertex]] = set()
    for p in rule.pprem + tuple(rule.qprem):
        vertices |= premise_term_vars(p)
        vertices |= premise_dist_vars(p)
    for p in rule.pprem:
        lit = p.literal if isinstance(p, FamilyPremise) else p
        assert isinstance(lit, PositiveLit)
        sources = term_vars(lit.source)
        targets: set[Vertex] = set(dist_vars_of(lit.target))
        for x in sources:
            for m in targets:
                edges.add((x, m))
    for q in rule.qprem:
        zetas: set[Vertex] = set(dist_vars_of(q.dist)) | dist_term_vars_of(q.dist)
        ys = _witness_vars(rule, q)
        vertices |= ys
        for z in zetas:
            for y in ys:
                edges.add((z, y))
    return DependencyGraph(frozenset(vertices), frozenset(edges))


def is_well_founded(rule: Rule) -> bool:
    return dependency_graph(rule).is_well_founded()


@dataclass
class FreeVars:
    terms: set[Var]
    dists: set[DistVar]
    dirac_only: set[Var]

    @property
    def none(self) -> bool:
        return not self.terms and not self.dists


def _positive_target_bases(rule: Rule) -> tuple[set[str], set[str]]:
    """Names of plain positive targets and bases of family positive targets."""
    plain: set[str] = set()
    bases: set[str] = set()
    for p in rule.pprem:
        if isinstance(p, FamilyPremise):
            tgt = p.literal.target if isinstance(p.literal, PositiveLit) else None
            if isinstance(tgt, DistVar):
                parts = split_indexed(tgt.name)
                bases.add(parts[0] if parts else tgt.name)
        elif isinstance(p.target, DistVar):
            plain.add(p.target.name)
    return plain, bases


def free_vars(rule: Rule) -> FreeVars:
    """Variables the conclusion source and the witness sets do not pin down.

    A term variable is bound by the conclusion source or by appearing in a
    witness position (for set witnesses: as a binder or spelled member of
    the set's families).  A distribution variable is bound by being a
    positive premise target, plain or member-indexed.
    """
    bound_t: set[Var] = set(term_vars(rule.conclusion.source))
    for q in rule.qprem:
        bound_t |= _witness_vars(rule, q)
    occurring = rule_term_vars(rule) | _spelled_members(rule)
    free_t = occurring - bound_t

    plain, bases = _positive_target_bases(rule)

    def dv_bound(dv: DistVar) -> bool:
        parts = split_indexed(dv.name)
        base = parts[0] if parts else dv.name
        return dv.name in plain or base in bases

    free_d = {dv for dv in rule_dist_vars(rule) if not dv_bound(dv)}

    structural: set[Var] = set(term_vars(rule.conclusion.source))
    for p in rule.pprem + rule.nprem:
        lit = p.literal if isinstance(p, FamilyPremise) else p
        structural |= term_vars(lit.source)
    for q in rule.qprem:
        if not isinstance(q.witnesses, SetRef):
            for w in q.witnesses:
                structural |= term_vars(w)
    dirac_only = {v for v in free_t if v not in structural}
    return FreeVars(free_t, free_d, dirac_only)


# -- format conditions -----------------------------------------------------------------


@dataclass(frozen=True)
class Condition:
    tag: str
    ok: bool
    detail: str = ""


@dataclass
class FormatReport:
    rule: str
    format: str
    conditions: list[Condition]
    warnings: list[str]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.conditions)

    def failures(self) -> list[Condition]:
        return [c for c in self.conditions if not c.ok]


def _positive_premises(rule: Rule):
    for p in rule.pprem:
        lit = p.literal if isinstance(p, FamilyPremise) else p
        yield p, lit


def _all_index_vars(rule: Rule) -> set[Var]:
    out: set[Var] = set()
    for p in rule.pprem + rule.nprem:
        if isinstance(p, FamilyPremise):
            out |= {b for b, _ in p.binders}
            for _, fam in p.binders:
                out |= _family_index_vars(rule, fam)
    return out


def _base_conditions(ptss: PTSS, rule: Rule) -> tuple[list[Condition], list[str]]:
    conds: list[Condition] = []
    warnings: list[str] = []

    undeclared = sorted(
        {
            fam
            for p in rule.pprem + rule.nprem
            if isinstance(p, FamilyPremise)
            for _, fam in p.binders
            if fam not in ptss.families
        }
    )
    conds.append(
        Condition(
            "families-unbounded",
            not undeclared,
            "" if not undeclared else f"bounded or undeclared sets: {', '.join(undeclared)}",
        )
    )
    conds.append(Condition("families-synchronised", True))

    names: list[str] = []
    bad_targets: list[str] = []
    for p, lit in _positive_premises(rule):
        if not isinstance(lit, PositiveLit):
            continue
        tgt = lit.target
        if not isinstance(tgt, DistVar):
            bad_targets.append(str(tgt))
            continue
        parts = split_indexed(tgt.name)
        if isinstance(p, FamilyPremise):
            binder_names = {b.name for b, _ in p.binders}
            if not parts or parts[1] not in binder_names:
                bad_targets.append(tgt.name)
                continue
            names.append(parts[0])
        else:
            names.append(tgt.name)
    distinct = len(names) == len(set(names))
    conds.append(
        Condition(
            "targets-distinct-vars",
            not bad_targets and distinct,
            "non-variable targets: " + ", ".join(bad_targets)
            if bad_targets
            else ("" if distinct else "repeated target variable"),
        )
    )

    multi: list[str] = []
    rule_dvs = rule_dist_vars(rule)
    for p in rule.pprem:
        if not isinstance(p, FamilyPremise) or not isinstance(p.literal, PositiveLit):
            continue
        tgt = p.literal.target
        if not isinstance(tgt, DistVar):
            continue
        parts = split_indexed(tgt.name)
        if not parts:
            continue
        base = parts[0]
        fams = {fam for _, fam in p.binders}
        indices = set()
        for dv in rule_dvs:
            dparts = split_indexed(dv.name)
            if not dparts or dparts[0] != base:
                continue
            m = split_member(dparts[1])
            if m is not None and m[0] in fams:
                indices.add(dparts[1])
        if len(indices) > 1:
            multi.append(f"{base} indexed by {', '.join(sorted(indices))}")
    conds.append(Condition("one-member-per-family-target", not multi, "; ".join(multi)))

    index_vars = _all_index_vars(rule)
    leaked = index_vars & term_vars(rule.conclusion.source)
    conds.append(
        Condition(
            "members-not-in-source",
            not leaked,
            "" if not leaked else ", ".join(sorted(v.name for v in leaked)),
        )
    )

    cargs = term_vars(rule.conclusion.source)
    bad_q: list[str] = []
    for q in rule.qprem:
        overlap = dist_term_vars_of(q.dist) & (cargs | index_vars)
        if overlap:
            bad_q.append(", ".join(sorted(v.name for v in overlap)))
    conds.append(Condition("mass-terms-fresh", not bad_q, "; ".join(bad_q)))

    conds.append(Condition("witness-sets-wellformed", True))
    conds.append(Condition("labels-wellformed", True))

    bad_cmp = sorted({q.cmp for q in rule.qprem if q.cmp not in (">", ">=")})
    conds.append(
        Condition(
            "lower-bound-comparisons",
            not bad_cmp,
            "" if not bad_cmp else "upper bounds used: " + ", ".join(bad_cmp),
        )
    )

    fv = free_vars(rule)
    for v in sorted(fv.dirac_only, key=lambda v: v.name):
        warnings.append(
            f"variable {v.name} occurs only inside distribution expressions; "
            "point masses do not bind it"
        )
    return conds, warnings


def _conclusion_func_shape(rule: Rule) -> Condition:
    src = rule.conclusion.source
    ok = (
        isinstance(src, App)
        and all(isinstance(t, Var) for t in src.args)
        and len({t.name for t in src.args if isinstance(t, Var)}) == len(src.args)
    )
    return Condition(
        "source-distinct-var-args",
        ok,
        "" if ok else "conclusion source must apply a function to distinct variables",
    )


def _conclusion_var_shape(rule: Rule) -> Condition:
    ok = isinstance(rule.conclusion.source, Var)
    return Condition(
        "source-single-var", ok, "" if ok else "conclusion source must be one variable"
    )


def _positive_sources_vars(rule: Rule) -> Condition:
    bad = [
        str(lit.source)
        for _, lit in _positive_premises(rule)
        if isinstance(lit, PositiveLit) and not isinstance(lit.source, Var)
    ]
    return Condition(
        "positive-sources-vars",
        not bad,
        "" if not bad else "structured sources: " + "; ".join(bad),
    )


def _negative_sources_vars(rule: Rule) -> Condition:
    bad = []
    for p in rule.nprem:
        lit = p.literal if isinstance(p, FamilyPremise) else p
        if not isinstance(lit.source, Var):
            bad.append(str(lit.source))
    return Condition(
        "negative-sources-vars",
        not bad,
        "" if not bad else "structured sources: " + "; ".join(bad),
    )


def check_ntmuftheta(ptss: PTSS, rule: Rule) -> FormatReport:
    conds, warnings = _base_conditions(ptss, rule)
    conds.append(_conclusion_func_shape(rule))
    return FormatReport(rule.name, "ntmuftheta", conds, warnings)


def check_ntmuxtheta(ptss: PTSS, rule: Rule) -> FormatReport:
    conds, warnings = _base_conditions(ptss, rule)
    conds.append(_conclusion_var_shape(rule))
    return FormatReport(rule.name, "ntmuxtheta", conds, warnings)


def check_nxmuftheta(ptss: PTSS, rule: Rule) -> FormatReport:
    rep = check_ntmuftheta(ptss, rule)
    rep.conditions.append(_positive_sources_vars(rule))
    rep.format = "nxmuftheta"
    return rep


def check_pntree(ptss: PTSS, rule: Rule) -> FormatReport:
    rep = check_nxmuftheta(ptss, rule)
    wf = is_well_founded(rule)
    rep.conditions.append(
        Condition("well-founded", wf, "" if wf else "cyclic variable dependencies")
    )
    fv = free_vars(rule)
    detail = ""
    if not fv.none:
        names = sorted(v.name for v in fv.terms) + sorted(d.name for d in fv.dists)
        detail = "free: " + ", ".join(names)
    rep.conditions.append(Condition("no-free-variables", fv.none, detail))
    rep.format = "pntree"
    return rep


def check_simple_pntree(ptss: PTSS, rule: Rule) -> FormatReport:
    rep = check_pntree(ptss, rule)
    rep.conditions.append(_negative_sources_vars(rule))
    rep.format = "simple-pntree"
    return rep


CHECKS = {
    "ntmuftheta": check_ntmuftheta,
    "ntmuxtheta": check_ntmuxtheta,
    "nxmuftheta": check_nxmuftheta,
    "pntree": check_pntree,
    "simple-pntree": check_simple_pntree,
}

# most specific first; the x-conclusion shape sits apart from the rest
LATTICE = ("simple-pntree", "pntree", "nxmuftheta", "ntmuftheta")


def check_spec_format(ptss: PTSS, fmt: str) -> tuple[bool, list[FormatReport]]:
    check = CHECKS[fmt]
    reports = [check(ptss, r) for r in ptss.rules]
    return all(r.ok for r in reports), reports


def classify(ptss: PTSS) -> str:
    """The most specific format every rule of the system satisfies.

    A system mixing function-shaped and variable-shaped conclusions gets the
    combined name when each rule passes one of the two; such systems are
    exactly what the reduction pipeline accepts.
    """
    for fmt in LATTICE:
        ok, _ = check_spec_format(ptss, fmt)
        if ok:
            return fmt
    ok, _ = check_spec_format(ptss, "ntmuxtheta")
    if ok:
        return "ntmuxtheta"
    if all(
        check_ntmuftheta(ptss, r).ok or check_ntmuxtheta(ptss, r).ok
        for r in ptss.rules
    ):
        return "ntmuftheta/ntmuxtheta"
    return "none"


# -- canonical synchronised index tuples ----------------------------------------------


def diag_tuples(columns: Sequence[Sequence]) -> list[tuple]:
    """Position-aligned tuples over equally long columns."""
    if not columns:
        return []
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValueError("columns must have equal length")
    return list(zip(*columns))


def is_diagonal(tuples: Sequence[tuple], columns: Sequence[Sequence]) -> bool:
    """Do the tuples pick every column entry exactly once, in step?"""
    return list(tuples) == diag_tuples(columns)
