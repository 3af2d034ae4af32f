"""Stepwise reduction of rule systems toward the tree format.

Three stages, each a source-to-source rewrite that keeps the induced
transition relation over a bounded universe:

1. variable-source conclusions are split into one rule per function shape;
2. structured premise sources are resolved away inside the bounded closure,
   keeping the rules whose positive premise sources are variables;
3. free variables are grounded over the universe and the positive premises
   this closes are replaced by the purely negative hypotheses of provable
   rules concluding them.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .dist import Dirac, FiniteDistribution
from .formats import CHECKS, check_nxmuftheta, check_pntree, check_spec_format, classify, free_vars
from .proofs import _quick_feasible, _resolve_slot, _settle_quantitative, provable_closure
from .rules import (
    FamilyPremise,
    PTSS,
    PositiveLit,
    Rule,
    canonical_rule_key,
    freshen_rule,
    rename_rule,
    rule_dist_vars,
    rule_term_vars,
    subst_rule,
)
from .semantics import UniverseSpec, build_universe
from .subst import Substitution
from .terms import App, FreshNames, Term, Var, split_indexed


@dataclass
class StageTrace:
    stage: str
    rules_in: int
    rules_out: int
    complete: bool
    format_after: str
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "stage": self.stage,
            "rules_in": self.rules_in,
            "rules_out": self.rules_out,
            "complete": self.complete,
            "format_after": self.format_after,
            "notes": list(self.notes),
        }


@dataclass
class ReductionTrace:
    stages: list[StageTrace]

    @property
    def complete(self) -> bool:
        return all(s.complete for s in self.stages)

    def to_json(self) -> dict:
        return {"complete": self.complete, "stages": [s.to_json() for s in self.stages]}


@dataclass(frozen=True)
class ReduceConfig:
    fuel: int = 2
    max_rules: int = 4000
    ground_budget: int = 4
    step_budget: int = 50_000


def _renumber(ptss: PTSS, rules: Sequence[Rule], prefix: str) -> PTSS:
    ordered = sorted(rules, key=canonical_rule_key)
    named = tuple(replace(r, name=f"{prefix}{i}") for i, r in enumerate(ordered))
    return PTSS(ptss.signature, named, ptss.families, ptss.varsets)


def _restore_families(
    rule: Rule, origin: Mapping[str, str], declared: frozenset[str]
) -> tuple[Rule, frozenset[str]]:
    """Rename freshened index sets back to their declared names.

    Resolution copies rules, which renames their index sets; the derived
    rule would then quantify over sets the system never declared.  Each is
    renamed to the declared set it descends from, with numeric suffixes
    keeping several copies inside one rule distinct.  Returns the renamed
    rule and the names that stand for declared unbounded sets.
    """

    def chase(f: str) -> str:
        while f in origin and origin[f] != f:
            f = origin[f]
        return f

    fam_ren: dict[str, str] = {}
    good: set[str] = set()
    taken: set[str] = set()
    for fam in sorted(rule.families(), key=lambda f: (chase(f), f)):
        base = chase(fam)
        cand, k = base, 2
        while cand in taken:
            cand = f"{base}_{k}"
            k += 1
        fam_ren[fam] = cand
        taken.add(cand)
        if base in declared:
            good.add(cand)
    if any(k != v for k, v in fam_ren.items()):
        rule = rename_rule(rule, {}, {}, fam_ren)
    return rule, frozenset(good)


def _dist_bases(rule: Rule) -> set[str]:
    out = set()
    for dv in rule_dist_vars(rule):
        parts = split_indexed(dv.name)
        out.add(parts[0] if parts else dv.name)
    return out


def _fresh_args(rule: Rule, arity: int) -> tuple[Var, ...]:
    used = {v.name for v in rule_term_vars(rule)}
    out: list[Var] = []
    i = 1
    while len(out) < arity:
        name = f"x{i}"
        if name not in used:
            out.append(Var(name))
            used.add(name)
        i += 1
    return tuple(out)


def to_ntmuftheta(ptss: PTSS) -> tuple[PTSS, StageTrace]:
    """Split every variable-source conclusion into one rule per function."""
    ok, _ = check_spec_format(ptss, "ntmuftheta")
    if ok:
        tr = StageTrace("function-shapes", len(ptss.rules), len(ptss.rules), True, "ntmuftheta")
        return ptss, tr
    out: list[Rule] = []
    notes: list[str] = []
    for rule in ptss.rules:
        src = rule.conclusion.source
        if not isinstance(src, Var):
            out.append(rule)
            continue
        # operator symbols need not be lexable inside a rule name
        for k, (func, arity) in enumerate(ptss.signature.functions):
            args = _fresh_args(rule, arity)
            s = Substitution.of({src: App(func, args)})
            suffix = func if func.isidentifier() else f"op{k}"
            out.append(replace(subst_rule(s, rule), name=f"{rule.name}_{suffix}"))
        notes.append(f"{rule.name}: split over {len(ptss.signature.functions)} function shapes")
    res = PTSS(ptss.signature, tuple(out), ptss.families, ptss.varsets)
    tr = StageTrace("function-shapes", len(ptss.rules), len(out), True, classify(res), notes)
    return res, tr


def to_nxmuftheta(ptss: PTSS, config: ReduceConfig = ReduceConfig()) -> tuple[PTSS, StageTrace]:
    """Keep the bounded-closure rules whose positive sources are variables."""
    ok, _ = check_spec_format(ptss, "nxmuftheta")
    if ok:
        tr = StageTrace("variable-sources", len(ptss.rules), len(ptss.rules), True, "nxmuftheta")
        return ptss, tr
    closure = provable_closure(ptss, config.fuel, config.max_rules)
    kept: list[Rule] = []
    dropped = 0
    fams = set(ptss.families)
    for d in closure.rules:
        rule, good = _restore_families(d.rule, closure.family_origin, ptss.families)
        decls = replace(ptss, families=ptss.families | good)
        if check_nxmuftheta(decls, rule).ok:
            kept.append(rule)
            fams |= good
        else:
            dropped += 1
    res = _renumber(replace(ptss, families=frozenset(fams)), kept, "n")
    notes = [f"closure fuel {config.fuel}: kept {len(kept)}, filtered {dropped}"]
    if not closure.complete:
        notes.append("closure truncated at the rule cap")
    tr = StageTrace(
        "variable-sources", len(ptss.rules), len(kept), closure.complete, classify(res), notes
    )
    return res, tr


def _ground_candidates(
    rule: Rule, universe: Sequence[Term]
) -> tuple[list, list, bool]:
    fv = free_vars(rule)
    binders = {b for p in rule.pprem + rule.nprem if isinstance(p, FamilyPremise) for b, _ in p.binders}
    if fv.terms & binders:
        return [], [], False
    return (
        sorted(fv.terms, key=lambda v: v.name),
        sorted(fv.dists, key=lambda d: d.name),
        True,
    )


def to_pntree(
    ptss: PTSS,
    universe: Sequence[Term],
    config: ReduceConfig = ReduceConfig(),
) -> tuple[PTSS, StageTrace]:
    """Ground free variables and splice out the positive premises this closes."""
    ok, _ = check_spec_format(ptss, "pntree")
    if ok:
        tr = StageTrace("grounding", len(ptss.rules), len(ptss.rules), True, "pntree")
        return ptss, tr
    closure = provable_closure(ptss, config.fuel, config.max_rules)
    origin = dict(closure.family_origin)
    neg_rules = [d.rule for d in closure.rules if not d.rule.pprem]
    namer = FreshNames()
    for r in (*ptss.rules, *neg_rules):
        namer.reserve(v.name for v in rule_term_vars(r))
        namer.reserve(_dist_bases(r))
        namer.reserve(r.families())
    complete = True
    notes: list[str] = []
    done: dict[tuple, Rule] = {}
    fams = set(ptss.families)
    steps = 0

    def process(rule: Rule, budget: int) -> None:
        nonlocal complete, steps
        steps += 1
        if steps > config.step_budget:
            if complete:
                notes.append("stopped at the step budget")
            complete = False
            return
        settled = _settle_quantitative(rule)
        if settled is None:
            return
        rule = settled
        if budget <= 0:
            complete = False
            notes.append(f"{rule.name}: grounding budget exhausted")
            return
        ft, fd, groundable = _ground_candidates(rule, universe)
        if not groundable:
            complete = False
            notes.append(f"{rule.name}: free family binder, not groundable")
            return
        if ft or fd:
            for t_assign in itertools.product(universe, repeat=len(ft)):
                for d_assign in itertools.product(universe, repeat=len(fd)):
                    if steps > config.step_budget:
                        return
                    s = Substitution.of(
                        dict(zip(ft, t_assign)),
                        {dv: Dirac(u) for dv, u in zip(fd, d_assign)},
                    )
                    process(subst_rule(s, rule), budget - 1)
            return
        slot = next(
            (
                i
                for i, p in enumerate(rule.pprem)
                if isinstance(p, PositiveLit) and not isinstance(p.source, Var)
            ),
            None,
        )
        if slot is not None:
            for jr in neg_rules:
                if steps > config.step_budget:
                    return
                if not _quick_feasible(rule.pprem[slot], jr.conclusion):
                    continue
                res = _resolve_slot(rule, slot, freshen_rule(jr, namer, fam_log=origin))
                if res is not None:
                    process(res, budget - 1)
            return
        rule, good = _restore_families(rule, origin, ptss.families)
        rep = check_pntree(replace(ptss, families=ptss.families | good), rule)
        if not rep.ok:
            complete = False
            notes.append(
                f"{rule.name}: not tree-format after grounding "
                f"({', '.join(c.tag for c in rep.failures())})"
            )
            return
        if done.setdefault(canonical_rule_key(rule), rule) is rule:
            fams.update(good)

    for r in ptss.rules:
        if steps > config.step_budget:
            break
        process(r, config.ground_budget)
    res = _renumber(replace(ptss, families=frozenset(fams)), list(done.values()), "p")
    tr = StageTrace(
        "grounding", len(ptss.rules), len(done), complete, classify(res), notes
    )
    return res, tr


def reduce_full(
    ptss: PTSS,
    universe: Sequence[Term] | UniverseSpec,
    config: ReduceConfig = ReduceConfig(),
) -> tuple[PTSS, ReductionTrace]:
    """All three stages in order, with a machine-readable trace."""
    if isinstance(universe, UniverseSpec):
        universe = build_universe(ptss.signature, universe)
    p1, t1 = to_ntmuftheta(ptss)
    p2, t2 = to_nxmuftheta(p1, config)
    p3, t3 = to_pntree(p2, universe, config)
    return p3, ReductionTrace([t1, t2, t3])
