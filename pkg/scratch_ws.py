"""Smoke: ws-proofs and closure/structure agreement on a two-rule system."""
from ptss.terms import Var, App, DistVar, Signature
from ptss.dist import Dirac, dirac
from ptss.rules import Rule, PTSS, PositiveLit, NegativeLit
from ptss.proofs import (
    check_complete_consistent,
    enumerate_provable,
    provable_closure,
    ws_prove,
)
from ptss.semantics import Transition, build_universe, UniverseSpec

sig = Signature(functions=(("f", 0),), labels=("a", "b"))
f = App("f", ())
mu = DistVar("mu")
r1 = Rule("loop", (PositiveLit(f, "a", mu),), (), (), PositiveLit(f, "a", Dirac(f)))
r2 = Rule("flip", (), (NegativeLit(f, "a"),), (), PositiveLit(f, "b", Dirac(f)))
ptss = PTSS(sig, (r1, r2), frozenset(), {})

universe = build_universe(sig, UniverseSpec(init=(f,), depth=1))
pool = [dirac(f)]

res_neg = ws_prove(ptss, f, "a", None, universe, pool)
print("f -a-/-> :", res_neg.status)
res_pos = ws_prove(ptss, f, "b", dirac(f), universe, pool)
print("f -b-> delta_f :", res_pos.status)
res_bad = ws_prove(ptss, f, "a", dirac(f), universe, pool)
print("f -a-> delta_f :", res_bad.status)
res_negb = ws_prove(ptss, f, "b", None, universe, pool)
print("f -b-/-> :", res_negb.status)

rep = check_complete_consistent(ptss, universe, pool)
print("complete:", rep.complete, "consistent:", rep.consistent, "exhausted:", rep.exhausted)
print("ws transitions:", sorted(str(tr) for tr in rep.ws_transitions()))
assert res_neg.status == "proved"
assert res_pos.status == "proved"
assert res_bad.status == "refuted"
assert res_negb.status == "refuted"
assert rep.complete and rep.consistent
assert rep.ws_transitions() == {Transition(f, "b", dirac(f))}

# closure vs structure enumeration at shared fuel
for fuel in (1, 2, 3):
    close = provable_closure(ptss, fuel)
    enum = enumerate_provable(ptss, fuel)
    ck = close.keys()
    ek = {d.key() for d in enum}
    print(f"fuel {fuel}: closure {len(ck)} rules, structures {len(ek)} rules, equal: {ck == ek}")
    assert ck == ek, (ck, ek)
print("OK")
