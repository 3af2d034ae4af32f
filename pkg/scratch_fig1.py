"""Smoke: the parallel-composition derived rule from the five-rule system."""
from fractions import Fraction

from ptss.terms import Var, App, DistVar, Signature, member_var, indexed_dist_var
from ptss.dist import Dirac, parallel
from ptss.rules import Rule, PTSS, PositiveLit, FamilyPremise, QuantLit, SetRef
from ptss.subst import Substitution
from ptss.proofs import ProofStructure, Link, provable_rule_of, match_proof_structure

sig = Signature(
    functions=(("a", 0), ("+", 2), ("||", 2)),
    labels=("a", "abar", "b", "tau", "ok"),
    infix=frozenset({"+", "||"}),
)
a = App("a", ())
plus = lambda l, r: App("+", (l, r))
par = lambda l, r: App("||", (l, r))

r1 = Rule("axiom_a", (), (), (), PositiveLit(a, "a", Dirac(a)))

y1, s, t = Var("y1"), Var("s"), Var("t")
mu1 = indexed_dist_var("mu1", y1)
mu_s = DistVar("mu_s")
r2 = Rule(
    "sum_left",
    pprem=(
        FamilyPremise(((y1, "Y1"),), PositiveLit(y1, "a", mu1)),
        PositiveLit(s, "a", mu_s),
    ),
    nprem=(),
    qprem=(QuantLit(mu_s, SetRef("Y1"), ">=", Fraction(1)),),
    conclusion=PositiveLit(plus(s, t), "a", mu_s),
)

u, v = Var("u"), Var("v")
mu_u = DistVar("mu_u")
r3 = Rule(
    "sum_right_bar",
    pprem=(PositiveLit(u, "abar", mu_u),),
    nprem=(),
    qprem=(),
    conclusion=PositiveLit(plus(u, v), "abar", mu_u),
)

y2, w, x = Var("y2"), Var("w"), Var("x")
mu2 = indexed_dist_var("mu2", y2)
mu_w, mu_x = DistVar("mu_w"), DistVar("mu_x")
r4 = Rule(
    "sync",
    pprem=(
        FamilyPremise(((y2, "Y2"),), PositiveLit(y2, "b", mu2)),
        PositiveLit(w, "a", mu_w),
        PositiveLit(x, "abar", mu_x),
    ),
    nprem=(),
    qprem=(QuantLit(parallel(mu_w, mu_x), SetRef("Y2"), ">=", Fraction(1, 2)),),
    conclusion=PositiveLit(par(w, x), "tau", parallel(mu_w, mu_x)),
)

y3, y, z = Var("y3"), Var("y"), Var("z")
mu3 = indexed_dist_var("mu3", y3)
mu_par = DistVar("mu_par")
r5 = Rule(
    "ok_step",
    pprem=(
        FamilyPremise(((y3, "Y3"),), PositiveLit(y3, "ok", mu3)),
        PositiveLit(par(y, z), "tau", mu_par),
    ),
    nprem=(),
    qprem=(QuantLit(mu_par, SetRef("Y3"), ">=", Fraction(1, 5)),),
    conclusion=PositiveLit(par(y, z), "ok", indexed_dist_var("mu3", member_var("Y3", 0))),
)

ptss = PTSS(sig, (r1, r2, r3, r4, r5), frozenset({"Y1", "Y2", "Y3"}), {})

# structure: r5 at the root, r4 under its tau premise, r2/r3 under sync, r1 under r2
ps = ProofStructure(
    rules=(r1, r2, r3, r4, r5),
    root=4,
    links=(
        Link(child=3, parent=4, slot=1),
        Link(child=1, parent=3, slot=1),
        Link(child=2, parent=3, slot=2),
        Link(child=0, parent=1, slot=1),
    ),
)
print("depth:", ps.depth())

sigma = Substitution.of(
    term_map={s: a, y1: a, w: plus(a, t), x: plus(u, v), y: plus(a, t), z: plus(u, v)},
    dist_map={
        mu_s: Dirac(a),
        DistVar("mu1[y1]"): Dirac(a),
        mu_w: Dirac(a),
        mu_x: mu_u,
        mu_par: parallel(Dirac(a), mu_u),
    },
)
print("matches:", match_proof_structure(ps, sigma))
derived = provable_rule_of(ps, sigma, name="rule1")
r = derived.rule
print("depth recorded:", derived.depth)
print("conclusion:", r.conclusion)
print("positive premises:")
for p in r.pprem:
    print("   ", p)
print("negative premises:", r.nprem)
print("quantitative premises:")
for q in r.qprem:
    print("   ", q)

# expected shape
exp_concl = PositiveLit(par(plus(a, t), plus(u, v)), "ok", indexed_dist_var("mu3", member_var("Y3", 0)))
assert r.conclusion == exp_concl, r.conclusion
exp_pp = {
    PositiveLit(u, "abar", mu_u),
    FamilyPremise(((y2, "Y2"),), PositiveLit(y2, "b", mu2)),
    FamilyPremise(((y3, "Y3"),), PositiveLit(y3, "ok", mu3)),
}
assert set(r.pprem) == exp_pp, r.pprem
exp_qp = {
    QuantLit(parallel(Dirac(a), mu_u), SetRef("Y2"), ">=", Fraction(1, 2)),
    QuantLit(parallel(Dirac(a), mu_u), SetRef("Y3"), ">=", Fraction(1, 5)),
}
assert set(r.qprem) == exp_qp, r.qprem
assert not r.nprem
print("OK: derived rule matches the expected one exactly")
