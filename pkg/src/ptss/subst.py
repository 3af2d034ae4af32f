"""Kind-preserving substitutions and first-order unification.

A substitution maps term variables to terms and distribution variables to
distribution expressions; everything outside its domain is fixed.  Point
masses substitute inside their term, convex combinations substitute through
their arguments while the weights and contexts stay untouched.

Unification treats convex combinations rigidly: two combinations unify only
when their weight lists and contexts agree positionally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .dist import Convex, ConvexPart, Dirac, DistTerm, dist_vars_of, dist_term_vars_of
from .terms import App, DistVar, Term, Var, term_vars


class NotUnifiable(Exception):
    """No unifier exists for the given problem."""


@dataclass(frozen=True)
class Substitution:
    term_map: tuple[tuple[Var, Term], ...] = ()
    dist_map: tuple[tuple[DistVar, DistTerm], ...] = ()

    @staticmethod
    def of(
        term_map: Mapping[Var, Term] | None = None,
        dist_map: Mapping[DistVar, DistTerm] | None = None,
    ) -> "Substitution":
        tm = tuple(sorted(
            ((v, t) for v, t in (term_map or {}).items() if v != t),
            key=lambda e: e[0].name,
        ))
        dm = tuple(sorted(
            ((v, d) for v, d in (dist_map or {}).items() if v != d),
            key=lambda e: e[0].name,
        ))
        for v, t in tm:
            if not isinstance(v, Var) or isinstance(t, (DistVar, Dirac, Convex)):
                raise TypeError(f"term binding of wrong kind: {v!r} -> {t!r}")
        for v, d in dm:
            if not isinstance(v, DistVar) or not isinstance(d, (DistVar, Dirac, Convex)):
                raise TypeError(f"distribution binding of wrong kind: {v!r} -> {d!r}")
        return Substitution(tm, dm)

    def terms(self) -> dict[Var, Term]:
        return dict(self.term_map)

    def dists(self) -> dict[DistVar, DistTerm]:
        return dict(self.dist_map)

    @property
    def is_identity(self) -> bool:
        return not self.term_map and not self.dist_map

    def domain(self) -> tuple[set[Var], set[DistVar]]:
        return {v for v, _ in self.term_map}, {v for v, _ in self.dist_map}

    def apply_term(self, t: Term) -> Term:
        tm = self.terms()

        def go(u: Term) -> Term:
            if isinstance(u, Var):
                return tm.get(u, u)
            if not u.args:
                return u
            return App(u.func, tuple(go(a) for a in u.args))

        return go(t)

    def apply_dist(self, dt: DistTerm) -> DistTerm:
        dm = self.dists()

        def go(d: DistTerm) -> DistTerm:
            if isinstance(d, DistVar):
                return dm.get(d, d)
            if isinstance(d, Dirac):
                return Dirac(self.apply_term(d.term))
            return Convex(tuple(
                ConvexPart(p.weight, p.context, tuple(go(a) for a in p.args))
                for p in d.parts
            ))

        return go(dt)

    def compose(self, inner: "Substitution") -> "Substitution":
        """``self . inner``: apply ``inner`` first, then ``self``."""
        tm: dict[Var, Term] = {v: self.apply_term(t) for v, t in inner.term_map}
        for v, t in self.term_map:
            tm.setdefault(v, t)
        dm: dict[DistVar, DistTerm] = {v: self.apply_dist(d) for v, d in inner.dist_map}
        for v, d in self.dist_map:
            dm.setdefault(v, d)
        return Substitution.of(tm, dm)


IDENTITY = Substitution()

TermEq = tuple[Term, Term]
DistEq = tuple[DistTerm, DistTerm]


def unify(
    term_eqs: Sequence[TermEq] = (),
    dist_eqs: Sequence[DistEq] = (),
    bind_first: Iterable[Var | DistVar] = (),
) -> Substitution:
    """Most general unifier of the given equations.

    ``bind_first`` biases variable-variable orientation: a variable in the
    set is bound in preference to one outside it.  Raises NotUnifiable.
    """
    prefer = set(bind_first)
    sol_t: dict[Var, Term] = {}
    sol_d: dict[DistVar, DistTerm] = {}

    def res_t(t: Term) -> Term:
        if isinstance(t, Var):
            seen = set()
            while isinstance(t, Var) and t in sol_t:
                if t in seen:  # pragma: no cover - invariant guards this
                    raise NotUnifiable("variable cycle")
                seen.add(t)
                t = sol_t[t]
            if isinstance(t, Var):
                return t
        if isinstance(t, Var):
            return t
        if not t.args:
            return t
        return App(t.func, tuple(res_t(a) for a in t.args))

    def res_d(d: DistTerm) -> DistTerm:
        if isinstance(d, DistVar):
            seen = set()
            while isinstance(d, DistVar) and d in sol_d:
                if d in seen:  # pragma: no cover
                    raise NotUnifiable("variable cycle")
                seen.add(d)
                d = sol_d[d]
            if isinstance(d, DistVar):
                return d
        if isinstance(d, DistVar):
            return d
        if isinstance(d, Dirac):
            return Dirac(res_t(d.term))
        return Convex(tuple(
            ConvexPart(p.weight, p.context, tuple(res_d(a) for a in p.args))
            for p in d.parts
        ))

    def bind_t(v: Var, t: Term) -> None:
        if v in term_vars(t):
            raise NotUnifiable(f"occurs check: {v.name} in {t}")
        sol_t[v] = t

    def bind_d(v: DistVar, d: DistTerm) -> None:
        if v in dist_vars_of(d):
            raise NotUnifiable(f"occurs check: {v.name} in {d}")
        sol_d[v] = d

    twork: list[TermEq] = list(term_eqs)
    dwork: list[DistEq] = list(dist_eqs)
    while twork or dwork:
        if twork:
            a, b = twork.pop()
            a, b = res_t(a), res_t(b)
            if a == b:
                continue
            if isinstance(a, Var) or isinstance(b, Var):
                if isinstance(a, Var) and isinstance(b, Var):
                    if b in prefer and a not in prefer:
                        a, b = b, a
                elif isinstance(b, Var):
                    a, b = b, a
                bind_t(a, b)  # type: ignore[arg-type]
                continue
            if a.func != b.func or len(a.args) != len(b.args):
                raise NotUnifiable(f"clash: {a.func}/{len(a.args)} vs {b.func}/{len(b.args)}")
            twork.extend(zip(a.args, b.args))
            continue
        a, b = dwork.pop()
        a, b = res_d(a), res_d(b)
        if a == b:
            continue
        if isinstance(a, DistVar) or isinstance(b, DistVar):
            if isinstance(a, DistVar) and isinstance(b, DistVar):
                if b in prefer and a not in prefer:
                    a, b = b, a
            elif isinstance(b, DistVar):
                a, b = b, a
            bind_d(a, b)  # type: ignore[arg-type]
            continue
        if isinstance(a, Dirac) and isinstance(b, Dirac):
            twork.append((a.term, b.term))
            continue
        if isinstance(a, Convex) and isinstance(b, Convex):
            if len(a.parts) != len(b.parts):
                raise NotUnifiable("convex combinations of different length")
            for pa, pb in zip(a.parts, b.parts):
                if pa.weight != pb.weight or pa.context != pb.context:
                    raise NotUnifiable("convex combinations differ in weights or contexts")
                dwork.extend(zip(pa.args, pb.args))
            continue
        raise NotUnifiable(f"clash: {type(a).__name__} vs {type(b).__name__}")

    # Resolve chains so images mention no domain variable.
    out_t = {v: res_t(t) for v, t in sol_t.items()}
    out_d = {v: res_d(d) for v, d in sol_d.items()}
    return Substitution.of(out_t, out_d)


def mgu(rho: Substitution) -> Substitution:
    """Most general unifier of a substitution.

    The result ``s`` satisfies ``s . rho == s``, fixes every variable that
    ``rho`` fixes, and keeps variables whose ``rho`` iterates never leave the
    variables.  Raises NotUnifiable when ``rho`` has no unifier.
    """
    dom_t, dom_d = rho.domain()
    return unify(
        term_eqs=[(v, t) for v, t in rho.term_map],
        dist_eqs=[(v, d) for v, d in rho.dist_map],
        bind_first=dom_t | dom_d,
    )
