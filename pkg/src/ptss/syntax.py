"""Concrete syntax: lexer, parser, and canonical renderer for rule files.

The parser never raises on bad input; it records diagnostics with line and
column and resynchronises at the next separator.  Rendering then parsing a
parsed file yields the same structures back.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .dist import (
    Context,
    Convex,
    ConvexPart,
    Dirac,
    DistTerm,
    Hole,
    IDENTITY_CTX,
    dist_term_vars_of,
)
from .rules import (
    FamilyPremise,
    NegativeLit,
    PTSS,
    PositiveLit,
    Premise,
    QuantLit,
    Rule,
    SetRef,
    literal_term_vars,
    premise_term_vars,
)
from .semantics import StratPattern, Stratification, UniverseSpec
from .terms import (
    App,
    DistVar,
    Signature,
    Term,
    Var,
    check_term,
    is_closed_term,
    split_member,
    term_vars,
)

PUNCT = ("-/->", "->", ">=", "<=", "{", "}", "(", ")", "[", "]", ";", ",", ":", "*", "/", "<", ">", "-", "=")
OP_CHARS = set("+|&@^~!?%$")


@dataclass(frozen=True)
class Token:
    kind: str  # name, number, op, punct, eof
    text: str
    line: int
    col: int


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # error | warning
    line: int
    col: int
    message: str
    code: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.severity} [{self.code}] {self.message}"


def tokenize(text: str) -> tuple[list[Token], list[Diagnostic]]:
    toks: list[Token] = []
    diags: list[Diagnostic] = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            toks.append(Token("name", text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            toks.append(Token("number", text[i:j], line, col))
            col += j - i
            i = j
            continue
        for p in PUNCT:
            if text.startswith(p, i):
                toks.append(Token("punct", p, line, col))
                i += len(p)
                col += len(p)
                break
        else:
            if c in OP_CHARS:
                j = i
                while j < n and text[j] in OP_CHARS:
                    j += 1
                toks.append(Token("op", text[i:j], line, col))
                col += j - i
                i = j
            else:
                diags.append(Diagnostic("error", line, col, f"stray character {c!r}", "L001"))
                i += 1
                col += 1
    toks.append(Token("eof", "", line, col))
    return toks, diags


# -- parsed but unresolved pieces ------------------------------------------------------


@dataclass
class RawQuant:
    dist: DistTerm
    witnesses: list[Term]
    setref_candidate: str | None
    cmp: str
    bound: Fraction


@dataclass
class SpecFile:
    ptss: PTSS | None
    strat: Stratification | None
    universe: UniverseSpec | None
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)


class Parser:
    def __init__(self, text: str) -> None:
        self.tokens, self.diags = tokenize(text)
        self.pos = 0
        self.functions: list[tuple[str, int]] = []
        self.infix: set[str] = set()
        self.labels: list[str] = []
        self.families: list[str] = []
        self.varsets: dict[str, tuple[Term, ...]] = {}
        self.rules: list[tuple[str, list, object]] = []
        self.strat: Stratification | None = None
        self.universe: UniverseSpec | None = None

    # -- token plumbing
    def peek(self, k: int = 0) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def at(self, kind: str, text: str | None = None, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind == kind and (text is None or t.text == text)

    def eat(self) -> Token:
        t = self.tokens[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, message: str, code: str, tok: Token | None = None) -> None:
        tok = tok or self.peek()
        self.diags.append(Diagnostic("error", tok.line, tok.col, message, code))

    def warn(self, message: str, code: str, tok: Token | None = None) -> None:
        tok = tok or self.peek()
        self.diags.append(Diagnostic("warning", tok.line, tok.col, message, code))

    def expect(self, kind: str, text: str | None = None) -> Token | None:
        if self.at(kind, text):
            return self.eat()
        want = text or kind
        self.error(f"expected {want!r}, found {self.peek().text!r}", "P001")
        return None

    def sync(self, stops: tuple[str, ...] = (";", "}")) -> None:
        depth = 0
        while not self.at("eof"):
            t = self.peek()
            if t.kind == "punct":
                if t.text == "{":
                    depth += 1
                elif t.text == "}" and depth > 0:
                    depth -= 1
                elif depth == 0 and t.text in stops:
                    return
            self.eat()

    # -- entry
    def parse(self) -> SpecFile:
        while not self.at("eof"):
            tok = self.peek()
            if tok.kind != "name":
                self.error(f"expected a block, found {tok.text!r}", "P002")
                self.eat()
                continue
            handler = {
                "signature": self.block_signature,
                "labels": self.block_labels,
                "family": self.block_family,
                "varset": self.block_varset,
                "rule": self.block_rule,
                "strata": self.block_strata,
                "universe": self.block_universe,
            }.get(tok.text)
            if handler is None:
                self.error(f"unknown block {tok.text!r}", "P003")
                self.eat()
                self.sync(("}",))
                if self.at("punct", "}"):
                    self.eat()
                continue
            handler()
        return self.resolve()

    # -- blocks
    def block_signature(self) -> None:
        self.eat()
        if not self.expect("punct", "{"):
            return
        while not self.at("punct", "}") and not self.at("eof"):
            tok = self.peek()
            if tok.kind in ("name", "op"):
                name = self.eat().text
                if self.expect("punct", "/") is None:
                    self.sync()
                else:
                    num = self.expect("number")
                    arity = int(num.text) if num and num.text.isdigit() else 0
                    infix = False
                    if self.at("name", "infix"):
                        self.eat()
                        infix = True
                    self.functions.append((name, arity))
                    if infix:
                        self.infix.add(name)
            else:
                self.error(f"expected a symbol, found {tok.text!r}", "P004")
                self.sync()
            if self.at("punct", ";"):
                self.eat()
        self.expect("punct", "}")

    def block_labels(self) -> None:
        self.eat()
        if not self.expect("punct", "{"):
            return
        while not self.at("punct", "}") and not self.at("eof"):
            if self.at("name"):
                self.labels.append(self.eat().text)
            else:
                self.error(f"expected a label, found {self.peek().text!r}", "P005")
                self.eat()
            if self.at("punct", ","):
                self.eat()
        self.expect("punct", "}")

    def block_family(self) -> None:
        self.eat()
        tok = self.expect("name")
        if tok:
            self.families.append(tok.text)
        if self.at("punct", ";"):
            self.eat()

    def block_varset(self) -> None:
        self.eat()
        tok = self.expect("name")
        if not self.expect("punct", "{"):
            return
        elems: list[Term] = []
        while not self.at("punct", "}") and not self.at("eof"):
            t = self.parse_term()
            if t is not None:
                elems.append(t)
            if self.at("punct", ","):
                self.eat()
            elif not self.at("punct", "}"):
                self.sync((",", "}"))
        self.expect("punct", "}")
        if tok:
            self.varsets[tok.text] = tuple(elems)

    def block_rule(self) -> None:
        self.eat()
        tok = self.expect("name")
        name = tok.text if tok else f"rule{len(self.rules)}"
        if not self.expect("punct", "{"):
            return
        premises: list = []
        conclusion = None
        while not self.at("punct", "}") and not self.at("eof"):
            if self.at("name", "premises"):
                self.eat()
                if self.expect("punct", "{"):
                    while not self.at("punct", "}") and not self.at("eof"):
                        p = self.parse_premise()
                        if p is not None:
                            premises.append(p)
                        if self.at("punct", ";"):
                            self.eat()
                        elif not self.at("punct", "}"):
                            self.sync()
                    self.expect("punct", "}")
            elif self.at("name", "conclusion"):
                self.eat()
                if self.expect("punct", "{"):
                    conclusion = self.parse_literal()
                    if self.at("punct", ";"):
                        self.eat()
                    self.expect("punct", "}")
            else:
                self.error(f"expected premises or conclusion, found {self.peek().text!r}", "P006")
                self.eat()
                self.sync()
        self.expect("punct", "}")
        self.rules.append((name, premises, conclusion))

    def block_strata(self) -> None:
        start = self.eat()
        strict = False
        if self.at("name", "strict"):
            self.eat()
            strict = True
        if not self.expect("punct", "{"):
            return
        patterns: list[StratPattern] = []
        default = 0
        while not self.at("punct", "}") and not self.at("eof"):
            if self.at("name", "default"):
                self.eat()
                self.expect("punct", ":")
                num = self.expect("number")
                if num:
                    default = int(num.text)
            else:
                src = self.parse_term()
                self.expect("punct", "-")
                label: str | None = None
                if self.at("punct", "*"):
                    self.eat()
                elif self.at("name"):
                    label = self.eat().text
                else:
                    self.error("expected a label or *", "P007")
                self.expect("punct", "->")
                self.expect("punct", ":")
                num = self.expect("number")
                if src is not None and num is not None:
                    patterns.append(StratPattern(src, label, int(num.text)))
            if self.at("punct", ";"):
                self.eat()
            elif not self.at("punct", "}"):
                self.sync()
        self.expect("punct", "}")
        if self.strat is not None:
            self.error("more than one strata block", "P008", start)
        self.strat = Stratification(tuple(patterns), default, strict)

    def block_universe(self) -> None:
        start = self.eat()
        if not self.expect("punct", "{"):
            return
        init: list[Term] = []
        depth = 1
        while not self.at("punct", "}") and not self.at("eof"):
            if self.at("name", "init"):
                self.eat()
                self.expect("punct", ":")
                while True:
                    t = self.parse_term()
                    if t is not None:
                        init.append(t)
                    if self.at("punct", ","):
                        self.eat()
                    else:
                        break
            elif self.at("name", "depth"):
                self.eat()
                self.expect("punct", ":")
                num = self.expect("number")
                if num:
                    depth = int(num.text)
            else:
                self.error(f"expected init or depth, found {self.peek().text!r}", "P009")
                self.eat()
            if self.at("punct", ";"):
                self.eat()
        self.expect("punct", "}")
        if self.universe is not None:
            self.error("more than one universe block", "P010", start)
        self.universe = UniverseSpec(tuple(init), depth)

    # -- premises and literals
    def parse_premise(self):
        if self.at("name", "forall"):
            self.eat()
            binders: list[tuple[Var, str]] = []
            while True:
                v = self.expect("name")
                self.expect("name", "in")
                fam = self.expect("name")
                if v and fam:
                    binders.append((Var(v.text), fam.text))
                if self.at("punct", ","):
                    self.eat()
                else:
                    break
            self.expect("punct", ":")
            lit = self.parse_literal()
            if lit is None or not binders:
                return None
            if isinstance(lit, RawQuant):
                self.error("a quantitative premise cannot be quantified", "P011")
                return None
            return ("family", tuple(binders), lit)
        lit = self.parse_literal()
        return lit if lit is None else ("plain", None, lit)

    def parse_literal(self):
        """Either ``term -a-> dterm`` / ``term -a-/->`` or ``dterm(W) cmp q``.

        Both sides start with similar prefixes; try the transition shape
        first and fall back on the quantitative shape.
        """
        save = self.pos
        nd = len(self.diags)
        t = self.parse_term()
        if t is not None and self.at("punct", "-") and self.peek(1).kind == "name":
            self.eat()
            label = self.eat().text
            if self.at("punct", "-/->"):
                self.eat()
                return NegativeLit(t, label)
            if self.expect("punct", "->") is None:
                return None
            dt = self.parse_dterm()
            return None if dt is None else PositiveLit(t, label, dt)
        self.pos = save
        del self.diags[nd:]
        return self.parse_quant()

    def parse_quant(self):
        dt = self.parse_dterm(no_app_tail=True)
        if dt is None:
            return None
        if not self.expect("punct", "("):
            return None
        witnesses: list[Term] = []
        while not self.at("punct", ")") and not self.at("eof"):
            w = self.parse_term()
            if w is None:
                break
            witnesses.append(w)
            if self.at("punct", ","):
                self.eat()
        self.expect("punct", ")")
        cmp_tok = self.peek()
        if cmp_tok.kind == "punct" and cmp_tok.text in (">", ">=", "<", "<="):
            self.eat()
        else:
            self.error(f"expected a comparison, found {cmp_tok.text!r}", "P012")
            return None
        bound = self.parse_rational()
        if bound is None:
            return None
        setref = None
        if len(witnesses) == 1 and isinstance(witnesses[0], Var):
            setref = witnesses[0].name
        return RawQuant(dt, witnesses, setref, cmp_tok.text, bound)

    def parse_rational(self) -> Fraction | None:
        num = self.expect("number")
        if num is None:
            return None
        if "." in num.text:
            value = Fraction(num.text)
        else:
            value = Fraction(int(num.text))
            if self.at("punct", "/"):
                self.eat()
                den = self.expect("number")
                if den is None or not den.text.isdigit() or int(den.text) == 0:
                    self.error("bad denominator", "P013", num)
                    return None
                value = Fraction(int(num.text), int(den.text))
        return value

    # -- terms
    def parse_term(self) -> Term | None:
        left = self.parse_term_atom()
        if left is None:
            return None
        while self.at("op") or (self.at("name") and self.peek().text in self.infix):
            op = self.eat().text
            right = self.parse_term_atom()
            if right is None:
                return None
            left = App(op, (left, right))
        return left

    def parse_term_atom(self) -> Term | None:
        if self.at("punct", "("):
            self.eat()
            t = self.parse_term()
            self.expect("punct", ")")
            return t
        tok = self.peek()
        if tok.kind == "name":
            self.eat()
            name = tok.text
            if self.at("punct", "["):
                self.eat()
                idx = self.expect("number")
                self.expect("punct", "]")
                if idx is None:
                    return None
                return Var(f"{name}[{int(idx.text)}]")
            if self.at("punct", "("):
                self.eat()
                args: list[Term] = []
                while not self.at("punct", ")") and not self.at("eof"):
                    a = self.parse_term()
                    if a is None:
                        return None
                    args.append(a)
                    if self.at("punct", ","):
                        self.eat()
                self.expect("punct", ")")
                return App(name, tuple(args))
            if any(f == name for f, a in self.functions if a == 0):
                return App(name, ())
            return Var(name)
        self.error(f"expected a term, found {tok.text!r}", "P014")
        return None

    # -- distribution expressions
    def parse_dterm(self, no_app_tail: bool = False) -> DistTerm | None:
        """``no_app_tail`` stops a bare name from eating a following ``(``,
        so quantitative literals can parse ``mu(W) >= q``."""
        if self._weight_ahead():
            parts: list[tuple[Fraction, DistTerm]] = []
            while True:
                w = self.parse_rational()
                if w is None or not self.expect("punct", "*"):
                    return None
                atom = self.parse_datom(no_app_tail=True)
                if atom is None:
                    return None
                parts.append((w, atom))
                if self.at("op", "+"):
                    self.eat()
                else:
                    break
            try:
                return _convex(parts)
            except ValueError as exc:
                self.error(str(exc), "P019")
                return None
        left = self.parse_datom(no_app_tail)
        if left is None:
            return None
        while self.at("op") or (self.at("name") and self.peek().text in self.infix):
            op = self.eat().text
            right = self.parse_datom(no_app_tail=True)
            if right is None:
                return None
            left = Convex((ConvexPart(Fraction(1), _pair_ctx(op), (left, right)),))
        return left

    def _weight_ahead(self) -> bool:
        if not self.at("number"):
            return False
        k = 1
        if self.at("punct", "/", 1) and self.peek(2).kind == "number":
            k = 3
        return self.at("punct", "*", k)

    def parse_datom(self, no_app_tail: bool = False) -> DistTerm | None:
        if self.at("punct", "("):
            self.eat()
            dt = self.parse_dterm()
            self.expect("punct", ")")
            return dt
        if self.at("name", "delta"):
            self.eat()
            if not self.expect("punct", "("):
                return None
            t = self.parse_term()
            self.expect("punct", ")")
            return None if t is None else Dirac(t)
        tok = self.peek()
        if tok.kind != "name":
            self.error(f"expected a distribution expression, found {tok.text!r}", "P015")
            return None
        name = tok.text
        arity = next((a for f, a in self.functions if f == name), None)
        if arity is not None and arity > 0 and self.at("punct", "(", 1):
            save = self.pos
            t = self.parse_term_atom()
            if t is None:
                return None
            holes = _holes_of(t)
            if holes:
                ctx, err = _to_context(t)
                if ctx is None:
                    self.error(err or "bad context", "P016", tok)
                    return None
                if not self.expect("punct", "("):
                    return None
                args: list[DistTerm] = []
                while not self.at("punct", ")") and not self.at("eof"):
                    a = self.parse_dterm()
                    if a is None:
                        return None
                    args.append(a)
                    if self.at("punct", ","):
                        self.eat()
                self.expect("punct", ")")
                if len(args) != ctx.holes:
                    self.error("argument count does not match context holes", "P017", tok)
                    return None
                return Convex((ConvexPart(Fraction(1), ctx, tuple(args)),))
            return Dirac(t)
        self.eat()
        if self.at("punct", "["):
            self.eat()
            inner = self.expect("name")
            idx_txt = None
            if inner is not None:
                if self.at("punct", "["):
                    self.eat()
                    num = self.expect("number")
                    self.expect("punct", "]")
                    if num is None:
                        return None
                    idx_txt = f"{inner.text}[{int(num.text)}]"
                else:
                    idx_txt = inner.text
            self.expect("punct", "]")
            if idx_txt is None:
                return None
            return DistVar(f"{name}[{idx_txt}]")
        if arity == 0:
            return Dirac(App(name, ()))
        if arity is not None:
            if no_app_tail:
                return DistVar(name)
            self.error(f"function {name!r} needs arguments", "P018", tok)
            return None
        return DistVar(name)

    # -- resolution into the typed system
    def resolve(self) -> SpecFile:
        diags = self.diags
        if not self.functions and not self.labels and not self.rules:
            return SpecFile(None, self.strat, self.universe, diags)
        try:
            sig = Signature(tuple(self.functions), tuple(self.labels), frozenset(self.infix))
        except ValueError as exc:
            diags.append(Diagnostic("error", 1, 1, str(exc), "R001"))
            return SpecFile(None, self.strat, self.universe, diags)

        known_sets = set(self.families) | set(self.varsets)
        rules: list[Rule] = []
        names: set[str] = set()
        for name, raw_premises, conclusion in self.rules:
            if name in names:
                diags.append(Diagnostic("error", 1, 1, f"duplicate rule name {name!r}", "R002"))
                continue
            names.add(name)
            pp: list[Premise] = []
            np: list[Premise] = []
            qp: list[QuantLit] = []
            bad = False
            for kind, binders, lit in raw_premises:
                lit = self._resolve_lit(lit, known_sets, diags, name)
                if lit is None:
                    bad = True
                    continue
                if kind == "family":
                    for _, fam in binders:
                        if fam not in known_sets:
                            diags.append(
                                Diagnostic("error", 1, 1, f"{name}: unknown index set {fam!r}", "R003")
                            )
                            bad = True
                    if bad:
                        continue
                    prem = FamilyPremise(binders, lit)
                    (pp if prem.is_positive else np).append(prem)
                elif isinstance(lit, PositiveLit):
                    pp.append(lit)
                elif isinstance(lit, NegativeLit):
                    np.append(lit)
                else:
                    qp.append(lit)
            if conclusion is not None:
                conclusion = self._resolve_lit(conclusion, known_sets, diags, name)
            if not isinstance(conclusion, PositiveLit):
                diags.append(
                    Diagnostic("error", 1, 1, f"{name}: conclusion must be a transition", "R004")
                )
                bad = True
            if bad:
                continue
            for lit in [p for p in pp + np if not isinstance(p, FamilyPremise)] + qp + [conclusion]:
                self._check_labels_terms(lit, sig, diags, name)
            for p in pp + np:
                if isinstance(p, FamilyPremise):
                    self._check_labels_terms(p.literal, sig, diags, name)
            try:
                rules.append(Rule(name, tuple(pp), tuple(np), tuple(qp), conclusion))
            except (TypeError, ValueError) as exc:
                diags.append(Diagnostic("error", 1, 1, f"{name}: {exc}", "R005"))
                continue
            # A variable that only occurs inside the conclusion target ranges
            # over every closed term; that is almost always a typo for a
            # distribution variable or a context application.
            bound: set[Var] = set(term_vars(conclusion.source))
            for p in pp + np:
                bound |= premise_term_vars(p)
                if isinstance(p, FamilyPremise):
                    bound |= {b for b, _ in p.binders}
            for q in qp:
                bound |= literal_term_vars(q)
            loose = sorted(
                v.name
                for v in dist_term_vars_of(conclusion.target)
                if v not in bound and split_member(v.name) is None
            )
            if loose:
                diags.append(Diagnostic(
                    "warning", 1, 1,
                    f"{name}: conclusion target quantifies {', '.join(loose)} "
                    "over the whole universe",
                    "R010",
                ))

        ptss = None
        try:
            ptss = PTSS(
                sig,
                tuple(rules),
                frozenset(self.families),
                tuple(sorted(self.varsets.items())),
            )
        except (TypeError, ValueError) as exc:
            diags.append(Diagnostic("error", 1, 1, str(exc), "R006"))
        if self.universe is not None:
            for t in self.universe.init:
                if not is_closed_term(t):
                    diags.append(
                        Diagnostic("error", 1, 1, f"universe term {t} is not closed", "R007")
                    )
        return SpecFile(ptss, self.strat, self.universe, diags)

    def _resolve_lit(self, lit, known_sets, diags, rule):
        if isinstance(lit, RawQuant):
            # A varset name is sugar for its declared elements; only family
            # names survive as symbolic set references.
            if lit.setref_candidate and lit.setref_candidate in self.varsets:
                wit: SetRef | tuple[Term, ...] = self.varsets[lit.setref_candidate]
            elif lit.setref_candidate and lit.setref_candidate in known_sets:
                wit = SetRef(lit.setref_candidate)
            else:
                wit = tuple(lit.witnesses)
                if not wit:
                    diags.append(
                        Diagnostic("error", 1, 1, f"{rule}: empty witness set", "R008")
                    )
                    return None
            try:
                return QuantLit(lit.dist, wit, lit.cmp, lit.bound)
            except (TypeError, ValueError) as exc:
                diags.append(Diagnostic("error", 1, 1, f"{rule}: {exc}", "R009"))
                return None
        return lit

    def _check_labels_terms(self, lit, sig: Signature, diags, rule) -> None:
        label = getattr(lit, "label", None)
        if label is not None and label not in sig.labels:
            diags.append(Diagnostic("error", 1, 1, f"{rule}: unknown label {label!r}", "R010"))
        for t in _literal_terms(lit):
            try:
                check_term(t, sig)
            except ValueError as exc:
                diags.append(Diagnostic("error", 1, 1, f"{rule}: {exc}", "R011"))


def _literal_terms(lit) -> list[Term]:
    if isinstance(lit, PositiveLit):
        return [lit.source]
    if isinstance(lit, NegativeLit):
        return [lit.source]
    if isinstance(lit, QuantLit) and not isinstance(lit.witnesses, SetRef):
        return list(lit.witnesses)
    return []


def _holes_of(t: Term) -> set[int]:
    if isinstance(t, Var):
        if t.name.startswith("_") and t.name[1:].isdigit():
            return {int(t.name[1:])}
        return set()
    return set().union(*(_holes_of(a) for a in t.args)) if t.args else set()


def _hole_term(t: Term):
    if isinstance(t, Var) and t.name.startswith("_") and t.name[1:].isdigit():
        return Hole(int(t.name[1:]))
    if isinstance(t, App):
        return App(t.func, tuple(_hole_term(a) for a in t.args))
    return t


def _to_context(t: Term) -> tuple[Context | None, str | None]:
    try:
        return Context(_hole_term(t)), None
    except ValueError as exc:
        return None, str(exc)


def _pair_ctx(func: str) -> Context:
    return Context(App(func, (Hole(1), Hole(2))))


def _convex(parts: list[tuple[Fraction, DistTerm]]) -> DistTerm:
    """Weighted sum, flattened so rendering and reparsing is stable."""
    flat: list[ConvexPart] = []
    for w, atom in parts:
        if isinstance(atom, Convex):
            flat.extend(ConvexPart(w * p.weight, p.context, p.args) for p in atom.parts)
        else:
            flat.append(ConvexPart(w, IDENTITY_CTX, (atom,)))
    if len(flat) == 1 and flat[0].weight == 1 and flat[0].context == IDENTITY_CTX:
        return flat[0].args[0]
    return Convex(tuple(flat))


def parse_spec(text: str) -> SpecFile:
    return Parser(text).parse()


def parse_term(text: str, sig: Signature | None = None) -> Term | None:
    """One term on its own, for command-line arguments."""
    p = Parser(text)
    if sig is not None:
        p.functions = list(sig.functions)
        p.infix = set(sig.infix)
    t = p.parse_term()
    if t is None or not p.at("eof") or any(d.severity == "error" for d in p.diags):
        return None
    return t


# -- canonical rendering ---------------------------------------------------------------


def render_term(t: Term, sig: Signature | None = None, nested: bool = False) -> str:
    if isinstance(t, Var):
        return t.name
    infix = sig.infix if sig else frozenset()
    if t.func in infix and len(t.args) == 2:
        body = (
            f"{render_term(t.args[0], sig, True)} {t.func} {render_term(t.args[1], sig, True)}"
        )
        return f"({body})" if nested else body
    if not t.args:
        return t.func
    return f"{t.func}({', '.join(render_term(a, sig) for a in t.args)})"


def _render_skeleton(t, sig: Signature | None) -> str:
    if isinstance(t, Hole):
        return f"_{t.index}"
    if isinstance(t, Var):
        return t.name
    if not t.args:
        return t.func
    return f"{t.func}({', '.join(_render_skeleton(a, sig) for a in t.args)})"


def render_dterm(dt: DistTerm, sig: Signature | None = None, nested: bool = False) -> str:
    if isinstance(dt, DistVar):
        return dt.name
    if isinstance(dt, Dirac):
        if isinstance(dt.term, App) and not dt.term.args:
            return dt.term.func
        return f"delta({render_term(dt.term, sig)})"
    parts = dt.parts
    if len(parts) == 1 and parts[0].weight == 1:
        p = parts[0]
        if p.context == IDENTITY_CTX:
            return render_dterm(p.args[0], sig, nested)
        infix = sig.infix if sig else frozenset()
        skel = p.context.skeleton
        if (
            isinstance(skel, App)
            and skel.func in infix
            and len(skel.args) == 2
            and skel.args == (Hole(1), Hole(2))
        ):
            body = (
                f"{render_dterm(p.args[0], sig, True)} {skel.func} "
                f"{render_dterm(p.args[1], sig, True)}"
            )
            return f"({body})" if nested else body
        return (
            f"{_render_skeleton(skel, sig)}"
            f"({', '.join(render_dterm(a, sig) for a in p.args)})"
        )
    chunks = []
    infix = sig.infix if sig else frozenset()
    for p in parts:
        skel = p.context.skeleton
        if p.context == IDENTITY_CTX:
            inner = render_dterm(p.args[0], sig, True)
        elif (
            isinstance(skel, App)
            and skel.func in infix
            and skel.args == (Hole(1), Hole(2))
        ):
            inner = (
                f"({render_dterm(p.args[0], sig, True)} {skel.func} "
                f"{render_dterm(p.args[1], sig, True)})"
            )
        else:
            inner = (
                f"{_render_skeleton(skel, sig)}"
                f"({', '.join(render_dterm(a, sig) for a in p.args)})"
            )
        chunks.append(f"{_frac(p.weight)} * {inner}")
    body = " + ".join(chunks)
    return f"({body})" if nested else body


def _frac(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def render_literal(lit, sig: Signature | None = None) -> str:
    if isinstance(lit, PositiveLit):
        return f"{render_term(lit.source, sig)} -{lit.label}-> {render_dterm(lit.target, sig, True)}"
    if isinstance(lit, NegativeLit):
        return f"{render_term(lit.source, sig)} -{lit.label}-/->"
    wit = (
        lit.witnesses.name
        if isinstance(lit.witnesses, SetRef)
        else ", ".join(render_term(w, sig) for w in lit.witnesses)
    )
    return f"{render_dterm(lit.dist, sig, True)}({wit}) {lit.cmp} {_frac(lit.bound)}"


def render_premise(p, sig: Signature | None = None) -> str:
    if isinstance(p, FamilyPremise):
        binders = ", ".join(f"{v.name} in {fam}" for v, fam in p.binders)
        return f"forall {binders}: {render_literal(p.literal, sig)}"
    return render_literal(p, sig)


def render_rule(r: Rule, sig: Signature | None = None) -> str:
    lines = [f"rule {r.name} {{"]
    prems = list(r.pprem) + list(r.nprem) + list(r.qprem)
    if prems:
        lines.append("  premises {")
        for p in prems:
            lines.append(f"    {render_premise(p, sig)};")
        lines.append("  }")
    lines.append(f"  conclusion {{ {render_literal(r.conclusion, sig)} }}")
    lines.append("}")
    return "\n".join(lines)


def render_spec(
    ptss: PTSS,
    strat: Stratification | None = None,
    universe: UniverseSpec | None = None,
) -> str:
    sig = ptss.signature
    out: list[str] = ["signature {"]
    for f, a in sig.functions:
        suffix = " infix" if f in sig.infix else ""
        out.append(f"  {f}/{a}{suffix};")
    out.append("}")
    out.append("labels { " + ", ".join(sig.labels) + " }")
    for fam in sorted(ptss.families):
        out.append(f"family {fam};")
    for name, elems in sorted(ptss.varsets):
        body = ", ".join(render_term(t, sig) for t in elems)
        out.append(f"varset {name} {{ {body} }}")
    for r in ptss.rules:
        out.append(render_rule(r, sig))
    if strat is not None:
        head = "strata strict {" if strat.strict else "strata {"
        out.append(head)
        for p in strat.patterns:
            lab = p.label if p.label is not None else "*"
            out.append(f"  {render_term(p.source, sig)} -{lab}->: {p.stratum};")
        out.append(f"  default: {strat.default};")
        out.append("}")
    if universe is not None:
        out.append("universe {")
        out.append("  init: " + ", ".join(render_term(t, sig) for t in universe.init) + ";")
        out.append(f"  depth: {universe.depth};")
        out.append("}")
    return "\n".join(out) + "\n"
