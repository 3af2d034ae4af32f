"""Signatures, process terms and the two variable kinds.

Terms are built from term variables and function applications over a
signature.  Distribution variables live in a separate namespace; they never
occur inside a term, only inside distribution expressions (see ``dist``).

Family members are ordinary term variables with a reserved spelling
``Fam[i]``; the helpers at the bottom of this module are the only place that
spelling is produced or taken apart.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator


@dataclass(frozen=True, order=True)
class Var:
    """A term variable."""

    name: str

    def __repr__(self) -> str:
        return f"Var({self.name!r})"


@dataclass(frozen=True)
class App:
    """Application of a function symbol to argument terms.

    Constants are zero-ary applications.
    """

    func: str
    args: tuple["Term", ...] = ()

    def __repr__(self) -> str:
        if not self.args:
            return f"App({self.func!r})"
        return f"App({self.func!r}, {self.args!r})"


Term = Var | App


@dataclass(frozen=True)
class DistVar:
    """A distribution variable; disjoint from term variables by type."""

    name: str

    def __repr__(self) -> str:
        return f"DistVar({self.name!r})"


@dataclass(frozen=True)
class Signature:
    """Function symbols with arities, plus the action labels.

    ``infix`` lists binary symbols rendered between their arguments.
    """

    functions: tuple[tuple[str, int], ...]
    labels: tuple[str, ...]
    infix: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        names = [f for f, _ in self.functions]
        if len(names) != len(set(names)):
            raise ValueError("duplicate function symbol")
        if len(self.labels) != len(set(self.labels)):
            raise ValueError("duplicate label")
        for f in self.infix:
            if self.arity(f) != 2:
                raise ValueError(f"infix symbol {f!r} must be binary")

    def arity(self, func: str) -> int:
        for f, n in self.functions:
            if f == func:
                return n
        raise KeyError(func)

    @property
    def function_names(self) -> tuple[str, ...]:
        return tuple(f for f, _ in self.functions)

    def constants(self) -> tuple[str, ...]:
        return tuple(f for f, n in self.functions if n == 0)


def term_vars(t: Term) -> set[Var]:
    """All variables occurring in ``t``."""
    if isinstance(t, Var):
        return {t}
    out: set[Var] = set()
    for a in t.args:
        out |= term_vars(a)
    return out


def is_closed_term(t: Term) -> bool:
    if isinstance(t, Var):
        return False
    return all(is_closed_term(a) for a in t.args)


def term_height(t: Term) -> int:
    """Height of a term; constants and variables have height 0."""
    if isinstance(t, Var) or not t.args:
        return 0
    return 1 + max(term_height(a) for a in t.args)


def term_size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    return 1 + sum(term_size(a) for a in t.args)


def term_key(t: Term):
    """Total order key; variables sort before applications."""
    if isinstance(t, Var):
        return (0, t.name)
    return (1, t.func, tuple(term_key(a) for a in t.args))


def check_term(t: Term, sig: Signature) -> None:
    """Raise ValueError on arity mismatches or unknown symbols."""
    if isinstance(t, Var):
        return
    try:
        n = sig.arity(t.func)
    except KeyError:
        raise ValueError(f"unknown function symbol {t.func!r}") from None
    if len(t.args) != n:
        raise ValueError(
            f"symbol {t.func!r} expects {n} argument(s), got {len(t.args)}"
        )
    for a in t.args:
        check_term(a, sig)


def closed_terms(sig: Signature, height: int) -> list[Term]:
    """All closed terms over ``sig`` of height at most ``height``.

    Deterministic: results are sorted by ``term_key``.
    """
    by_height: list[list[Term]] = [[App(c) for c in sig.constants()]]
    for _ in range(height):
        prev: list[Term] = [t for level in by_height for t in level]
        nxt: list[Term] = []
        for f, n in sig.functions:
            if n == 0:
                continue
            for combo in itertools.product(prev, repeat=n):
                t = App(f, combo)
                if term_height(t) == len(by_height):
                    nxt.append(t)
        by_height.append(nxt)
    out = [t for level in by_height for t in level]
    out.sort(key=term_key)
    return out


# -- fresh names -------------------------------------------------------------


class FreshNames:
    """Name supply that never collides with a given avoid set.

    >>> fn = FreshNames({"x", "x_1"})
    >>> fn.fresh("x")
    'x_2'
    >>> fn.fresh("x")
    'x_3'
    """

    def __init__(self, avoid: Iterable[str] = ()) -> None:
        self._avoid = set(avoid)

    def reserve(self, names: Iterable[str]) -> None:
        self._avoid.update(names)

    def fresh(self, base: str = "v") -> str:
        if base not in self._avoid:
            self._avoid.add(base)
            return base
        for k in itertools.count(1):
            cand = f"{base}_{k}"
            if cand not in self._avoid:
                self._avoid.add(cand)
                return cand
        raise AssertionError("unreachable")

    def fresh_many(self, base: str, count: int) -> list[str]:
        return [self.fresh(base) for _ in range(count)]


# -- family member spelling --------------------------------------------------

_MEMBER_RE = re.compile(r"^([^\[\]]+)\[(\d+)\]$")


def member_var(family: str, index: int) -> Var:
    """The ``index``-th canonical member of family ``family``."""
    return Var(f"{family}[{index}]")


def split_member(name: str) -> tuple[str, int] | None:
    """Inverse of ``member_var`` on names; None for ordinary variables."""
    m = _MEMBER_RE.match(name)
    if m is None:
        return None
    return m.group(1), int(m.group(2))


_INDEXED_RE = re.compile(r"^([^\[\]]+)\[(.+)\]$")


def indexed_dist_var(base: str, member: Var) -> DistVar:
    """Distribution variable attached to one family member."""
    return DistVar(f"{base}[{member.name}]")


def split_indexed(name: str) -> tuple[str, str] | None:
    """Split ``base[member]`` dist-var names; None for plain ones."""
    m = _INDEXED_RE.match(name)
    if m is None:
        return None
    return m.group(1), m.group(2)
