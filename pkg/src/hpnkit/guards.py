"""Boolean guard expressions attached to transitions.

Guards are small expression trees over named atoms. Atoms are free
predicate symbols: the net never evaluates them itself, a valuation
(atom name -> bool) has to be supplied by the caller. Structural
analyses ignore guards entirely; valued reachability branches over
valuations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import GuardSyntaxError, MissingAtomError


class Guard:
    """Base class for guard expression nodes."""

    def evaluate(self, valuation: Mapping[str, bool]) -> bool:
        raise NotImplementedError

    def atoms(self) -> frozenset[str]:
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.to_text()


@dataclass(frozen=True)
class Const(Guard):
    value: bool

    def evaluate(self, valuation: Mapping[str, bool]) -> bool:
        return self.value

    def atoms(self) -> frozenset[str]:
        return frozenset()

    def to_text(self) -> str:
        return "True" if self.value else "False"


@dataclass(frozen=True)
class Atom(Guard):
    name: str

    def evaluate(self, valuation: Mapping[str, bool]) -> bool:
        try:
            return bool(valuation[self.name])
        except KeyError:
            raise MissingAtomError(self.name) from None

    def atoms(self) -> frozenset[str]:
        return frozenset((self.name,))

    def to_text(self) -> str:
        return self.name


@dataclass(frozen=True)
class Not(Guard):
    child: Guard

    def evaluate(self, valuation: Mapping[str, bool]) -> bool:
        return not self.child.evaluate(valuation)

    def atoms(self) -> frozenset[str]:
        return self.child.atoms()

    def to_text(self) -> str:
        return "!" + _wrap(self.child)


@dataclass(frozen=True)
class And(Guard):
    left: Guard
    right: Guard

    def evaluate(self, valuation: Mapping[str, bool]) -> bool:
        return self.left.evaluate(valuation) and self.right.evaluate(valuation)

    def atoms(self) -> frozenset[str]:
        return self.left.atoms() | self.right.atoms()

    def to_text(self) -> str:
        return f"{_wrap(self.left, for_and=True)} && {_wrap(self.right, for_and=True)}"


@dataclass(frozen=True)
class Or(Guard):
    left: Guard
    right: Guard

    def evaluate(self, valuation: Mapping[str, bool]) -> bool:
        return self.left.evaluate(valuation) or self.right.evaluate(valuation)

    def atoms(self) -> frozenset[str]:
        return self.left.atoms() | self.right.atoms()

    def to_text(self) -> str:
        return f"{self.left.to_text()} || {self.right.to_text()}"


TRUE = Const(True)
FALSE = Const(False)


def _wrap(g: Guard, for_and: bool = False) -> str:
    # parenthesize only where precedence demands it: ! > && > ||
    if isinstance(g, Or) or (for_and and isinstance(g, Or)):
        return "(" + g.to_text() + ")"
    if isinstance(g, And) and not for_and:
        return "(" + g.to_text() + ")"
    return g.to_text()


# --- parsing ---------------------------------------------------------------
#
# grammar:  expr  := term ('||' term)*
#           term  := factor ('&&' factor)*
#           factor:= '!' factor | '(' expr ')' | 'True' | 'False' | atom
#           atom  := [A-Za-z_][A-Za-z0-9_]*

_ATOM_FIRST = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_ATOM_REST = _ATOM_FIRST | set("0123456789")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif text.startswith("&&", i):
            tokens.append(("&&", "&&", i))
            i += 2
        elif text.startswith("||", i):
            tokens.append(("||", "||", i))
            i += 2
        elif c == "!":
            tokens.append(("!", "!", i))
            i += 1
        elif c in "()":
            tokens.append((c, c, i))
            i += 1
        elif c in _ATOM_FIRST:
            j = i + 1
            while j < n and text[j] in _ATOM_REST:
                j += 1
            tokens.append(("atom", text[i:j], i))
            i = j
        else:
            raise GuardSyntaxError(f"unexpected character {c!r}", column=i)
    return tokens


def parse_guard(text: str) -> Guard:
    """Parse a guard expression string into a Guard tree."""
    tokens = _tokenize(text)
    pos = 0

    def peek() -> tuple[str, str, int] | None:
        return tokens[pos] if pos < len(tokens) else None

    def take(kind: str) -> tuple[str, str, int]:
        nonlocal pos
        tok = peek()
        if tok is None or tok[0] != kind:
            where = tok[2] if tok else len(text)
            raise GuardSyntaxError(f"expected {kind!r}", column=where)
        pos += 1
        return tok

    def factor() -> Guard:
        nonlocal pos
        tok = peek()
        if tok is None:
            raise GuardSyntaxError("unexpected end of guard", column=len(text))
        kind, value, col = tok
        if kind == "!":
            pos += 1
            return Not(factor())
        if kind == "(":
            pos += 1
            inner = expr()
            take(")")
            return inner
        if kind == "atom":
            pos += 1
            if value == "True":
                return TRUE
            if value == "False":
                return FALSE
            return Atom(value)
        raise GuardSyntaxError(f"unexpected token {value!r}", column=col)

    def term() -> Guard:
        nonlocal pos
        node = factor()
        while (tok := peek()) and tok[0] == "&&":
            pos += 1
            node = And(node, factor())
        return node

    def expr() -> Guard:
        nonlocal pos
        node = term()
        while (tok := peek()) and tok[0] == "||":
            pos += 1
            node = Or(node, term())
        return node

    result = expr()
    if (tok := peek()) is not None:
        raise GuardSyntaxError(f"trailing input {tok[1]!r}", column=tok[2])
    return result


def all_valuations(atoms: list[str]):
    """Yield every valuation over `atoms` in lexicographic order."""
    names = sorted(atoms)
    for bits in range(1 << len(names)):
        yield {name: bool((bits >> i) & 1) for i, name in enumerate(names)}
