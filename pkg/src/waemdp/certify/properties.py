"""Reachability properties over atomic propositions and their parser.

Accepted forms::

    C U T          constrained reachability
    F T            eventually T
    F (A & X B)    some step from an A-state lands in a B-state

where C, T, A, B are state formulas built from proposition names, ``true``,
``false``, ``!``, ``&``, ``|`` and parentheses.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

from waemdp.errors import PropertySyntaxError


@dataclass(frozen=True)
class Atom:
    name: str

    def mask(self, labels, ap):
        if self.name not in ap:
            raise PropertySyntaxError(f"unknown proposition {self.name!r}; known: {', '.join(ap)}")
        return np.asarray(labels, bool)[:, ap.index(self.name)]

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Const:
    value: bool

    def mask(self, labels, ap):
        return np.full(len(labels), self.value)

    def __str__(self):
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Not:
    arg: object

    def mask(self, labels, ap):
        return ~self.arg.mask(labels, ap)

    def __str__(self):
        return f"!{self.arg}"


@dataclass(frozen=True)
class And:
    left: object
    right: object

    def mask(self, labels, ap):
        return self.left.mask(labels, ap) & self.right.mask(labels, ap)

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or:
    left: object
    right: object

    def mask(self, labels, ap):
        return self.left.mask(labels, ap) | self.right.mask(labels, ap)

    def __str__(self):
        return f"({self.left} | {self.right})"


@dataclass(frozen=True)
class Return:
    def __str__(self):
        return "return"


@dataclass(frozen=True)
class ConstrainedReach:
    constraint: object
    target: object

    def __str__(self):
        return f"{self.constraint} U {self.target}"


def EventuallyReach(target):
    return ConstrainedReach(Const(True), target)


@dataclass(frozen=True)
class NextReach:
    """F (source & X target)."""

    source: object
    target: object

    def __str__(self):
        return f"F ({self.source} & X {self.target})"


def time_to_failure(unsafe="unsafe", reset="reset"):
    return ConstrainedReach(Not(Atom(reset)), Atom(unsafe))


_TOKEN = re.compile(r"\s*(?:(?P<op>[()!&|~¬])|(?P<word>[A-Za-z_][A-Za-z0-9_]*))")


def tokenize(text):
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise PropertySyntaxError(f"unexpected character {text[pos:].strip()[:1]!r} at {pos}")
        tokens.append(m.group("op") or m.group("word"))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self, offset=0):
        i = self.pos + offset
        return self.tokens[i] if i < len(self.tokens) else None

    def take(self, expected=None):
        tok = self.peek()
        if tok is None or (expected is not None and tok != expected):
            raise PropertySyntaxError(f"expected {expected or 'a token'}, found {tok or 'end of input'}")
        self.pos += 1
        return tok

    def path(self):
        if self.peek() == "F":
            self.take()
            if self.peek() == "(" and "X" in self.tokens[self.pos:]:
                self.take("(")
                source = self.conj(stop_before_next=True)
                self.take("&")
                self.take("X")
                target = self.unary()
                self.take(")")
                return NextReach(source, target)
            return EventuallyReach(self.disj())
        left = self.disj()
        if self.peek() == "U":
            self.take()
            return ConstrainedReach(left, self.disj())
        raise PropertySyntaxError("a property needs 'U' or a leading 'F'")

    def disj(self):
        node = self.conj()
        while self.peek() == "|":
            self.take()
            node = Or(node, self.conj())
        return node

    def conj(self, stop_before_next=False):
        node = self.unary()
        while self.peek() == "&" and not (stop_before_next and self.peek(1) == "X"):
            self.take()
            node = And(node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok in ("!", "~", "¬"):
            self.take()
            return Not(self.unary())
        if tok == "(":
            self.take()
            node = self.disj()
            self.take(")")
            return node
        if tok in ("U", "F", "X", None) or not re.match(r"[A-Za-z_]", tok):
            raise PropertySyntaxError(f"expected a proposition, found {tok or 'end of input'}")
        self.take()
        if tok == "true":
            return Const(True)
        if tok == "false":
            return Const(False)
        return Atom(tok)


def parse_property(text):
    parser = _Parser(text)
    prop = parser.path()
    if parser.peek() is not None:
        raise PropertySyntaxError(f"trailing input starting at {parser.peek()!r}")
    return prop
