"""Recursive-descent parser for the local formula DSL.

Grammar (ASCII forms, unicode aliases in brackets):

    formula  := disj
    disj     := conj { ("|" [∨] | "or") conj }
    conj     := unary { ("&" [∧] | "and") unary }
    unary    := ("~" | "!" [¬] | "not") unary | quant | primary
    quant    := ("exists" [∃] | "forall" [∀]) name "in" "B" "[" int "]" "(" name ")" ":" formula
    primary  := "(" formula ")" | "true" | "false"
              | "dist" "(" name "," name ")" ("<=" [≤] | ">") int
              | name "(" name { "," name } ")"
              | name ("=" | "!=" [≠]) name

A quantifier body extends as far to the right as possible.
"""
import re
from typing import List, NamedTuple, Optional, Set, Tuple

from src.logic.formula import (
    FALSE, TRUE, Atom, DistGt, DistLe, Eq, Exists, Forall, Formula, is_free_name,
    conj, disj, neg,
)
from src.utils.errors import FormulaSyntaxError, InputError, LocalityError

KEYWORDS = {'exists', 'forall', 'in', 'true', 'false', 'not', 'and', 'or', 'dist'}

_ALIASES = {'∧': '&', '∨': '|', '¬': '~', '≤': '<=', '≠': '!=', '∃': 'exists', '∀': 'forall'}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<num>[0-9]+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|!=|[&|~!()\[\],:=>])
  | (?P<uni>[∧∨¬≤≠∃∀])
""", re.VERBOSE)


class Token(NamedTuple):
    kind: str
    text: str
    line: int
    column: int


def tokenize(text: str) -> List[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if not match:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = match.lastgroup
        value = match.group()
        column = pos - line_start + 1
        if kind == 'ws':
            newlines = value.count('\n')
            if newlines:
                line += newlines
                line_start = pos + value.rfind('\n') + 1
        elif kind == 'uni':
            alias = _ALIASES[value]
            tokens.append(Token('name' if alias.isalpha() else 'op', alias, line, column))
        else:
            tokens.append(Token(kind, value, line, column))
        pos = match.end()
    tokens.append(Token('eof', '', line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        self.bound: List[str] = []

    # -- token helpers --

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.peek()
        self.pos += 1
        return token

    def error(self, message: str, token: Optional[Token] = None):
        token = token or self.peek()
        found = token.text or 'end of input'
        raise FormulaSyntaxError(f"{message}, found '{found}'", token.line, token.column)

    def accept(self, *texts: str) -> Optional[Token]:
        token = self.peek()
        if token.kind in ('op', 'name') and token.text in texts:
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        token = self.accept(text)
        if token is None:
            self.error(f"expected '{text}'")
        return token

    def number(self) -> int:
        token = self.peek()
        if token.kind != 'num':
            self.error("expected a non-negative integer")
        self.advance()
        return int(token.text)

    def variable(self) -> str:
        token = self.peek()
        if token.kind != 'name' or token.text in KEYWORDS:
            self.error("expected a variable")
        self.advance()
        if not is_free_name(token.text) and token.text not in self.bound:
            raise FormulaSyntaxError(
                f"variable '{token.text}' is neither free (x1, x2, ...) nor bound", token.line, token.column)
        return token.text

    # -- grammar --

    def parse(self) -> Formula:
        node = self.disjunction()
        if self.peek().kind != 'eof':
            self.error("unexpected trailing input")
        return node

    def disjunction(self) -> Formula:
        parts = [self.conjunction()]
        while self.accept('|', 'or'):
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else disj(*parts)

    def conjunction(self) -> Formula:
        parts = [self.unary()]
        while self.accept('&', 'and'):
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else conj(*parts)

    def unary(self) -> Formula:
        if self.accept('~', '!', 'not'):
            return neg(self.unary())
        token = self.peek()
        if token.kind == 'name' and token.text in ('exists', 'forall'):
            return self.quantifier()
        return self.primary()

    def quantifier(self) -> Formula:
        word = self.advance()
        name_token = self.peek()
        if name_token.kind != 'name' or name_token.text in KEYWORDS:
            self.error("expected a bound variable name")
        self.advance()
        if is_free_name(name_token.text):
            raise FormulaSyntaxError(
                f"bound variable '{name_token.text}' clashes with the free-variable names x1, x2, ...",
                name_token.line, name_token.column)
        if not self.accept('in'):
            raise LocalityError(
                f"quantifier over '{name_token.text}' has no ball guard 'in B[r](x)'",
                word.line, word.column)
        guard = self.peek()
        if guard.text != 'B':
            self.error("expected 'B[r](x)' after 'in'")
        self.advance()
        self.expect('[')
        r = self.number()
        self.expect(']')
        self.expect('(')
        anchor = self.variable()
        self.expect(')')
        self.expect(':')
        self.bound.append(name_token.text)
        try:
            body = self.disjunction()
        finally:
            self.bound.pop()
        cls = Exists if word.text == 'exists' else Forall
        return cls(name_token.text, r, anchor, body)

    def primary(self) -> Formula:
        token = self.peek()
        if self.accept('('):
            node = self.disjunction()
            self.expect(')')
            return node
        if token.kind != 'name':
            self.error("expected a formula")
        if token.text == 'true':
            self.advance()
            return TRUE
        if token.text == 'false':
            self.advance()
            return FALSE
        if token.text == 'dist':
            return self.distance()
        if token.text in KEYWORDS:
            self.error("unexpected keyword")
        if self.peek(1).text == '(' and self.peek(1).kind == 'op':
            return self.atom()
        left = self.variable()
        if self.accept('='):
            return Eq(left, self.variable())
        if self.accept('!='):
            return neg(Eq(left, self.variable()))
        self.error("expected '=' or '!=' after a variable")

    def distance(self) -> Formula:
        self.advance()
        self.expect('(')
        left = self.variable()
        self.expect(',')
        right = self.variable()
        self.expect(')')
        if self.accept('<='):
            return DistLe(left, right, self.number())
        if self.accept('>'):
            return DistGt(left, right, self.number())
        self.error("expected '<=' or '>' after dist(...)")

    def atom(self) -> Formula:
        name = self.advance().text
        self.expect('(')
        args = [self.variable()]
        while self.accept(','):
            args.append(self.variable())
        self.expect(')')
        return Atom(name, tuple(args))


def parse(text: str) -> Formula:
    """Parse one formula of the DSL"""
    return _Parser(text).parse()


def parse_named(text: str, source: str = '<formulas>') -> List[Tuple[str, Formula]]:
    """Parse `name := formula` lines; blank lines and '#' comments are skipped"""
    out = []
    seen: Set[str] = set()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0]
        if not line.strip():
            continue
        if ':=' not in line:
            raise FormulaSyntaxError(f"{source}: expected 'name := formula'", number, 1)
        name, body = line.split(':=', 1)
        name = name.strip()
        if not re.match(r'^[A-Za-z_][A-Za-z0-9_\-.]*$', name):
            raise FormulaSyntaxError(f"{source}: bad formula name '{name}'", number, 1)
        if name in seen:
            raise InputError(f"{source}:{number}: duplicate formula name '{name}'")
        seen.add(name)
        offset = len(line) - len(body)
        try:
            formula = parse(body)
        except FormulaSyntaxError as e:
            cls = LocalityError if isinstance(e, LocalityError) else FormulaSyntaxError
            message = e.message.rsplit(' (line', 1)[0]
            raise cls(f"{source}: {message}", number, e.column + offset)
        out.append((name, formula))
    return out


def load_formulas(path: str) -> List[Tuple[str, Formula]]:
    try:
        with open(path, 'r', encoding='utf-8') as handle:
            text = handle.read()
    except OSError as e:
        raise InputError(f"cannot read formula file {path}: {e}")
    return parse_named(text, source=path)
