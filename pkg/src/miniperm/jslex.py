"""A small character-level JavaScript lexer.

Just enough of the language to find call sites without being fooled by
comments, string bodies, template literals, or regex literals.  Output
positions are 1-based.  Expressions inside ``${...}`` are tokenized
normally (they execute); the literal text around them is not.

Known simplification: a ``/`` after ``}`` is read as division, so a
regex literal immediately following a block is misread.  Real package
code does not do this.
"""

from __future__ import annotations

from dataclasses import dataclass

IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_$")
IDENT_PART = IDENT_START | set("0123456789")
DIGITS = set("0123456789")

# keywords after which a '/' begins a regex, not division
_REGEX_AFTER_KEYWORD = frozenset({
    "return", "typeof", "instanceof", "in", "of", "new", "delete", "void",
    "throw", "do", "else", "case", "yield", "await",
})

_PUNCT_4 = (">>>=",)
_PUNCT_3 = ("===", "!==", "**=", "...", ">>>", "<<=", ">>=", "&&=", "||=", "??=")
_PUNCT_2 = ("=>", "==", "!=", "<=", ">=", "&&", "||", "??", "?.", "++", "--",
            "+=", "-=", "*=", "%=", "&=", "|=", "^=", "<<", ">>", "**")


@dataclass(frozen=True)
class Token:
    kind: str  # ident | number | string | template | regex | punct
    text: str  # for strings: the decoded contents, quotes stripped
    line: int
    col: int


class LexError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line} col {col}: {message}")
        self.line = line
        self.col = col


class _Cursor:
    __slots__ = ("src", "pos", "line", "col")

    def __init__(self, src: str):
        self.src = src
        self.pos = 0
        self.line = 1
        self.col = 1

    def peek(self, offset: int = 0) -> str:
        i = self.pos + offset
        return self.src[i] if i < len(self.src) else ""

    def take(self) -> str:
        ch = self.src[self.pos]
        self.pos += 1
        if ch == "\n":
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return ch

    def done(self) -> bool:
        return self.pos >= len(self.src)


def tokenize(source: str) -> list[Token]:
    cur = _Cursor(source)
    tokens: list[Token] = []
    # brace depths at each ${ entry, innermost last
    template_stack: list[int] = []
    brace_depth = 0

    def prev_token() -> Token | None:
        return tokens[-1] if tokens else None

    def regex_allowed() -> bool:
        prev = prev_token()
        if prev is None:
            return True
        if prev.kind == "ident":
            return prev.text in _REGEX_AFTER_KEYWORD
        if prev.kind == "punct":
            return prev.text not in (")", "]", "}")
        return False  # number, string, template, regex end an expression

    while not cur.done():
        ch = cur.peek()

        if ch in " \t\r\n\f\v":
            cur.take()
            continue

        if ch == "/" and cur.peek(1) == "/":
            while not cur.done() and cur.peek() != "\n":
                cur.take()
            continue

        if ch == "/" and cur.peek(1) == "*":
            line, col = cur.line, cur.col
            cur.take(); cur.take()
            while True:
                if cur.done():
                    raise LexError("unterminated block comment", line, col)
                if cur.peek() == "*" and cur.peek(1) == "/":
                    cur.take(); cur.take()
                    break
                cur.take()
            continue

        line, col = cur.line, cur.col

        if ch in "'\"":
            tokens.append(Token("string", _scan_string(cur), line, col))
            continue

        if ch == "`":
            cur.take()
            chunk, entered = _scan_template_chunk(cur, line, col)
            tokens.append(Token("template", chunk, line, col))
            if entered:
                tokens.append(Token("punct", "${", cur.line, cur.col))
                template_stack.append(brace_depth)
            continue

        if ch in IDENT_START:
            text = cur.take()
            while not cur.done() and cur.peek() in IDENT_PART:
                text += cur.take()
            tokens.append(Token("ident", text, line, col))
            continue

        if ch in DIGITS or (ch == "." and cur.peek(1) in DIGITS):
            text = cur.take()
            while not cur.done() and (cur.peek() in IDENT_PART or cur.peek() == "."):
                text += cur.take()
            tokens.append(Token("number", text, line, col))
            continue

        if ch == "/" and regex_allowed():
            tokens.append(Token("regex", _scan_regex(cur), line, col))
            continue

        if ch == "}" and template_stack and brace_depth == template_stack[-1]:
            # closing an interpolation: back to template text
            template_stack.pop()
            cur.take()
            tokens.append(Token("punct", "}", line, col))
            tline, tcol = cur.line, cur.col
            chunk, entered = _scan_template_chunk(cur, tline, tcol)
            tokens.append(Token("template", chunk, tline, tcol))
            if entered:
                tokens.append(Token("punct", "${", cur.line, cur.col))
                template_stack.append(brace_depth)
            continue

        if ch == "{":
            brace_depth += 1
        elif ch == "}":
            brace_depth -= 1

        text = _scan_punct(cur)
        tokens.append(Token("punct", text, line, col))

    if template_stack:
        raise LexError("unterminated template interpolation", cur.line, cur.col)
    return tokens


def _scan_string(cur: _Cursor) -> str:
    quote = cur.take()
    line, col = cur.line, cur.col
    out = []
    while True:
        if cur.done():
            raise LexError("unterminated string", line, col)
        ch = cur.take()
        if ch == "\\":
            if cur.done():
                raise LexError("unterminated string", line, col)
            out.append(cur.take())  # keeps the raw escaped char
            continue
        if ch == quote:
            return "".join(out)
        if ch == "\n":
            raise LexError("newline in string", line, col)
        out.append(ch)


def _scan_template_chunk(cur: _Cursor, line: int, col: int) -> tuple[str, bool]:
    """Literal text up to the closing backtick or a ``${``.

    Returns (text, entered_interpolation).  The delimiters themselves
    are consumed.
    """
    out = []
    while True:
        if cur.done():
            raise LexError("unterminated template literal", line, col)
        ch = cur.take()
        if ch == "\\":
            if cur.done():
                raise LexError("unterminated template literal", line, col)
            out.append(cur.take())
            continue
        if ch == "`":
            return "".join(out), False
        if ch == "$" and cur.peek() == "{":
            cur.take()
            return "".join(out), True
        out.append(ch)


def _scan_regex(cur: _Cursor) -> str:
    line, col = cur.line, cur.col
    text = cur.take()  # leading '/'
    in_class = False
    while True:
        if cur.done() or cur.peek() == "\n":
            raise LexError("unterminated regex literal", line, col)
        ch = cur.take()
        text += ch
        if ch == "\\":
            if cur.done():
                raise LexError("unterminated regex literal", line, col)
            text += cur.take()
            continue
        if ch == "[":
            in_class = True
        elif ch == "]":
            in_class = False
        elif ch == "/" and not in_class:
            break
    while not cur.done() and cur.peek() in IDENT_PART:
        text += cur.take()  # flags
    return text


def _scan_punct(cur: _Cursor) -> str:
    rest = cur.src[cur.pos:cur.pos + 4]
    for group in (_PUNCT_4, _PUNCT_3, _PUNCT_2):
        for op in group:
            if rest.startswith(op):
                for _ in op:
                    cur.take()
                return op
    return cur.take()
