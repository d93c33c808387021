"""Tokenizer for the surface language."""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ParseError

KEYWORDS = {
    "rel", "type", "const", "query", "import",
    "not", "and", "or", "implies",
    "if", "then", "else", "as", "where",
    "true", "false",
}

# Longest symbols first so the scanner is greedy.
SYMBOLS = [
    "::", ":-", ":=", "<:", "==", "!=", "<=", ">=", "&&", "||",
    "(", ")", "{", "}", "<", ">", ",", ";", ":", "=",
    "+", "-", "*", "/", "%", "!", "$", "@",
]

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", '"': '"', "'": "'", "0": "\0"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident | int | float | string | char | keyword/symbol text | eof
    text: str
    value: object
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def error(msg):
        raise ParseError(msg, line, col)

    while i < n:
        c = source[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c.isdigit():
            j = i
            while j < n and source[j].isdigit():
                j += 1
            is_float = False
            if j < n and source[j] == "." and j + 1 < n and source[j + 1].isdigit():
                is_float = True
                j += 1
                while j < n and source[j].isdigit():
                    j += 1
            if j < n and source[j] in "eE" and is_float:
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            if is_float:
                tokens.append(Token("float", text, float(text), start_line, start_col))
            else:
                tokens.append(Token("int", text, int(text), start_line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            text = source[i:j]
            kind = text if text in KEYWORDS else "ident"
            tokens.append(Token(kind, text, text, start_line, start_col))
            col += j - i
            i = j
            continue
        if c == '"' or c == "'":
            quote = c
            j = i + 1
            out = []
            while j < n and source[j] != quote:
                if source[j] == "\n":
                    error("unterminated string literal")
                if source[j] == "\\":
                    j += 1
                    if j >= n or source[j] not in _ESCAPES:
                        error("bad escape sequence")
                    out.append(_ESCAPES[source[j]])
                else:
                    out.append(source[j])
                j += 1
            if j >= n:
                error("unterminated string literal")
            text = "".join(out)
            if quote == "'":
                if len(text) != 1:
                    error("character literal must hold exactly one character")
                tokens.append(Token("char", text, text, start_line, start_col))
            else:
                tokens.append(Token("string", text, text, start_line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        for sym in SYMBOLS:
            if source.startswith(sym, i):
                tokens.append(Token(sym, sym, sym, start_line, start_col))
                i += len(sym)
                col += len(sym)
                break
        else:
            error(f"unexpected character {c!r}")
    tokens.append(Token("eof", "", None, line, col))
    return tokens
