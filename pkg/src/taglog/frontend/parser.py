"""Recursive-descent parser producing the surface AST."""

from __future__ import annotations

from ..errors import ParseError
from ..values import ALL_TYPES
from . import ast
from .lexer import Token, tokenize

_REDUCER_NAMES = set(ast.AGGREGATOR_OPS) | set(ast.SAMPLER_OPS)


class Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.i = 0

    # -- token plumbing ---------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.tokens[min(self.i + offset, len(self.tokens) - 1)]

    def at(self, *kinds: str) -> bool:
        return self.peek().kind in kinds

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, *kinds: str) -> Token:
        tok = self.peek()
        if tok.kind not in kinds:
            expected = " or ".join(repr(k) for k in kinds)
            raise ParseError(
                f"expected {expected}, found {tok.text or 'end of input'!r}",
                tok.line, tok.col,
            )
        return self.advance()

    def error(self, msg: str):
        tok = self.peek()
        raise ParseError(msg, tok.line, tok.col)

    # -- program ----------------------------------------------------------

    def parse_program(self) -> ast.Program:
        items = []
        while not self.at("eof"):
            items.extend(self.parse_item())
        return ast.Program(items)

    def parse_item(self) -> list:
        attrs = []
        while self.at("@"):
            self.advance()
            name = self.expect("ident").text
            args = []
            if self.at("("):
                self.advance()
                if not self.at(")"):
                    args.append(self.parse_expr())
                    while self.at(","):
                        self.advance()
                        args.append(self.parse_expr())
                self.expect(")")
            attrs.append(ast.Attribute(name, args))
        tok = self.peek()
        if tok.kind == "import":
            self.advance()
            path = self.expect("string").value
            return [ast.ImportItem(path, attrs, (tok.line, tok.col))]
        if tok.kind == "type":
            return self._parse_type_items(attrs)
        if tok.kind == "const":
            return [self._parse_const_item(attrs)]
        if tok.kind == "query":
            self.advance()
            name = self.expect("ident").text
            return [ast.QueryItem(name, attrs, (tok.line, tok.col))]
        if tok.kind == "rel":
            return [self._parse_rel_item(attrs)]
        self.error("expected an item (import, type, const, rel, or query)")

    def _parse_type_items(self, attrs) -> list:
        tok = self.expect("type")
        items = []
        while True:
            name = self.expect("ident").text
            pos = (tok.line, tok.col)
            if self.at("="):
                self.advance()
                target = self.expect("ident").text
                items.append(ast.TypeAliasItem(name, target, False, attrs, pos))
            elif self.at("<:"):
                self.advance()
                target = self.expect("ident").text
                items.append(ast.TypeAliasItem(name, target, True, attrs, pos))
            else:
                self.expect("(")
                columns = []
                if not self.at(")"):
                    columns.append(self._parse_column())
                    while self.at(","):
                        self.advance()
                        columns.append(self._parse_column())
                self.expect(")")
                items.append(ast.RelTypeDeclItem(name, columns, attrs, pos))
            if self.at(","):
                self.advance()
                continue
            return items

    def _parse_column(self):
        if self.peek().kind == "ident" and self.peek(1).kind == ":":
            name = self.advance().text
            self.advance()
            return (name, self._parse_type_name())
        return (None, self._parse_type_name())

    def _parse_type_name(self) -> str:
        tok = self.expect("ident")
        return tok.text

    def _parse_const_item(self, attrs) -> ast.ConstItem:
        tok = self.expect("const")
        bindings = []
        while True:
            name = self.expect("ident").text
            ty = None
            if self.at(":"):
                self.advance()
                ty = self._parse_type_name()
            self.expect("=")
            value = self.parse_expr()
            bindings.append((name, ty, value))
            if self.at(","):
                self.advance()
                continue
            break
        return ast.ConstItem(bindings, attrs, (tok.line, tok.col))

    def _parse_rel_item(self, attrs) -> ast.Item:
        tok = self.expect("rel")
        pos = (tok.line, tok.col)
        tag = self._try_parse_tag()
        name = self.expect("ident").text
        if self.at("("):
            atom = self._finish_atom(name)
            if self.at(":-", "="):
                self.advance()
                body = self.parse_formula()
                return ast.RuleItem(tag, atom, body, attrs, pos)
            return ast.FactItem(tag, atom.pred, atom.args, attrs, pos)
        if self.at("=") and tag is None:
            self.advance()
            self.expect("{")
            groups = self._parse_fact_set()
            self.expect("}")
            return ast.FactSetItem(name, groups, attrs, pos)
        self.error("expected '(' for an atom or '= {' for a fact set")

    def _try_parse_tag(self):
        """A tag is a literal or constant name followed by '::'."""
        tok = self.peek()
        if tok.kind in ("float", "int", "ident") and self.peek(1).kind == "::":
            tag = self._parse_tag_value()
            self.expect("::")
            return tag
        if tok.kind == "-" and self.peek(1).kind in ("float", "int") \
                and self.peek(2).kind == "::":
            tag = self._parse_tag_value()
            self.expect("::")
            return tag
        return None

    def _parse_tag_value(self) -> ast.Expr:
        if self.at("-"):
            self.advance()
            return ast.UnExpr("-", self._parse_tag_value())
        tok = self.advance()
        if tok.kind == "float":
            return ast.Lit("float", tok.value)
        if tok.kind == "int":
            return ast.Lit("int", tok.value)
        return ast.Var(tok.text)

    def _parse_fact_set(self) -> list:
        groups = []
        current = []
        while not self.at("}"):
            current.append(self._parse_tagged_tuple())
            if self.at(";"):
                self.advance()
                continue
            groups.append(current)
            current = []
            if self.at(","):
                self.advance()
                continue
            break
        if current:
            groups.append(current)
        return groups

    def _parse_tagged_tuple(self):
        tag = self._try_parse_tag()
        if self.at("("):
            self.advance()
            args = []
            if not self.at(")"):
                args.append(self.parse_expr())
                while self.at(","):
                    self.advance()
                    args.append(self.parse_expr())
            self.expect(")")
            return (tag, args)
        # arity-1 shorthand: a bare constant
        return (tag, [self.parse_expr()])

    # -- formulas ----------------------------------------------------------

    def parse_formula(self) -> ast.Formula:
        left = self._parse_or_formula()
        if self.at("implies"):
            self.advance()
            right = self.parse_formula()
            return ast.Implies(left, right)
        return left

    def _parse_or_formula(self) -> ast.Formula:
        left = self._parse_and_formula()
        while self.at("or"):
            self.advance()
            left = ast.Disj(left, self._parse_and_formula())
        return left

    def _parse_and_formula(self) -> ast.Formula:
        left = self._parse_unary_formula()
        while self.at("and", ","):
            self.advance()
            left = ast.Conj(left, self._parse_unary_formula())
        return left

    def _parse_unary_formula(self) -> ast.Formula:
        tok = self.peek()
        if tok.kind == "not":
            self.advance()
            name = self.expect("ident").text
            if not self.at("("):
                self.error("expected '(' after negated atom name")
            return ast.NegAtom(self._finish_atom(name))
        if tok.kind == "(":
            reduce = self._try_parse_reduce()
            if reduce is not None:
                return reduce
            save = self.i
            try:
                self.advance()
                inner = self.parse_formula()
                self.expect(")")
                # `(x + 1) == y` parses as a parenthesized constraint followed
                # by an operator: reparse the whole thing as one expression.
                if not self.at("==", "!=", "<", "<=", ">", ">=", "+", "-",
                               "*", "/", "%", "&&", "||", "as"):
                    return inner
            except ParseError:
                pass
            self.i = save
            return ast.Constraint(self.parse_expr())
        if tok.kind == "ident":
            if self.peek(1).kind == "(":
                name = self.advance().text
                return self._finish_atom(name)
            reduce = self._try_parse_reduce()
            if reduce is not None:
                return reduce
            return ast.Constraint(self.parse_expr())
        return ast.Constraint(self.parse_expr())

    def _finish_atom(self, name: str) -> ast.Atom:
        tok = self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.parse_expr())
            while self.at(","):
                self.advance()
                args.append(self.parse_expr())
        self.expect(")")
        return ast.Atom(name, args, (tok.line, tok.col))

    def _try_parse_reduce(self):
        """Result vars, ':=' or '=', then a reducer call; rolls back if the
        lookahead does not fit."""
        save = self.i
        result_vars = []
        if self.at("("):
            self.advance()
            while self.at("ident"):
                result_vars.append(self.advance().text)
                if self.at(","):
                    self.advance()
                    continue
                break
            if not result_vars or not self.at(")"):
                self.i = save
                return None
            self.advance()
        elif self.at("ident"):
            result_vars.append(self.advance().text)
        else:
            return None
        if not self.at(":=", "="):
            self.i = save
            return None
        self.advance()
        if not (self.at("ident") and self.peek().text in _REDUCER_NAMES):
            self.i = save
            return None
        tok = self.advance()
        op = tok.text
        count = None
        arg_vars = []
        if self.at("<"):
            self.advance()
            if op in ast.SAMPLER_OPS:
                count = self.expect("int").value
            else:
                arg_vars.append(self.expect("ident").text)
                while self.at(","):
                    self.advance()
                    arg_vars.append(self.expect("ident").text)
            self.expect(">")
        elif op in ast.SAMPLER_OPS:
            self.error(f"sampler {op!r} requires a <K> parameter")
        self.expect("(")
        binding_vars = [self.expect("ident").text]
        while self.at(","):
            self.advance()
            binding_vars.append(self.expect("ident").text)
        self.expect(":")
        body = self.parse_formula()
        group_vars = None
        group_body = None
        if self.at("where"):
            self.advance()
            group_vars = [self.expect("ident").text]
            while self.at(","):
                self.advance()
                group_vars.append(self.expect("ident").text)
            self.expect(":")
            group_body = self.parse_formula()
        self.expect(")")
        return ast.Reduce(
            result_vars, op, count, arg_vars, binding_vars, body,
            group_vars, group_body, (tok.line, tok.col),
        )

    # -- expressions --------------------------------------------------------

    def parse_expr(self) -> ast.Expr:
        return self._parse_binary(1)

    _PREC_OPS = {
        1: ("||",),
        2: ("&&",),
        3: ("==", "!=", "<", "<=", ">", ">="),
        4: ("+", "-"),
        5: ("*", "/", "%"),
    }

    def _parse_binary(self, prec: int) -> ast.Expr:
        if prec > 5:
            return self._parse_unary()
        left = self._parse_binary(prec + 1)
        while self.at(*self._PREC_OPS[prec]):
            op = self.advance().text
            right = self._parse_binary(prec + 1)
            left = ast.BinExpr(op, left, right)
        return left

    def _parse_unary(self) -> ast.Expr:
        if self.at("!", "-"):
            op = self.advance().text
            return ast.UnExpr(op, self._parse_unary())
        return self._parse_postfix()

    def _parse_postfix(self) -> ast.Expr:
        e = self._parse_primary()
        while self.at("as"):
            self.advance()
            target = self._parse_type_name()
            if target not in ALL_TYPES:
                self.error(f"unknown type {target!r} in cast")
            e = ast.CastExpr(e, target)
        return e

    def _parse_primary(self) -> ast.Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return ast.Lit("int", tok.value)
        if tok.kind == "float":
            self.advance()
            return ast.Lit("float", tok.value)
        if tok.kind == "string":
            self.advance()
            return ast.Lit("string", tok.value)
        if tok.kind == "char":
            self.advance()
            return ast.Lit("char", tok.value)
        if tok.kind in ("true", "false"):
            self.advance()
            return ast.Lit("bool", tok.kind == "true")
        if tok.kind == "ident":
            self.advance()
            return ast.Var(tok.text)
        if tok.kind == "$":
            self.advance()
            name = self.expect("ident").text
            self.expect("(")
            args = []
            if not self.at(")"):
                args.append(self.parse_expr())
                while self.at(","):
                    self.advance()
                    args.append(self.parse_expr())
            self.expect(")")
            return ast.CallExpr(name, args)
        if tok.kind == "(":
            self.advance()
            e = self.parse_expr()
            self.expect(")")
            return e
        if tok.kind == "if":
            self.advance()
            cond = self.parse_expr()
            self.expect("then")
            then = self.parse_expr()
            self.expect("else")
            orelse = self.parse_expr()
            return ast.IfExpr(cond, then, orelse)
        self.error(f"expected an expression, found {tok.text or 'end of input'!r}")


def parse(source: str) -> ast.Program:
    return Parser(source).parse_program()
