"""Frontend pipeline: parse, resolve imports, infer types, desugar,
stratify, lower, validate."""

from __future__ import annotations

import os

from ..errors import CompileError, ValidationError
from ..ir import validate
from . import ast
from .desugar import DesugaredProgram, desugar
from .infer import TypedProgram, infer_types
from .lower import CompiledProgram, lower
from .parser import parse
from .stratify import stratify

__all__ = [
    "CompiledProgram", "DesugaredProgram", "TypedProgram",
    "compile_source", "compile_file", "parse",
    "infer_types", "desugar", "stratify", "lower",
]


def _resolve_imports(program: ast.Program, base_dir: str, seen: set) -> ast.Program:
    """Textual inclusion: an import splices the imported file's items in
    place; cycles are an error."""
    items = []
    for item in program.items:
        if not isinstance(item, ast.ImportItem):
            items.append(item)
            continue
        path = item.path
        if not os.path.isabs(path):
            path = os.path.join(base_dir, path)
        path = os.path.realpath(path)
        if path in seen:
            line, col = item.pos if item.pos else (None, None)
            raise CompileError(f"import cycle through {item.path!r}", line, col)
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            line, col = item.pos if item.pos else (None, None)
            raise CompileError(f"cannot import {item.path!r}: {exc}", line, col)
        sub = _resolve_imports(
            parse(text), os.path.dirname(path), seen | {path}
        )
        items.extend(sub.items)
    return ast.Program(items)


def compile_source(text: str, path: str = "<input>") -> CompiledProgram:
    base_dir = os.path.dirname(path) if path != "<input>" else os.getcwd()
    seen = {os.path.realpath(path)} if path != "<input>" else set()
    program = _resolve_imports(parse(text), base_dir, seen)
    typed = infer_types(program)
    des = desugar(typed)
    strata = stratify(des)
    compiled = lower(des, strata)
    compiled.source = path
    problems = validate(compiled.program)
    if problems:
        raise ValidationError(
            "lowering produced an invalid program: " + "; ".join(problems)
        )
    return compiled


def compile_file(path: str) -> CompiledProgram:
    with open(path, encoding="utf-8") as fh:
        return compile_source(fh.read(), path)
