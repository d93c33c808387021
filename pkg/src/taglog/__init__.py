"""taglog: a Datalog engine with pluggable provenance.

Programs compile to a relational-algebra IR and evaluate under a chosen
provenance: discrete (unit), probabilistic (minmaxprob, addmultprob,
topkproofs), or gradient-carrying (diffminmaxprob, diffaddmultprob,
difftopkproofs, difftopkproofsme).
"""

from __future__ import annotations

from typing import Optional, Sequence

from .errors import (
    CompileError,
    EvaluationAborted,
    LoadError,
    ParseError,
    StratificationError,
    TaglogError,
    TypeInferenceError,
    ValidationError,
)
from .evaluator import EvalOptions, EvaluationResult, evaluate_program
from .frontend import CompiledProgram, compile_file, compile_source
from .provenance import PROVENANCE_NAMES, InputFact, InputTag, make_provenance

__version__ = "0.1.0"

__all__ = [
    "CompileError", "CompiledProgram", "EvalOptions", "EvaluationAborted",
    "EvaluationResult", "InputFact", "InputTag", "LoadError", "ParseError",
    "PROVENANCE_NAMES", "StratificationError", "TaglogError",
    "TypeInferenceError", "ValidationError",
    "compile_file", "compile_source", "make_provenance", "run", "run_source",
]


def output_relations(
    compiled: CompiledProgram, queries: Optional[Sequence[str]] = None
) -> list[str]:
    """Explicit queries, else query-declared relations, else every derived
    relation."""
    if queries:
        return list(queries)
    if compiled.queries:
        return list(compiled.queries)
    return list(compiled.idb_relations)


def run(
    compiled: CompiledProgram,
    options: Optional[EvalOptions] = None,
    queries: Optional[Sequence[str]] = None,
    extra_facts: Sequence[InputFact] = (),
    **kwargs,
) -> EvaluationResult:
    """Evaluate a compiled program; keyword arguments override EvalOptions
    fields."""
    if options is None:
        options = EvalOptions(**kwargs)
    elif kwargs:
        raise TypeError("pass either an EvalOptions or keyword overrides")
    edb = list(compiled.edb) + list(extra_facts)
    return evaluate_program(
        compiled.program,
        edb,
        options,
        signatures=compiled.signatures,
        output_relations=output_relations(compiled, queries),
    )


def run_source(source: str, **kwargs) -> EvaluationResult:
    queries = kwargs.pop("queries", None)
    extra_facts = kwargs.pop("extra_facts", ())
    return run(
        compile_source(source), queries=queries, extra_facts=extra_facts, **kwargs
    )
