"""Command-line interpreter: load a program, attach CSV facts, pick a
provenance, evaluate, and print or serialize the results."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from . import compile_file, output_relations
from .errors import CompileError, EvaluationAborted, LoadError, TaglogError
from .evaluator import EvalOptions, EvaluationResult, evaluate_program
from .functions import list_functions
from .ir import format_program
from .provenance import PROOFS_PROVENANCES, PROVENANCE_NAMES, InputFact, InputTag
from .values import RelationSignature, is_float_type, is_int_type, in_range, render_value


@dataclass
class RunConfig:
    program: str
    provenance: str = "unit"
    k: int = 3
    queries: list = field(default_factory=list)
    iter_limit: int = 2**20
    seed: int = 0
    discard_eps: float = 0.0
    output: str = "table"
    dump_ram: bool = False
    edb: list = field(default_factory=list)  # (relation, path) pairs
    edb_sets: list = field(default_factory=list)  # batch: list of pair lists
    jobs: int = 1

    def validate(self):
        if self.provenance not in PROVENANCE_NAMES:
            raise TaglogError(
                f"unknown provenance {self.provenance!r}; choose from "
                + ", ".join(PROVENANCE_NAMES)
            )
        if self.provenance in PROOFS_PROVENANCES and self.k < 1:
            raise TaglogError("k must be >= 1 for proofs provenances")


def _parse_cell(dtype: str, text: str, path: str, row_num: int):
    try:
        if is_int_type(dtype):
            v = int(text)
            if not in_range(dtype, v):
                raise ValueError(f"{v} out of range for {dtype}")
            return v
        if is_float_type(dtype):
            return float(text)
        if dtype == "bool":
            if text in ("true", "false"):
                return text == "true"
            raise ValueError(f"expected true/false, got {text!r}")
        if dtype == "char":
            if len(text) != 1:
                raise ValueError("char cell must hold exactly one character")
            return text
        return text
    except ValueError as exc:
        raise LoadError(f"{path}: row {row_num}: {exc}")


def load_edb_csv(
    relation: str, path: str, sig: RelationSignature, exclusion_base: int = 0
) -> list[InputFact]:
    """CSV with a required header row; a `prob` column tags rows with
    probabilities, a `me` column groups mutually exclusive rows."""
    facts = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot open {path}: {exc}")
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(f"{path}: missing header row")
        cols = [h.strip() for h in header]
        prob_idx = cols.index("prob") if "prob" in cols else None
        me_idx = cols.index("me") if "me" in cols else None
        value_idx = [
            i for i in range(len(cols)) if i not in (prob_idx, me_idx)
        ]
        if len(value_idx) != sig.arity:
            raise LoadError(
                f"{path}: {len(value_idx)} value columns for relation "
                f"{relation!r} of arity {sig.arity}"
            )
        for row_num, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(cols):
                raise LoadError(
                    f"{path}: row {row_num}: expected {len(cols)} fields, "
                    f"got {len(row)}"
                )
            tup = tuple(
                _parse_cell(dtype, row[i], path, row_num)
                for dtype, i in zip(sig.col_types, value_idx)
            )
            tag = InputTag()
            if prob_idx is not None and row[prob_idx].strip() != "":
                try:
                    p = float(row[prob_idx])
                except ValueError:
                    raise LoadError(f"{path}: row {row_num}: bad probability")
                if math.isnan(p) or not (0.0 <= p <= 1.0):
                    raise LoadError(
                        f"{path}: row {row_num}: probability {p} outside [0, 1]"
                    )
                excl = None
                if me_idx is not None and row[me_idx].strip() != "":
                    try:
                        excl = exclusion_base + int(row[me_idx])
                    except ValueError:
                        raise LoadError(
                            f"{path}: row {row_num}: bad exclusion id"
                        )
                tag = InputTag(p, excl)
            facts.append(InputFact(relation, tup, tag))
    return facts


# --- rendering ---------------------------------------------------------------


def _format_fact(relation: str, tup: tuple, sig: Optional[RelationSignature]) -> str:
    types = sig.col_types if sig is not None else (None,) * len(tup)
    inner = ", ".join(render_value(t, v) for t, v in zip(types, tup))
    return f"{relation}({inner})"


def render_table(result: EvaluationResult, signatures: dict) -> str:
    lines = []
    for rel in sorted(result.outputs):
        sig = signatures.get(rel)
        for tup, out in result.outputs[rel]:
            body = _format_fact(rel, tup, sig)
            if out is None:
                lines.append(body)
            else:
                prob = out.prob if hasattr(out, "prob") else out
                lines.append(f"{prob:.6f}::{body}")
    return "\n".join(lines) + ("\n" if lines else "")


def render_json(result: EvaluationResult, signatures: dict) -> str:
    doc: dict = {
        "provenance": result.provenance,
        "inputs": [
            {"relation": rel, "tuple": list(tup)}
            for rel, tup in result.input_index
        ],
        "outputs": {},
    }
    for rel in sorted(result.outputs):
        entries = []
        for tup, out in result.outputs[rel]:
            entry: dict = {"tuple": list(tup)}
            if out is not None:
                if hasattr(out, "prob"):
                    entry["prob"] = out.prob
                    entry["grad"] = list(out.grad)
                else:
                    entry["prob"] = out
            entries.append(entry)
        doc["outputs"][rel] = entries
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# --- driver ------------------------------------------------------------------


def _collect_csv_facts(pairs, signatures) -> list[InputFact]:
    facts: list[InputFact] = []
    base = 1 << 20  # keep CSV exclusion ids clear of program-level groups
    for offset, (relation, path) in enumerate(pairs):
        sig = signatures.get(relation)
        if sig is None:
            raise LoadError(f"relation {relation!r} is not declared in the program")
        facts.extend(load_edb_csv(relation, path, sig, base + offset * (1 << 20)))
    return facts


def execute(config: RunConfig, stdout=None) -> int:
    out = stdout if stdout is not None else sys.stdout
    config.validate()
    compiled = compile_file(config.program)
    if config.dump_ram:
        out.write(format_program(compiled.program))
        return 0
    options = EvalOptions(
        provenance=config.provenance,
        k=config.k,
        iter_limit=config.iter_limit,
        seed=config.seed,
        discard_eps=config.discard_eps,
    )
    outputs = output_relations(compiled, config.queries)

    def one_run(extra_pairs) -> EvaluationResult:
        edb = list(compiled.edb) + _collect_csv_facts(extra_pairs, compiled.signatures)
        return evaluate_program(
            compiled.program, edb, options,
            signatures=compiled.signatures, output_relations=outputs,
        )

    render = render_json if config.output == "json" else render_table
    if config.edb_sets:
        sets = config.edb_sets
        if config.jobs > 1:
            with ThreadPoolExecutor(max_workers=config.jobs) as pool:
                results = list(pool.map(one_run, sets))
        else:
            results = [one_run(s) for s in sets]
        for i, result in enumerate(results):
            out.write(f"# set {i}\n")
            out.write(render(result, compiled.signatures))
            _report_drops(result)
        return 0
    result = one_run(config.edb)
    out.write(render(result, compiled.signatures))
    _report_drops(result)
    return 0


def _report_drops(result: EvaluationResult):
    if result.stats.dropped_tuples:
        print(
            f"note: {result.stats.dropped_tuples} tuple(s) dropped "
            f"(failed computations or NaN)", file=sys.stderr,
        )


def _parse_edb_pair(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected REL=PATH")
    rel, path = text.split("=", 1)
    return rel.strip(), path.strip()


def _parse_edb_set(text: str):
    return [_parse_edb_pair(part) for part in text.split(",") if part.strip()]


def build_arg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="taglog",
        description="Datalog with pluggable provenance: discrete, "
        "probabilistic, and differentiable evaluation.",
    )
    p.add_argument("program", nargs="?", help="path to a .scl program")
    p.add_argument("--provenance", default="unit", metavar="NAME",
                   help="one of: " + ", ".join(PROVENANCE_NAMES))
    p.add_argument("--k", type=int, default=3,
                   help="proof budget for the proofs provenances (default 3)")
    p.add_argument("--query", action="append", default=[], metavar="REL",
                   help="output relation (repeatable; default: query decls)")
    p.add_argument("--iter-limit", type=int, default=2**20, metavar="N",
                   help="fixed-point iteration cap per stratum")
    p.add_argument("--seed", type=int, default=0, metavar="N",
                   help="random seed for samplers")
    p.add_argument("--discard-eps", type=float, default=0.0, metavar="F",
                   help="early-removal threshold for probability tags")
    p.add_argument("--output", choices=("table", "json"), default="table")
    p.add_argument("--dump-ram", action="store_true",
                   help="print the compiled relational-algebra program and exit")
    p.add_argument("--edb", action="append", default=[], metavar="REL=PATH",
                   type=_parse_edb_pair, help="load CSV facts (repeatable)")
    p.add_argument("--edb-set", action="append", default=[], metavar="SPEC",
                   type=_parse_edb_set,
                   help="batch mode: comma-separated REL=PATH pairs per set "
                        "(repeatable; one evaluation per set)")
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="parallel evaluations in batch mode")
    p.add_argument("--list-functions", action="store_true",
                   help="list built-in foreign functions and exit")
    return p


def main(argv=None) -> int:
    args = build_arg_parser().parse_args(argv)
    if args.list_functions:
        for line in list_functions():
            print(line)
        return 0
    if not args.program:
        print("error: a program path is required", file=sys.stderr)
        return 1
    config = RunConfig(
        program=args.program,
        provenance=args.provenance,
        k=args.k,
        queries=args.query,
        iter_limit=args.iter_limit,
        seed=args.seed,
        discard_eps=args.discard_eps,
        output=args.output,
        dump_ram=args.dump_ram,
        edb=args.edb,
        edb_sets=args.edb_set,
        jobs=args.jobs,
    )
    try:
        return execute(config)
    except EvaluationAborted as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CompileError, LoadError, TaglogError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
