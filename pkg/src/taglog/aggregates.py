"""World-semantics aggregation and sampling.

The generic path enumerates all 2^n on/off worlds of the aggregated
tuples; each world's tag conjoins chosen tags with negated unchosen tags.
Specialized paths bypass enumeration: a single all-positive world for
unit, a closed form for counting under (diff-)max-min-prob, and a
disjunction shortcut for exists/forall under absorptive provenances.
"""

from __future__ import annotations

from typing import Optional

from .errors import EvaluationAborted
from .functions import FAILED, apply_binop
from .ir import AggSpec, SamplerSpec
from .values import untyped_tuple_key

WORLD_CAP_DEFAULT = 16


def discrete_apply(spec: AggSpec, tuples: list[tuple]) -> list[tuple]:
    """Apply the aggregator to a set of untagged tuples.

    Tuples are the post-group-key parts: (arg columns ++ binding columns).
    Returns the set of result tuples (argmin/argmax may return several;
    min/max of nothing returns none; a failed checked sum returns none).
    """
    name = spec.name
    if name == "count":
        return [(len(tuples),)]
    if name == "exists":
        return [(len(tuples) > 0,)]
    if name == "forall":
        return [(len(tuples) == 0,)]
    if name == "sum" or name == "prod":
        op = "+" if name == "sum" else "*"
        acc = 0 if name == "sum" else 1
        if spec.value_dtype in ("f32", "f64"):
            acc = float(acc)
        for tup in tuples:
            acc = apply_binop(op, spec.value_dtype, acc, tup[-1])
            if acc is FAILED:
                return []
        return [(acc,)]
    if name in ("min", "max"):
        if not tuples:
            return []
        pick = min if name == "min" else max
        return [pick(tuples, key=untyped_tuple_key)]
    if name in ("argmin", "argmax"):
        if not tuples:
            return []
        a = spec.arg_arity
        best = None
        for tup in tuples:
            val = tup[a:]
            if best is None:
                best = val
            elif name == "argmax" and untyped_tuple_key(val) > untyped_tuple_key(best):
                best = val
            elif name == "argmin" and untyped_tuple_key(val) < untyped_tuple_key(best):
                best = val
        out = set()
        for tup in tuples:
            if tup[a:] == best:
                out.add(tup if spec.include_value else tup[:a])
        return sorted(out, key=untyped_tuple_key)
    raise ValueError(f"unknown aggregator {name!r}")


def mmp_count(tags: list) -> dict:
    """Closed-form counting for (diff-)max-min-prob tags.

    With tags sorted ascending, the best world realizing count c takes the
    c largest tags, so its tag is min(ts[n-c], negate(ts[n-c-1])); the
    boundary worlds are count n -> ts[0] and count 0 -> negate(ts[n-1]).
    Equals brute-force world maximization.
    """
    from .dual import DualNumber, dual_min, dual_negate_from_one

    n = len(tags)
    if n == 0:
        return {0: 1.0}
    dual = isinstance(tags[0], DualNumber)
    ts = sorted(tags, key=(lambda t: t.prob) if dual else (lambda t: t))
    neg = dual_negate_from_one if dual else (lambda t: 1.0 - t)
    mn = dual_min if dual else min
    out = {n: ts[0], 0: neg(ts[n - 1])}
    for c in range(1, n):
        out[c] = mn(ts[n - c], neg(ts[n - c - 1]))
    return out


def _world_aggregate(spec: AggSpec, items: list, prov, world_cap: int) -> dict:
    n = len(items)
    if n > world_cap:
        raise EvaluationAborted(
            f"aggregate {spec.name!r} over {n} tagged tuples exceeds the "
            f"world cap of {world_cap} (2^{world_cap} worlds)"
        )
    out: dict = {}
    for mask in range(1 << n):
        tag = prov.one
        chosen = []
        for i, (tup, t) in enumerate(items):
            if mask >> i & 1:
                tag = prov.mult(tag, t)
                chosen.append(tup)
            else:
                tag = prov.mult(tag, prov.negate(t))
        for result in discrete_apply(spec, chosen):
            if result in out:
                out[result] = prov.add(out[result], tag)
            else:
                out[result] = tag
    return out


def _aggregate_one_group(spec: AggSpec, items: list, prov, world_cap: int) -> dict:
    """Aggregate the tuples of a single group; returns result tuple -> tag."""
    if prov.name == "unit":
        return {r: prov.one for r in discrete_apply(spec, [tup for tup, _ in items])}
    if spec.name == "count" and prov.name in ("minmaxprob", "diffminmaxprob"):
        counts = mmp_count([t for _, t in items])
        return {(c,): tag for c, tag in sorted(counts.items())}
    if spec.name in ("exists", "forall") and prov.absorptive:
        # One disjunct per input suffices under absorption; the opposite
        # outcome is the single all-off world.
        all_off = prov.one
        some_on = None
        for _, t in items:
            all_off = prov.mult(all_off, prov.negate(t))
            some_on = t if some_on is None else prov.add(some_on, t)
        positive = spec.name == "exists"
        out = {}
        if some_on is not None:
            out[(positive,)] = some_on
        out[(not positive,)] = all_off
        return out
    return _world_aggregate(spec, items, prov, world_cap)


def evaluate_aggregate(
    spec: AggSpec,
    groups: dict,
    body: dict,
    prov,
    world_cap: int = WORLD_CAP_DEFAULT,
) -> dict:
    """Group-by aggregation; plain aggregation passes groups={(): one}.

    `groups` maps group keys to tags; `body` maps body tuples (group key
    prefix ++ value columns) to tags.  Worlds are enumerated independently
    per group, and the group tag is multiplied into every result.
    """
    ga = spec.group_arity
    by_key: dict = {}
    for tup, t in body.items():
        by_key.setdefault(tup[:ga], []).append((tup[ga:], t))
    out: dict = {}
    for gkey in sorted(groups, key=untyped_tuple_key):
        gtag = groups[gkey]
        items = sorted(by_key.get(gkey, []), key=lambda it: untyped_tuple_key(it[0]))
        for rtuple, wtag in _aggregate_one_group(spec, items, prov, world_cap).items():
            full = gkey + rtuple
            tag = prov.mult(gtag, wtag)
            out[full] = prov.add(out[full], tag) if full in out else tag
    return out


def _choose(spec: SamplerSpec, weighted: list, rng) -> list:
    """Pick tuples per the sampler; `weighted` is [(tuple, weight)] in
    canonical tuple order.  All-zero weights fall back to uniform choice."""
    k = spec.count
    if spec.kind == "top":
        ranked = sorted(weighted, key=lambda it: (-it[1], untyped_tuple_key(it[0])))
        return [tup for tup, _ in ranked[:k]]
    if spec.kind == "uniform":
        if len(weighted) <= k:
            return [tup for tup, _ in weighted]
        return sorted(
            rng.sample([tup for tup, _ in weighted], k), key=untyped_tuple_key
        )
    if spec.kind == "categorical":
        total = sum(w for _, w in weighted)
        chosen = set()
        for _ in range(k):
            if total <= 0.0:
                chosen.add(rng.choice([tup for tup, _ in weighted]))
                continue
            x = rng.random() * total
            acc = 0.0
            pick = weighted[-1][0]
            for tup, w in weighted:
                acc += w
                if x < acc:
                    pick = tup
                    break
            chosen.add(pick)
        return sorted(chosen, key=untyped_tuple_key)
    raise ValueError(f"unknown sampler {spec.kind!r}")


def evaluate_sample(
    spec: SamplerSpec,
    groups: dict,
    body: dict,
    prov,
    rng,
) -> dict:
    """Group-by sampling; plain sampling passes groups={(): one}.

    Chosen tuples keep their original tags (times the group tag); the
    sampler itself only sees weights.
    """
    ga = spec.group_arity
    by_key: dict = {}
    for tup, t in body.items():
        by_key.setdefault(tup[:ga], []).append((tup[ga:], t))
    out: dict = {}
    for gkey in sorted(groups, key=untyped_tuple_key):
        gtag = groups[gkey]
        items = sorted(by_key.get(gkey, []), key=lambda it: untyped_tuple_key(it[0]))
        if not items:
            continue
        weighted = [(tup, prov.weight(t)) for tup, t in items]
        tags = {tup: t for tup, t in items}
        for tup in _choose(spec, weighted, rng):
            full = gkey + tup
            tag = prov.mult(gtag, tags[tup])
            out[full] = prov.add(out[full], tag) if full in out else tag
    return out
