"""Shared test oracles, deliberately independent of the library internals.

The truth-table oracle evaluates formulas row by row over explicit
assignment dictionaries instead of bitmask arithmetic, and the binding
oracle enumerates complete injective matchings with itertools.  Slow but
obviously correct, which is the point.
"""

from __future__ import annotations

import itertools
import random

from foleq.similarity import levenshtein
from foleq.syntax import Atom, Binary, FolExpr, Not, Quantified, atoms_of


def strip_quantifiers(expr: FolExpr) -> FolExpr:
    if isinstance(expr, Quantified):
        return strip_quantifiers(expr.body)
    if isinstance(expr, Not):
        return Not(strip_quantifiers(expr.body))
    if isinstance(expr, Binary):
        return Binary(expr.op, strip_quantifiers(expr.left), strip_quantifiers(expr.right))
    return expr


def eval_row(expr: FolExpr, assignment: dict[str, bool]) -> bool:
    """Evaluate the quantifier-stripped skeleton under one assignment keyed
    by atom canonical text."""
    if isinstance(expr, Quantified):
        return eval_row(expr.body, assignment)
    if isinstance(expr, Atom):
        key = expr.predicate
        if expr.args:
            key = f"{expr.predicate}({', '.join(expr.args)})"
        return assignment[key]
    if isinstance(expr, Not):
        return not eval_row(expr.body, assignment)
    left = eval_row(expr.left, assignment)
    right = eval_row(expr.right, assignment)
    if expr.op == "and":
        return left and right
    if expr.op == "or":
        return left or right
    if expr.op == "implies":
        return (not left) or right
    if expr.op == "iff":
        return left == right
    if expr.op == "xor":
        return left != right
    raise AssertionError(expr.op)


def agreement(pred: FolExpr, ref: FolExpr, mapping: dict[str, str]) -> float:
    """Fraction of boolean assignments on which the two skeletons agree,
    with prediction atoms renamed through ``mapping`` (unmapped prediction
    atoms stay as themselves, i.e. free variables)."""
    pred_names = [a.canonical_text for a in atoms_of(pred)]
    ref_names = [a.canonical_text for a in atoms_of(ref)]
    variables = list(dict.fromkeys(ref_names))
    for name in pred_names:
        target = mapping.get(name, f"!unbound:{name}")
        if target not in variables:
            variables.append(target)
    rows = 0
    agree = 0
    for values in itertools.product([False, True], repeat=len(variables)):
        env = dict(zip(variables, values))
        pred_env = {
            name: env[mapping.get(name, f"!unbound:{name}")] for name in pred_names
        }
        rows += 1
        if eval_row(pred, pred_env) == eval_row(ref, env):
            agree += 1
    return agree / rows


def best_complete_matching(pred: FolExpr, ref: FolExpr):
    """Best (score, summed-levenshtein) over every complete injective
    matching of the smaller atom set into the larger.  Returns
    (score, min_lev, set of optimal mappings as frozensets of pairs)."""
    pred_names = [a.canonical_text for a in atoms_of(pred)]
    ref_names = [a.canonical_text for a in atoms_of(ref)]
    n_p, n_r = len(pred_names), len(ref_names)
    best = None
    if n_p <= n_r:
        candidates = itertools.permutations(range(n_r), n_p)
        def build(perm):
            return {pred_names[i]: ref_names[j] for i, j in enumerate(perm)}
    else:
        candidates = itertools.permutations(range(n_p), n_r)
        def build(perm):
            return {pred_names[i]: ref_names[j] for j, i in enumerate(perm)}
    for perm in candidates:
        mapping = build(perm)
        score = agreement(pred, ref, mapping)
        dist = sum(levenshtein(p, r) for p, r in mapping.items())
        key = (-score, dist)
        if best is None or key < best[0]:
            best = (key, {frozenset(mapping.items())})
        elif key == best[0]:
            best[1].add(frozenset(mapping.items()))
    (neg_score, dist), mappings = best
    return -neg_score, dist, mappings


# --- random formula generation ------------------------------------------------

_CONNECTIVES = ["and", "or", "implies", "iff", "xor"]


def _binary_nodes(expr: FolExpr) -> int:
    if isinstance(expr, Binary):
        return 1 + _binary_nodes(expr.left) + _binary_nodes(expr.right)
    if isinstance(expr, Not):
        return _binary_nodes(expr.body)
    if isinstance(expr, Quantified):
        return _binary_nodes(expr.body)
    return 0


def random_formula(
    rng: random.Random,
    max_atoms: int = 6,
    max_depth: int = 5,
    quantifiers: bool = True,
    predicates: list[str] | None = None,
) -> FolExpr:
    """Random formula whose canonical form has at most ``max_atoms`` distinct
    atoms.  Canonicalization can split one written atom into a bound and a
    free variant, so the bound is enforced by rejection, not construction."""
    predicates = predicates or ["P", "Q", "R", "S", "T", "U"]

    def sample() -> FolExpr:
        atom_pool: list[Atom] = []

        def fresh_atom() -> Atom:
            if atom_pool and (len(atom_pool) >= max_atoms or rng.random() < 0.4):
                return rng.choice(atom_pool)
            name = rng.choice(predicates)
            if rng.random() < 0.5:
                atom = Atom(name, (rng.choice("xyz"),))
            else:
                atom = Atom(name)
            if not any(a == atom for a in atom_pool):
                atom_pool.append(atom)
            return atom

        def build(depth: int) -> FolExpr:
            if depth >= max_depth or rng.random() < 0.3:
                return fresh_atom()
            roll = rng.random()
            if roll < 0.2:
                return Not(build(depth + 1))
            if quantifiers and roll < 0.3:
                quant = rng.choice(["forall", "exists"])
                return Quantified(quant, rng.choice("xyz"), build(depth + 1))
            op = rng.choice(_CONNECTIVES)
            return Binary(op, build(depth + 1), build(depth + 1))

        return build(0)

    from foleq.syntax import canonicalize

    while True:
        expr = sample()
        if len(atoms_of(canonicalize(expr))) > max_atoms:
            continue
        if _binary_nodes(expr) > 12:
            continue
        return expr
