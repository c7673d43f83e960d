"""Bounded arithmetic expression search over integer symbols.

Expressions are binary trees over seven integer operators, symbol leaves and
the constant literals {1, 2}. Trees are plain nested tuples so that subtrees
are shared and hashing is cheap:

    ("sym", i)        symbol (or hole) with 0-based index i
    ("const", c)      integer literal
    (op, left, right) with op in OPS

Division and mod are integer floor operations; dividing by zero yields the
undefined value, which propagates upward. Hole templates use the same shape
with ("sym", j) meaning hole j; hole indices always form a contiguous prefix
in left-to-right first-use order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb

import numpy as np

OPS = ("+", "-", "*", "//", "min", "max", "mod")
OP_RANK = {op: i for i, op in enumerate(OPS)}
COMMUTATIVE = {"+", "*", "min", "max"}
MAX_OPS = 5
DEFAULT_CONSTANTS = (1, 2)

FINGERPRINT_K = 16
FINGERPRINT_SEED = 0x5EED
FINGERPRINT_VALUES = (0, 1, 2, 3, 5, 7, 17, 256)


# --------------------------------------------------------------------------
# Basic tree helpers


def is_leaf(tree) -> bool:
    return tree[0] in ("sym", "const")


def op_count(tree) -> int:
    if is_leaf(tree):
        return 0
    return 1 + op_count(tree[1]) + op_count(tree[2])


def symbols_of(tree) -> frozenset[int]:
    if tree[0] == "sym":
        return frozenset((tree[1],))
    if tree[0] == "const":
        return frozenset()
    return symbols_of(tree[1]) | symbols_of(tree[2])


def hole_count(tree) -> int:
    syms = symbols_of(tree)
    return 0 if not syms else max(syms) + 1


def canon_key(tree) -> tuple:
    """Total order key: (op count, prefix-free preorder token tuple)."""
    return (op_count(tree), _flat(tree))


def _flat(tree) -> tuple:
    if tree[0] == "sym":
        return ((0, tree[1]),)
    if tree[0] == "const":
        return ((1, tree[1]),)
    return ((2, OP_RANK[tree[0]], op_count(tree[1])),) + _flat(tree[1]) + _flat(tree[2])


def format_expr(tree, names=None) -> str:
    if tree[0] == "sym":
        return names[tree[1]] if names else f"s{tree[1]}"
    if tree[0] == "const":
        return str(tree[1])
    return f"({tree[0]} {format_expr(tree[1], names)} {format_expr(tree[2], names)})"


def parse_expr(text: str, names=None):
    """Parse the s-expression format produced by format_expr."""
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    pos = 0

    def atom(tok):
        try:
            return ("const", int(tok))
        except ValueError:
            pass
        if names is not None and tok in names:
            return ("sym", names.index(tok) if isinstance(names, (list, tuple)) else names[tok])
        if tok.startswith("s") and tok[1:].isdigit():
            return ("sym", int(tok[1:]))
        raise ValueError(f"unknown symbol {tok!r}")

    def parse():
        nonlocal pos
        tok = tokens[pos]
        pos += 1
        if tok != "(":
            return atom(tok)
        op = tokens[pos]
        pos += 1
        if op not in OPS:
            raise ValueError(f"unknown operator {op!r}")
        left = parse()
        right = parse()
        if tokens[pos] != ")":
            raise ValueError("expected ')'")
        pos += 1
        return (op, left, right)

    tree = parse()
    if pos != len(tokens):
        raise ValueError(f"trailing tokens in {text!r}")
    return tree


# --------------------------------------------------------------------------
# Evaluation (scalar, exact Python ints; None is the undefined value)


def eval_expr(tree, values):
    """Evaluate over integer values (indexable by symbol index).

    Returns an int, or None on division/modulo by zero (propagated).
    Unresolvable symbols raise IndexError/KeyError: a programming bug.
    """
    kind = tree[0]
    if kind == "sym":
        return values[tree[1]]
    if kind == "const":
        return tree[1]
    a = eval_expr(tree[1], values)
    b = eval_expr(tree[2], values)
    if a is None or b is None:
        return None
    if kind == "+":
        return a + b
    if kind == "-":
        return a - b
    if kind == "*":
        return a * b
    if kind == "//":
        return None if b == 0 else a // b
    if kind == "min":
        return a if a <= b else b
    if kind == "max":
        return a if a >= b else b
    if kind == "mod":
        return None if b == 0 else a % b
    raise ValueError(f"bad op {kind}")


def eval_vec(tree, mat: np.ndarray, defined: np.ndarray | None = None):
    """Vectorized evaluation over a (n_symbols, R) int64 matrix.

    Returns (values (R,) int64, defined (R,) bool); undefined slots hold 0.
    """
    kind = tree[0]
    R = mat.shape[1]
    if kind == "sym":
        return mat[tree[1]].copy(), np.ones(R, dtype=bool)
    if kind == "const":
        return np.full(R, tree[1], dtype=np.int64), np.ones(R, dtype=bool)
    av, ad = eval_vec(tree[1], mat)
    bv, bd = eval_vec(tree[2], mat)
    return _apply_vec(kind, av, ad, bv, bd)


def _apply_vec(op, av, ad, bv, bd):
    d = ad & bd
    if op == "+":
        v = av + bv
    elif op == "-":
        v = av - bv
    elif op == "*":
        v = av * bv
    elif op == "//":
        nz = bv != 0
        d = d & nz
        v = np.floor_divide(av, np.where(nz, bv, 1))
    elif op == "min":
        v = np.minimum(av, bv)
    elif op == "max":
        v = np.maximum(av, bv)
    elif op == "mod":
        nz = bv != 0
        d = d & nz
        v = np.mod(av, np.where(nz, bv, 1))
    else:
        raise ValueError(op)
    return np.where(d, v, 0), d


# --------------------------------------------------------------------------
# Linear normal form (used by the equivalence deciders and the prover)


def linear_form(tree):
    """Return ({sym: coeff}, const) Fractions when the tree is affine, else None.

    Multiplication is linear only when one side has no symbols; //, mod, min,
    max never normalize.
    """
    kind = tree[0]
    if kind == "sym":
        return ({tree[1]: Fraction(1)}, Fraction(0))
    if kind == "const":
        return ({}, Fraction(tree[1]))
    lf = linear_form(tree[1])
    rf = linear_form(tree[2])
    if lf is None or rf is None:
        return None
    (lc, lk), (rc, rk) = lf, rf
    if kind == "+":
        return (_merge(lc, rc, 1), lk + rk)
    if kind == "-":
        return (_merge(lc, rc, -1), lk - rk)
    if kind == "*":
        if not lc:
            return ({s: c * lk for s, c in rc.items() if c * lk != 0}, rk * lk)
        if not rc:
            return ({s: c * rk for s, c in lc.items() if c * rk != 0}, lk * rk)
        return None
    return None


def _merge(a, b, sign):
    out = dict(a)
    for s, c in b.items():
        out[s] = out.get(s, Fraction(0)) + sign * c
        if out[s] == 0:
            del out[s]
    return out


# --------------------------------------------------------------------------
# Fingerprints and equivalence deciders


def fingerprint_assignments(k: int = FINGERPRINT_K, seed: int = FINGERPRINT_SEED,
                            max_holes: int = 6) -> np.ndarray:
    """Fixed (max_holes, k) assignment matrix; columns 0/1 are all-zeros/ones."""
    rng = np.random.default_rng(seed)
    vals = rng.choice(FINGERPRINT_VALUES, size=(max_holes, k)).astype(np.int64)
    vals[:, 0] = 0
    vals[:, 1] = 1
    return vals


def fingerprint(tree, assignments: np.ndarray) -> bytes:
    v, d = eval_vec(tree, assignments)
    return v.tobytes() + d.tobytes()


@dataclass(frozen=True)
class PruningConfig:
    """Knobs for enumerate_hole_exprs.

    equivalence_domain: when set, the rigorous equivalence pass decides by
    exhaustive evaluation over that domain (used when a caller pins the
    semantic domain, e.g. oracle tests); when None, only proven-equal pairs
    (identical trees or equal linear normal forms) are merged, which never
    merges distinguishable expressions.
    """

    rarity: bool = True
    equivalence: bool = True
    fingerprint_k: int = FINGERPRINT_K
    fingerprint_seed: int = FINGERPRINT_SEED
    equivalence_domain: tuple[int, ...] | None = None


@dataclass(frozen=True)
class HoleExpr:
    tree: tuple
    holes: int

    def key(self):
        return canon_key(self.tree)


def _renumber(tree):
    """Renumber holes to first-use order; returns (tree, n_holes)."""
    mapping: dict[int, int] = {}

    def walk(t):
        if t[0] == "sym":
            if t[1] not in mapping:
                mapping[t[1]] = len(mapping)
            return ("sym", mapping[t[1]])
        if t[0] == "const":
            return t
        return (t[0], walk(t[1]), walk(t[2]))

    out = walk(tree)
    return out, len(mapping)


def _structure_ok(op, left, right, rarity: bool) -> bool:
    """Generation-time canonical filters. Sound: a banned tree always has a
    surviving tree with the same ordered hole-function (rotations preserve
    leaf order; identical-structure commutative swaps renumber identically).
    """
    if rarity and left[0] == "const" and right[0] == "const":
        return False
    if not is_leaf(right):
        if op in COMMUTATIVE and right[0] == op:
            return False  # left-deep chains only
        if op == "-" and right[0] in ("+", "-"):
            return False  # a-(b+c) == (a-b)-c, a-(b-c) == (a-b)+c
    return True


def _shape_blind(tree) -> tuple:
    if tree[0] == "sym":
        return ("S",)
    if tree[0] == "const":
        return ("C", tree[1])
    return (tree[0], _shape_blind(tree[1]), _shape_blind(tree[2]))


def _merge_maps(h_left: int, h_right: int, rarity: bool):
    """Ways to map the right subtree's holes into a combined numbering.

    With rarity, holes are disjoint: single shift map. Without rarity, all
    first-use-order-preserving maps into existing + new labels.
    """
    if rarity:
        yield {j: h_left + j for j in range(h_right)}
        return

    def rec(j, used_new, current):
        if j == h_right:
            yield dict(current)
            return
        for target in range(h_left + used_new):
            current[j] = target
            yield from rec(j + 1, used_new, current)
        current[j] = h_left + used_new
        yield from rec(j + 1, used_new + 1, current)
        del current[j]

    yield from rec(0, 0, {})


def _remap(tree, mapping):
    if tree[0] == "sym":
        return ("sym", mapping[tree[1]])
    if tree[0] == "const":
        return tree
    return (tree[0], _remap(tree[1], mapping), _remap(tree[2], mapping))


def enumerate_hole_exprs(max_ops: int, constants=DEFAULT_CONSTANTS,
                         pruning: PruningConfig = PruningConfig(),
                         max_holes: int = 6,
                         cache_path=None) -> list[HoleExpr]:
    """Enumerate pruned hole templates up to max_ops operators, sorted by
    (op count, canonical key). Smaller trees are shared inside larger ones.
    """
    if cache_path is not None:
        cached = _load_cache(cache_path, max_ops, constants, pruning, max_holes)
        if cached is not None:
            return cached

    tiers: list[list[tuple]] = [[("sym", 0)] + [("const", c) for c in constants]]
    seen = {t for t in tiers[0]}
    for k in range(1, max_ops + 1):
        tier: list[tuple] = []
        for op in OPS:
            for i in range(k):
                j = k - 1 - i
                for left in tiers[i]:
                    hl = hole_count(left)
                    for right in tiers[j]:
                        if not _structure_ok(op, left, right, pruning.rarity):
                            continue
                        if op in COMMUTATIVE and _shape_blind(left) == _shape_blind(right) and i == j:
                            pass  # swapped order renumbers identically; set-dedup below
                        for mp in _merge_maps(hl, hole_count(right), pruning.rarity):
                            cand = (op, left, _remap(right, mp))
                            cand, holes = _renumber(cand)
                            if holes > max_holes:
                                continue
                            if cand not in seen:
                                seen.add(cand)
                                tier.append(cand)
        tier.sort(key=canon_key)
        tiers.append(tier)

    exprs = [t for tier in tiers for t in tier]
    if pruning.equivalence:
        exprs = prune_equivalence(
            [HoleExpr(t, hole_count(t)) for t in exprs], pruning)
        result = sorted(exprs, key=lambda h: h.key())
    else:
        result = sorted((HoleExpr(t, hole_count(t)) for t in exprs),
                        key=lambda h: h.key())
    if cache_path is not None:
        _save_cache(cache_path, max_ops, constants, pruning, max_holes, result)
    return result


def prune_equivalence(exprs: list[HoleExpr],
                      pruning: PruningConfig = PruningConfig()) -> list[HoleExpr]:
    """Keep one representative (fewest ops, then canonical order) per proven
    equivalence class. Pairs that cannot be decided are both kept.
    """
    fp = fingerprint_assignments(pruning.fingerprint_k, pruning.fingerprint_seed)
    groups: dict[tuple, list[HoleExpr]] = {}
    for he in sorted(exprs, key=lambda h: h.key()):
        groups.setdefault((he.holes, fingerprint(he.tree, fp)), []).append(he)

    survivors: list[HoleExpr] = []
    for (_holes, _f), members in groups.items():
        if len(members) == 1:
            survivors.append(members[0])
            continue
        survivors.extend(_merge_group(members, pruning))
    return sorted(survivors, key=lambda h: h.key())


def _merge_group(members: list[HoleExpr], pruning: PruningConfig) -> list[HoleExpr]:
    if pruning.equivalence_domain is not None:
        dom = np.array(pruning.equivalence_domain, dtype=np.int64)
        classes: dict[bytes, HoleExpr] = {}
        for he in members:
            mat = _domain_matrix(dom, max(he.holes, 1))
            v, d = eval_vec(he.tree, mat)
            key = np.where(d, v, 0).tobytes() + d.tobytes()
            classes.setdefault(key, he)
        return list(classes.values())
    # proof-only mode: merge identical linear normal forms
    classes2: dict[tuple, HoleExpr] = {}
    rest: list[HoleExpr] = []
    for he in members:
        lf = linear_form(he.tree)
        if lf is None:
            rest.append(he)
            continue
        key = (tuple(sorted(lf[0].items())), lf[1])
        classes2.setdefault(key, he)
    return list(classes2.values()) + rest


def _domain_matrix(dom: np.ndarray, holes: int) -> np.ndarray:
    grids = np.meshgrid(*([dom] * holes), indexing="ij")
    return np.stack([g.ravel() for g in grids]).astype(np.int64)


def exhaustive_equal(a, b, holes: int, domain) -> bool:
    """Pointwise equality (with undefined) over domain^holes."""
    dom = np.array(domain, dtype=np.int64)
    mat = _domain_matrix(dom, max(holes, 1))
    va, da = eval_vec(a, mat)
    vb, db = eval_vec(b, mat)
    return bool(np.array_equal(da, db) and np.array_equal(va[da], vb[db]))


# --------------------------------------------------------------------------
# Hole extension


def extend_holes(hole_exprs: list[HoleExpr], n_symbols: int) -> list[tuple]:
    """Fill hole templates with actual symbols: injective, order-preserving
    (hole j receives the j-th smallest selected symbol index). Templates with
    h holes contribute C(n, h) expressions; 0-hole templates contribute none.
    Output is sorted by (op count, canonical key).
    """
    out = []
    for he in hole_exprs:
        h = he.holes
        if h == 0 or h > n_symbols:
            continue
        for combo in combinations(range(n_symbols), h):
            out.append(_remap(he.tree, dict(enumerate(combo))))
    out.sort(key=canon_key)
    return out


# --------------------------------------------------------------------------
# Counting (for pruning-ablation monotonicity checks)


def count_hole_templates(max_ops: int, n_constants: int = 2,
                         rarity: bool = True, max_holes: int = 6) -> dict[int, int]:
    """Count raw templates per distinct-hole count via DP (no enumeration).

    rarity=False counts trees whose holes may repeat (first-use contiguous),
    rarity=True counts distinct-hole trees without const-const nodes.
    """
    # f[k][h] maps op count -> {holes: count}; consts tracked for the
    # const-const ban via g (number of bare-const leaves only matters at k=0)
    f = [dict() for _ in range(max_ops + 1)]
    f[0] = {0: n_constants, 1: 1}
    mm = _merge_count_table(max_holes)
    for k in range(1, max_ops + 1):
        acc: dict[int, int] = {}
        for i in range(k):
            j = k - 1 - i
            for h1, c1 in f[i].items():
                for h2, c2 in f[j].items():
                    if rarity:
                        if i == 0 and j == 0 and h1 == 0 and h2 == 0:
                            continue  # const-const node
                        h = h1 + h2
                        if h <= max_holes:
                            acc[h] = acc.get(h, 0) + c1 * c2
                    else:
                        for t in range(h2 + 1):
                            h = h1 + t
                            if h <= max_holes:
                                acc[h] = acc.get(h, 0) + c1 * c2 * mm[h2][h1][t]
        f[k] = {h: 7 * c for h, c in acc.items()}
    total: dict[int, int] = {}
    for k in range(max_ops + 1):
        for h, c in f[k].items():
            total[h] = total.get(h, 0) + c
    return total


def _merge_count_table(max_holes: int):
    """mm[h2][h1][t]: order-preserving maps of h2 labels onto h1 existing
    plus exactly t new labels."""
    mm = []
    for h2 in range(max_holes + 1):
        row = []
        for h1 in range(max_holes + 1):
            g = [0] * (h2 + 1)
            g[0] = 1
            for _pos in range(h2):
                ng = [0] * (h2 + 1)
                for u, c in enumerate(g):
                    if c == 0:
                        continue
                    ng[u] += c * (h1 + u)
                    if u + 1 <= h2:
                        ng[u + 1] += c
                g = ng
            row.append(g)
        mm.append(row)
    return mm


def count_extended(n_symbols: int, max_ops: int,
                   rarity: bool, equivalence: bool,
                   constants=DEFAULT_CONSTANTS,
                   equivalence_domain=None) -> int:
    """|E| for a symbol set of size n under a pruning config. Non-equivalence
    configs are counted by DP; equivalence configs by enumeration (use small
    max_ops)."""
    if not equivalence:
        per_h = count_hole_templates(max_ops, len(constants), rarity)
    else:
        cfg = PruningConfig(rarity=rarity, equivalence=True,
                            equivalence_domain=equivalence_domain)
        exprs = enumerate_hole_exprs(max_ops, constants, cfg)
        per_h: dict[int, int] = {}
        for he in exprs:
            per_h[he.holes] = per_h.get(he.holes, 0) + 1
    return sum(c * comb(n_symbols, h) for h, c in per_h.items()
               if 1 <= h <= n_symbols)


# --------------------------------------------------------------------------
# Template cache file

_CACHE_VERSION = 1


def _cache_header(max_ops, constants, pruning: PruningConfig, max_holes):
    return {
        "version": _CACHE_VERSION,
        "max_ops": max_ops,
        "constants": list(constants),
        "rarity": pruning.rarity,
        "equivalence": pruning.equivalence,
        "fingerprint_k": pruning.fingerprint_k,
        "fingerprint_seed": pruning.fingerprint_seed,
        "equivalence_domain": list(pruning.equivalence_domain) if pruning.equivalence_domain else None,
        "max_holes": max_holes,
    }


def _save_cache(path, max_ops, constants, pruning, max_holes, exprs):
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps(_cache_header(max_ops, constants, pruning, max_holes)) + "\n")
        for he in exprs:
            f.write(format_expr(he.tree) + "\n")


def _load_cache(path, max_ops, constants, pruning, max_holes):
    try:
        with open(path, encoding="utf-8") as f:
            header = json.loads(f.readline())
            if header != _cache_header(max_ops, constants, pruning, max_holes):
                return None
            out = []
            for line in f:
                line = line.strip()
                if line:
                    tree = parse_expr(line)
                    out.append(HoleExpr(tree, hole_count(tree)))
            return out
    except (OSError, ValueError):
        return None
