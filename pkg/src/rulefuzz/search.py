"""Goal-directed search for expressions matching record data.

Builds a tier pyramid of distinct-behavior expressions over the record value
matrix (bottom-up, observational dedup on full record vectors), then finds an
expression whose value vector equals a target vector:

  * op counts covered by built tiers: exact scan in canonical order, so the
    returned expression is the first match in enumeration order;
  * deeper op counts: deterministic root inversion (point inverses for
    +, -, *; bounded co-operand scans for //, min, max, mod; box descent
    through //), returning the minimal found match.

Candidate hits are re-verified by the caller against exact data, so hash
collisions and int64 overflow cannot produce wrong results.
"""

from __future__ import annotations

import time

import numpy as np

from .exprsynth import (
    OPS,
    OP_RANK,
    COMMUTATIVE,
    canon_key,
    is_leaf,
    symbols_of,
)

_NO_SYM = np.int32(1 << 30)


class Deadline:
    def __init__(self, seconds: float | None):
        self.t_end = None if seconds is None else time.monotonic() + seconds

    def expired(self) -> bool:
        return self.t_end is not None and time.monotonic() > self.t_end


class _Tier:
    __slots__ = ("vals", "defined", "defined_all", "mask", "minsym", "root",
                 "shape", "left", "right", "hash", "hash_sorted", "hash_order",
                 "n")

    def __init__(self):
        self.n = 0


class ExprSearch:
    """Expression pyramid over a fixed (n_symbols, n_records) int64 matrix."""

    def __init__(self, sym_matrix: np.ndarray, constants=(1, 2), max_tier: int = 2):
        self.S = np.ascontiguousarray(sym_matrix, dtype=np.int64)
        self.n_syms, self.R = self.S.shape
        self.constants = tuple(constants)
        self.max_tier = max_tier
        rng = np.random.default_rng(0xC0FFEE)
        self._hv = rng.integers(1, 2**62, size=self.R, dtype=np.int64) | 1
        self._hd = rng.integers(1, 2**62, size=self.R, dtype=np.int64) | 1
        n_probe = min(4, self.R)
        self._probe = np.linspace(0, self.R - 1, n_probe).astype(np.int64)
        self._shape_ids: dict[tuple, int] = {}
        self.tiers: list[_Tier] = []
        self._tree_cache: dict[tuple[int, int], tuple] = {}
        self._build_tier0()

    # -- construction -----------------------------------------------------

    def _shape_id(self, key: tuple) -> int:
        sid = self._shape_ids.get(key)
        if sid is None:
            sid = len(self._shape_ids)
            self._shape_ids[key] = sid
        return sid

    def _rowhash(self, vals: np.ndarray, defined: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore"):
            return vals @ self._hv + defined.astype(np.int64) @ self._hd

    def _build_tier0(self):
        t = _Tier()
        n = self.n_syms + len(self.constants)
        t.n = n
        t.vals = np.empty((n, self.R), dtype=np.int64)
        t.vals[: self.n_syms] = self.S
        for k, c in enumerate(self.constants):
            t.vals[self.n_syms + k] = c
        t.defined = np.ones((n, self.R), dtype=bool)
        t.defined_all = np.ones(n, dtype=bool)
        t.mask = np.zeros(n, dtype=np.int64)
        t.mask[: self.n_syms] = 1 << np.arange(self.n_syms, dtype=np.int64)
        t.minsym = np.full(n, _NO_SYM, dtype=np.int32)
        t.minsym[: self.n_syms] = np.arange(self.n_syms, dtype=np.int32)
        t.root = np.full(n, -1, dtype=np.int8)
        t.shape = np.empty(n, dtype=np.int32)
        sym_sid = self._shape_id(("S",))
        t.shape[: self.n_syms] = sym_sid
        for k, c in enumerate(self.constants):
            t.shape[self.n_syms + k] = self._shape_id(("C", c))
        t.left = np.full(n, -1, dtype=np.int64)
        t.right = np.full(n, -1, dtype=np.int64)
        t.hash = self._rowhash(t.vals, t.defined)
        t.hash_order = np.argsort(t.hash, kind="stable")
        t.hash_sorted = t.hash[t.hash_order]
        self.tiers.append(t)

    def ensure_tier(self, k: int, deadline: Deadline | None = None) -> bool:
        """Build tiers up to k; returns False if the deadline struck first."""
        while len(self.tiers) <= min(k, self.max_tier):
            if deadline is not None and deadline.expired():
                return False
            self._build_tier(len(self.tiers), deadline)
        return True

    def _pair_indices(self, op: str, ti: _Tier, tj: _Tier, same: bool):
        """Index pairs passing rarity/canonical filters for op(ti[l], tj[r])."""
        ok = (ti.mask[:, None] & tj.mask[None, :]) == 0
        # no binary node over two constant leaves
        lconst = (ti.minsym == _NO_SYM) & (ti.root == -1)
        rconst = (tj.minsym == _NO_SYM) & (tj.root == -1)
        if lconst.any() and rconst.any():
            ok &= ~(lconst[:, None] & rconst[None, :])
        # left-deep association
        if op in COMMUTATIVE:
            ok &= tj.root[None, :] != OP_RANK[op]
        elif op == "-":
            ok &= (tj.root[None, :] != OP_RANK["+"]) & (tj.root[None, :] != OP_RANK["-"])
        # skip one order of commutative pairs with identical hole-blind shape
        if op in COMMUTATIVE and same:
            shape_eq = ti.shape[:, None] == tj.shape[None, :]
            ok &= ~(shape_eq & (ti.minsym[:, None] > tj.minsym[None, :]))
        return np.nonzero(ok)

    def _build_tier(self, k: int, deadline: Deadline | None):
        prior = np.sort(np.concatenate([t.hash for t in self.tiers]))
        chunks = {"vals": [], "defined": [], "left": [], "right": [], "op": []}
        seen = prior
        for op in OPS:
            for i in range(k):
                j = k - 1 - i
                ti, tj = self.tiers[i], self.tiers[j]
                if ti.n == 0 or tj.n == 0:
                    continue
                li, rj = self._pair_indices(op, ti, tj, same=(i == j))
                if len(li) == 0:
                    continue
                step = max(1, (1 << 22) // max(1, self.R))  # ~32MB chunks
                for s in range(0, len(li), step):
                    if deadline is not None and deadline.expired():
                        return self._finish_tier(chunks)
                    sl = slice(s, s + step)
                    lv, ld = ti.vals[li[sl]], ti.defined[li[sl]]
                    rv, rd = tj.vals[rj[sl]], tj.defined[rj[sl]]
                    v, d = _apply_rows(op, lv, ld, rv, rd)
                    h = self._rowhash(v, d)
                    uh, first = np.unique(h, return_index=True)
                    keep = first[~np.isin(uh, seen)]
                    keep.sort()
                    if len(keep) == 0:
                        continue
                    seen = np.sort(np.concatenate([seen, h[keep]]))
                    chunks["vals"].append(v[keep])
                    chunks["defined"].append(d[keep])
                    chunks["left"].append(_gref(i, li[sl][keep]))
                    chunks["right"].append(_gref(j, rj[sl][keep]))
                    chunks["op"].append(np.full(len(keep), OP_RANK[op], dtype=np.int8))
        self._finish_tier(chunks)

    def _finish_tier(self, chunks):
        t = _Tier()
        if not chunks["vals"]:
            t.vals = np.empty((0, self.R), dtype=np.int64)
            t.defined = np.empty((0, self.R), dtype=bool)
            t.defined_all = np.empty(0, dtype=bool)
            t.mask = np.empty(0, dtype=np.int64)
            t.minsym = np.empty(0, dtype=np.int32)
            t.root = np.empty(0, dtype=np.int8)
            t.shape = np.empty(0, dtype=np.int32)
            t.left = t.right = np.empty(0, dtype=np.int64)
            t.hash = np.empty(0, dtype=np.int64)
            t.hash_sorted = t.hash
            t.hash_order = np.empty(0, dtype=np.int64)
            self.tiers.append(t)
            return
        t.vals = np.concatenate(chunks["vals"])
        t.defined = np.concatenate(chunks["defined"])
        t.left = np.concatenate(chunks["left"])
        t.right = np.concatenate(chunks["right"])
        t.root = np.concatenate(chunks["op"])
        t.n = len(t.vals)
        t.defined_all = t.defined.all(axis=1)
        lm = self._meta(t.left)
        rm = self._meta(t.right)
        t.mask = lm["mask"] | rm["mask"]
        t.minsym = np.minimum(lm["minsym"], rm["minsym"])
        t.shape = np.empty(t.n, dtype=np.int32)
        for x in range(t.n):
            t.shape[x] = self._shape_id(
                (OPS[t.root[x]], int(lm["shape"][x]), int(rm["shape"][x])))
        t.hash = self._rowhash(t.vals, t.defined)
        t.hash_order = np.argsort(t.hash, kind="stable")
        t.hash_sorted = t.hash[t.hash_order]
        self.tiers.append(t)

    def _meta(self, grefs: np.ndarray):
        out = {"mask": np.empty(len(grefs), dtype=np.int64),
               "minsym": np.empty(len(grefs), dtype=np.int32),
               "shape": np.empty(len(grefs), dtype=np.int32)}
        tiers = (grefs >> 32).astype(np.int64)
        idx = (grefs & 0xFFFFFFFF).astype(np.int64)
        for tnum in np.unique(tiers):
            m = tiers == tnum
            t = self.tiers[int(tnum)]
            out["mask"][m] = t.mask[idx[m]]
            out["minsym"][m] = t.minsym[idx[m]]
            out["shape"][m] = t.shape[idx[m]]
        return out

    # -- tree materialization ---------------------------------------------

    def tree(self, tier: int, idx: int) -> tuple:
        key = (tier, idx)
        got = self._tree_cache.get(key)
        if got is not None:
            return got
        t = self.tiers[tier]
        if tier == 0:
            if idx < self.n_syms:
                tree = ("sym", idx)
            else:
                tree = ("const", self.constants[idx - self.n_syms])
        else:
            l, r = int(t.left[idx]), int(t.right[idx])
            tree = (OPS[t.root[idx]],
                    self.tree(l >> 32, l & 0xFFFFFFFF),
                    self.tree(r >> 32, r & 0xFFFFFFFF))
        self._tree_cache[key] = tree
        return tree

    # -- lookups -------------------------------------------------------------

    def _lookup_batch(self, vals: np.ndarray, tier: int):
        """Exact matches of fully-defined rows in one tier: [(row, idx)]."""
        t = self.tiers[tier]
        if t.n == 0 or len(vals) == 0:
            return []
        with np.errstate(over="ignore"):
            h = vals @ self._hv + np.int64(self._hd.sum())
        pos = np.searchsorted(t.hash_sorted, h)
        cand = np.nonzero((pos < t.n) & (t.hash_sorted[np.minimum(pos, t.n - 1)] == h))[0]
        out = []
        for r in cand:
            p = int(pos[r])
            while p < t.n and t.hash_sorted[p] == h[r]:
                idx = int(t.hash_order[p])
                if t.defined_all[idx] and np.array_equal(t.vals[idx], vals[r]):
                    out.append((int(r), idx))
                p += 1
        return out

    def _scan_box(self, tier: int, lo: np.ndarray, hi: np.ndarray) -> list[int]:
        """Row indices of tier whose value lies in [lo, hi) on every record."""
        t = self.tiers[tier]
        if t.n == 0:
            return []
        p = self._probe
        near = ((t.vals[:, p] >= lo[p]) & (t.vals[:, p] < hi[p])).all(axis=1)
        near &= t.defined_all
        rows = np.nonzero(near)[0]
        out = []
        for idx in rows:
            v = t.vals[idx]
            if (v >= lo).all() and (v < hi).all():
                out.append(int(idx))
        return out

    def _scan_eq(self, tier: int, expected: np.ndarray) -> list[int]:
        return self._scan_box(tier, expected, expected + 1)

    # -- matching -------------------------------------------------------------

    def find_match(self, target, max_ops: int = 5,
                   deadline: Deadline | None = None, verify=None):
        """First expression (by op count, then canonical key) whose value
        vector equals target on every record. Candidates failing `verify`
        are skipped."""
        target = np.ascontiguousarray(target, dtype=np.int64)
        deadline = deadline or Deadline(None)
        for k in range(0, min(max_ops, self.max_tier) + 1):
            if not self.ensure_tier(k, deadline):
                return None
            hits = self._lookup_batch(target[None, :], k)
            for _, idx in hits:
                tree = self.tree(k, idx)
                if verify is None or verify(tree):
                    return tree
            if deadline.expired():
                return None
        for k in range(len(self.tiers), max_ops + 1):
            cands = self._top_down(target, k, deadline)
            for tree in sorted(set(cands), key=canon_key):
                if verify is None or verify(tree):
                    return tree
            if deadline.expired():
                return None
        return None

    def _orient(self, op: str, a: tuple, b: tuple):
        """Build op(a, b) in a filter-valid orientation, or None."""
        if symbols_of(a) & symbols_of(b):
            return None
        if a[0] == "const" and b[0] == "const":
            return None
        if op in COMMUTATIVE:
            first, second = (a, b) if canon_key(a) <= canon_key(b) else (b, a)
            for l, r in ((first, second), (second, first)):
                if is_leaf(r) or r[0] != op:
                    return (op, l, r)
            return None
        if op == "-" and b[0] in ("+", "-"):
            return None
        return (op, a, b)

    def _top_down(self, T: np.ndarray, k: int, deadline: Deadline,
                  depth: int = 0) -> list[tuple]:
        out: list[tuple] = []
        built = len(self.tiers) - 1
        # point-invertible roots: enumerate one side, look up the other
        for op in ("+", "-", "*"):
            for tier_b in range(min(2, built, k - 1) + 1):
                if deadline.expired():
                    return out
                i = k - 1 - tier_b
                t = self.tiers[tier_b]
                rows = np.nonzero(t.defined_all)[0]
                if len(rows) == 0:
                    continue
                BV = t.vals[rows]
                variants = []
                if op == "+":
                    variants = [(T[None, :] - BV, "ab", rows)]
                elif op == "-":
                    variants = [(T[None, :] + BV, "ab", rows), (BV - T[None, :], "ba", rows)]
                else:
                    nz = (BV != 0).all(axis=1)
                    sub = rows[nz]
                    if len(sub) == 0:
                        continue
                    BNZ = t.vals[sub]
                    q = np.floor_divide(T[None, :], BNZ)
                    exact = (q * BNZ == T[None, :]).all(axis=1)
                    variants = [(q[exact], "ab", sub[exact])]
                for TV, order, brows in variants:
                    if len(TV) == 0:
                        continue
                    if i <= built:
                        for r, idx in self._lookup_batch(TV, i):
                            at = self.tree(i, idx)
                            bt = self.tree(tier_b, int(brows[r]))
                            got = self._orient(op, at, bt) if order == "ab" \
                                else self._orient(op, bt, at)
                            if got is not None:
                                out.append(got)
                    elif tier_b == 0 and depth < 3:
                        for r in range(len(TV)):
                            if deadline.expired():
                                return out
                            bt = self.tree(0, int(brows[r]))
                            for at in self._top_down(TV[r], i, deadline, depth + 1):
                                got = self._orient(op, at, bt) if order == "ab" \
                                    else self._orient(op, bt, at)
                                if got is not None:
                                    out.append(got)
        # floor-division root: box search for the dividend
        for tier_b in range(min(1, built, k - 1) + 1):
            i = k - 1 - tier_b
            if tier_b == 1 and i > min(1, built):
                continue  # deep dividends only explored for tier-0 divisors
            t = self.tiers[tier_b]
            for idx_b in np.nonzero(t.defined_all & (t.vals > 0).all(axis=1))[0]:
                if deadline.expired():
                    return out
                bv = t.vals[idx_b]
                lo = T * bv
                for at in self._box_search(lo, lo + bv, i, deadline, depth):
                    bt = self.tree(tier_b, int(idx_b))
                    if not (symbols_of(at) & symbols_of(bt)):
                        out.append(("//", at, bt))
        # min / max / mod roots: bounded scans
        for op in ("min", "max", "mod"):
            for tier_b in range(min(1, built, k - 1) + 1):
                i = k - 1 - tier_b
                if i > (built if tier_b == 0 else 1) or i < 0:
                    continue
                if deadline.expired():
                    return out
                t = self.tiers[tier_b]
                for idx_b in np.nonzero(t.defined_all)[0]:
                    bv = t.vals[idx_b]
                    if op == "min":
                        if (bv < T).any():
                            continue
                        need_eq = bv > T  # where b > T the other side equals T
                    elif op == "max":
                        if (bv > T).any():
                            continue
                        need_eq = bv < T
                    else:
                        if (bv <= 0).any() or (T < 0).any() or (T >= bv).any():
                            continue
                        need_eq = None
                    hits = self._scan_binary(op, i, bv, T)
                    bt = None
                    for idx in hits:
                        at = self.tree(i, idx)
                        bt = bt or self.tree(tier_b, int(idx_b))
                        got = self._orient(op, at, bt)
                        if got is not None:
                            out.append(got)
        return out

    def _scan_binary(self, op: str, tier: int, bv: np.ndarray,
                     T: np.ndarray) -> list[int]:
        """Rows A of a tier with op(A, bv) == T everywhere (probe-prefiltered)."""
        t = self.tiers[tier]
        if t.n == 0:
            return []
        p = self._probe
        va, da = t.vals[:, p], None
        v, d = _apply_rows(op, va, np.ones_like(va, dtype=bool),
                           np.broadcast_to(bv[p], va.shape),
                           np.ones_like(va, dtype=bool))
        near = (d & (v == T[p])).all(axis=1) & t.defined_all
        out = []
        for idx in np.nonzero(near)[0]:
            v1, d1 = _apply_rows(op, t.vals[idx][None, :],
                                 t.defined[idx][None, :],
                                 bv[None, :], np.ones((1, self.R), dtype=bool))
            if d1.all() and (v1[0] == T).all():
                out.append(int(idx))
        return out

    def _box_search(self, lo: np.ndarray, hi: np.ndarray, ops: int,
                    deadline: Deadline, depth: int) -> list[tuple]:
        """Expressions with exactly `ops` operators whose value lies in
        [lo, hi) on every record. Descends through +/- with tier-0 shifts."""
        built = len(self.tiers) - 1
        if ops <= built:
            return [self.tree(ops, i) for i in self._scan_box(ops, lo, hi)]
        if depth >= 4 or deadline.expired():
            return []
        out = []
        t0 = self.tiers[0]
        for idx_c in range(t0.n):
            cv = t0.vals[idx_c]
            ctree = self.tree(0, idx_c)
            for s_lo, s_hi, build in (
                (lo - cv, hi - cv, lambda x: self._orient("+", x, ctree)),
                (lo + cv, hi + cv, lambda x: ("-", x, ctree)
                 if not (symbols_of(x) & symbols_of(ctree)) else None),
            ):
                for xt in self._box_search(s_lo, s_hi, ops - 1, deadline, depth + 1):
                    got = build(xt)
                    if got is not None:
                        out.append(got)
        return out

    # -- predicate-candidate access -------------------------------------------

    def reps(self, max_tier: int):
        """Yield (op_count, tree, values, defined) in canonical order."""
        for tier in range(min(max_tier, len(self.tiers) - 1) + 1):
            t = self.tiers[tier]
            for idx in range(t.n):
                yield tier, self.tree(tier, idx), t.vals[idx], t.defined[idx]


def _gref(tier: int, idx: np.ndarray) -> np.ndarray:
    return (np.int64(tier) << 32) | idx.astype(np.int64)


def _apply_rows(op, av, ad, bv, bd):
    d = ad & bd
    with np.errstate(over="ignore"):
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
