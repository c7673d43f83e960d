"""Sound-but-incomplete decision procedure for predicate implication.

Handles the linear fragment of the expression grammar exactly over the
rationals (Fourier-Motzkin refutation after Gaussian elimination of
equalities). Rational infeasibility implies integer infeasibility, so every
"proved" answer is sound; anything non-linear comes back unknown and callers
keep predicates conservatively.

Integer semantics of predicates: ``0 = e`` and ``0 < e`` with integer-valued
e, so ``0 < e`` is encoded as ``e - 1 >= 0``.
"""

from __future__ import annotations

from fractions import Fraction

from .exprsynth import linear_form

MAX_CONSTRAINTS = 4000

PROVED = "proved"
REFUTED = "refuted"   # a rational model of the negation exists
UNKNOWN = "unknown"


def _pred_rows(preds, negate_last: bool):
    """Linear rows (coeffs, const, is_eq) for predicates; None if non-linear.

    A predicate is (kind, tree) with kind in {"eq", "lt"}. When negate_last,
    the last predicate is negated, possibly splitting into disjunctive
    branches (list of row-lists).
    """
    rows = []
    for kind, tree in preds[:-1] if negate_last else preds:
        lf = linear_form(tree)
        if lf is None:
            return None
        coeffs, const = lf
        if kind == "eq":
            rows.append((coeffs, const, True))
        else:  # 0 < e  ==>  e - 1 >= 0
            rows.append((coeffs, const - 1, False))
    if not negate_last:
        return [rows]
    kind, tree = preds[-1]
    lf = linear_form(tree)
    if lf is None:
        return None
    coeffs, const = lf
    neg = {s: -c for s, c in coeffs.items()}
    if kind == "eq":
        # e != 0: e >= 1 or -e >= 1
        return [rows + [(coeffs, const - 1, False)],
                rows + [(neg, -const - 1, False)]]
    # not (0 < e): -e >= 0
    return [rows + [(neg, -const, False)]]


def implies(premises, conclusion, nonneg_syms=()) -> str:
    """Does ⋀premises entail conclusion over the integers?

    premises/conclusion: (kind, tree) pairs. nonneg_syms: symbol indices
    known to be >= 0 (shape dims). Returns PROVED, REFUTED, or UNKNOWN.
    """
    branches = _pred_rows(list(premises) + [conclusion], negate_last=True)
    if branches is None:
        return UNKNOWN
    extra = [({s: Fraction(1)}, Fraction(0), False) for s in nonneg_syms]
    outcome = PROVED
    for rows in branches:
        res = _refute(rows + extra)
        if res == UNKNOWN:
            return UNKNOWN
        if res == "sat":
            outcome = REFUTED
    return outcome


def _refute(rows) -> str:
    """'unsat' if the row system has no rational solution, 'sat' if it has
    one, UNKNOWN on blowup."""
    eqs = [(dict(c), k) for c, k, is_eq in rows if is_eq]
    ineqs = [(dict(c), k) for c, k, is_eq in rows if not is_eq]

    # Gaussian elimination of equalities
    while eqs:
        coeffs, const = eqs.pop()
        if not coeffs:
            if const != 0:
                return "unsat"
            continue
        var = next(iter(coeffs))
        cv = coeffs[var]
        # var = -(const + sum other terms) / cv
        sub = {s: -c / cv for s, c in coeffs.items() if s != var}
        sub_const = -const / cv

        def substitute(target_coeffs, target_const):
            c = dict(target_coeffs)
            k = target_const
            if var in c:
                f = c.pop(var)
                for s, cc in sub.items():
                    c[s] = c.get(s, Fraction(0)) + f * cc
                    if c[s] == 0:
                        del c[s]
                k += f * sub_const
            return c, k

        eqs = [substitute(c, k) for c, k in eqs]
        ineqs = [substitute(c, k) for c, k in ineqs]

    # Fourier-Motzkin on inequalities (each row means sum + const >= 0)
    while True:
        for c, k in ineqs:
            if not c and k < 0:
                return "unsat"
        ineqs = [r for r in ineqs if r[0]]
        if not ineqs:
            return "sat"
        vars_left = set()
        for c, _ in ineqs:
            vars_left.update(c)
        var = min(vars_left)
        pos, neg, rest = [], [], []
        for c, k in ineqs:
            cv = c.get(var, Fraction(0))
            if cv > 0:
                pos.append((c, k))
            elif cv < 0:
                neg.append((c, k))
            else:
                rest.append((c, k))
        new = rest
        for cp, kp in pos:
            for cn, kn in neg:
                fp, fn = cp[var], -cn[var]
                c = {}
                for s in set(cp) | set(cn):
                    if s == var:
                        continue
                    v = cp.get(s, Fraction(0)) * fn + cn.get(s, Fraction(0)) * fp
                    if v != 0:
                        c[s] = v
                new.append((c, kp * fn + kn * fp))
        if len(new) > MAX_CONSTRAINTS:
            return UNKNOWN
        ineqs = new


def sets_equivalent(preds_a, preds_b, nonneg_syms=()) -> str:
    """⋀A ⇔ ⋀B: PROVED only if both directions prove."""
    for c in preds_b:
        r = implies(preds_a, c, nonneg_syms)
        if r != PROVED:
            return r
    for c in preds_a:
        r = implies(preds_b, c, nonneg_syms)
        if r != PROVED:
            return r
    return PROVED
