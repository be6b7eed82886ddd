"""Finite monomial slices of graded algebras and exact linear algebra on them.

A slice is the set of monomials with a fixed internal multidegree and
homological degree, truncated by an exponent budget (inverted variables count
with absolute value).  Slice matrices record which columns lost image terms
to the budget so downstream homology can flag uncertified entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import gcd
from typing import Callable

from .algebra import AlgebraElement, AlgebraPresentation, DegreeMismatch


@dataclass(frozen=True)
class TruncationBox:
    """Finite window: exponent budget, homological range [hmin, 0], degree ranges."""

    expsum: int
    hmin: int
    degree_range: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.expsum < 0:
            raise ValueError("exponent budget must be >= 0")
        if self.hmin > 0:
            raise ValueError("hmin must be <= 0")
        for lo, hi in self.degree_range:
            if lo > hi:
                raise ValueError("empty degree interval")

    def weight_in_range(self, weight: tuple[int, ...]) -> bool:
        return all(lo <= w <= hi for w, (lo, hi) in zip(weight, self.degree_range))

    def weights(self, arity: int | None = None):
        """All multidegrees in range, lexicographic order."""
        ranges = self.degree_range if arity is None else self.degree_range[:arity]
        out = [()]
        for lo, hi in ranges:
            out = [w + (v,) for w in out for v in range(lo, hi + 1)]
        return out

    def restrict(self, arity: int) -> TruncationBox:
        return TruncationBox(self.expsum, self.hmin, self.degree_range[:arity])


def default_box(arity: int, expsum: int = 8, hmin: int = -4, radius: int = 4) -> TruncationBox:
    return TruncationBox(expsum, hmin, ((-radius, radius),) * arity)


@dataclass(frozen=True)
class SliceBasis:
    alg: AlgebraPresentation
    weight: tuple[int, ...]
    hdeg: int
    monomials: tuple[tuple[int, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.monomials)

    def index(self) -> dict[tuple[int, ...], int]:
        return {m: i for i, m in enumerate(self.monomials)}


def _suffix_rates(alg: AlgebraPresentation):
    """Per-suffix feasibility rates: max degree movement per unit of budget.

    A trailing cost-0 variable (budget-free Laurent balance) is excluded from
    the per-coordinate rates; the coordinates it moves are instead pruned
    through the invariant functional it leaves fixed.
    """
    key = "suffix_rates"
    hit = alg._caches.get(key)
    if hit is not None:
        return hit
    g = alg.grading_arity
    n = alg.nvars
    free_idx = next((i for i, c in enumerate(alg.costs) if c == 0), None)
    free_w = alg.weights[free_idx] if free_idx is not None else None
    if free_w is not None:
        hard = [c for c in range(g) if free_w[c] == 0]
        c_neg = next(c for c in range(g) if free_w[c] < 0)
        c_pos = next(c for c in range(g) if free_w[c] > 0)
    else:
        hard = list(range(g))
        c_neg = c_pos = -1
    pos = [[0] * (g + 1) for _ in range(n + 1)]
    neg = [[0] * (g + 1) for _ in range(n + 1)]
    hrate = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        w = alg.weights[i]
        inv = alg.inverted_flags[i]
        cost = alg.costs[i] or 1
        # virtual coordinate g is the functional invariant under the free var
        vals = [w[c] for c in range(g)] + [w[c_neg] + w[c_pos] if free_w else 0]
        for c in range(g + 1):
            p, q = pos[i + 1][c], neg[i + 1][c]
            wc = vals[c]
            if alg.costs[i] == 0:
                wc = 0  # free variable moves no certified functional
            if wc > 0:
                p = max(p, -(-wc // cost))
                if inv:
                    q = max(q, -(-wc // cost))
            elif wc < 0:
                q = max(q, -(wc // cost))
                if inv:
                    p = max(p, -(wc // cost))
            pos[i][c], neg[i][c] = p, q
        hrate[i] = max(hrate[i + 1], -alg.hdegs[i] // (alg.costs[i] or 1)
                       if alg.costs[i] else 0)
    rates = (pos, neg, hrate, free_idx, hard, c_neg, c_pos)
    alg._caches[key] = rates
    return rates


def enumerate_basis(alg: AlgebraPresentation, weight: tuple[int, ...], hdeg: int,
                    box: TruncationBox) -> SliceBasis:
    """Complete deterministic basis of one slice under the exponent budget."""
    cache = alg._caches.setdefault("slices", {})
    key = (weight, hdeg, box.expsum)
    hit = cache.get(key)
    if hit is not None:
        return hit
    g = alg.grading_arity
    if len(weight) != g:
        raise DegreeMismatch(f"weight {weight} has wrong arity for {alg}")
    pos, neg, hrate, free_idx, hard, c_neg, c_pos = _suffix_rates(alg)
    n = alg.nvars
    found: list[tuple[int, ...]] = []
    expo = [0] * n

    def feasible(i: int, residual: tuple[int, ...], h: int, budget: int) -> bool:
        if h > 0 or h < -budget * hrate[i]:
            return False
        for c in hard:
            r = residual[c]
            if r > budget * pos[i][c] or -r > budget * neg[i][c]:
                return False
        if free_idx is not None:
            r = residual[c_neg] + residual[c_pos]
            if r > budget * pos[i][g] or -r > budget * neg[i][g]:
                return False
        return True

    def walk(i: int, residual: tuple[int, ...], h: int, budget: int):
        if i == free_idx:
            # budget-free balance variable: its exponent is forced
            e = residual[c_pos] * alg.weights[i][c_pos]
            if e >= 0 and h == 0 and all(residual[c] == e * alg.weights[i][c]
                                         for c in range(g)):
                expo[i] = e
                found.append(tuple(expo))
                expo[i] = 0
            return
        if i == n:
            if h == 0 and all(r == 0 for r in residual):
                found.append(tuple(expo))
            return
        if not feasible(i, residual, h, budget):
            return
        w = alg.weights[i]
        hd = alg.hdegs[i]
        cost = alg.costs[i]
        cap = budget // cost
        if alg.odd_flags[i]:
            exps = (0, 1) if cap >= 1 else (0,)
        elif alg.inverted_flags[i]:
            exps = range(-cap, cap + 1)
        else:
            exps = range(0, cap + 1)
        for e in exps:
            b2 = budget - abs(e) * cost
            r2 = tuple(residual[c] - e * w[c] for c in range(g))
            expo[i] = e
            walk(i + 1, r2, h - e * hd, b2)
        expo[i] = 0

    walk(0, weight, hdeg, box.expsum)
    found.sort(key=alg.mono_key)
    basis = SliceBasis(alg, weight, hdeg, tuple(found))
    if len(cache) < 500000:
        cache[key] = basis
    return basis


def brute_force_basis(alg: AlgebraPresentation, weight: tuple[int, ...], hdeg: int,
                      box: TruncationBox) -> list[tuple[int, ...]]:
    """Independent oracle: enumerate every exponent tuple and filter."""
    if not alg.uniform_costs:
        raise ValueError("brute-force oracle expects uniform budget costs")
    ranges = []
    for i in range(alg.nvars):
        if alg.odd_flags[i]:
            ranges.append([0, 1])
        elif alg.inverted_flags[i]:
            ranges.append(list(range(-box.expsum, box.expsum + 1)))
        else:
            ranges.append(list(range(0, box.expsum + 1)))
    out = []
    monos = [()]
    for r in ranges:
        monos = [m + (e,) for m in monos for e in r if sum(map(abs, m)) + abs(e) <= box.expsum]
    for m in monos:
        if (alg.mono_expsum(m) <= box.expsum and alg.mono_weight(m) == weight
                and alg.mono_hdeg(m) == hdeg):
            out.append(m)
    return sorted(out, key=alg.mono_key)


class ExactMatrix:
    """Sparse rational matrix with per-column budget-truncation flags."""

    def __init__(self, nrows: int, ncols: int,
                 cols: list[dict[int, Fraction]] | None = None,
                 flags: list[bool] | None = None):
        self.nrows = nrows
        self.ncols = ncols
        self.cols = cols if cols is not None else [dict() for _ in range(ncols)]
        self.flags = flags if flags is not None else [False] * ncols
        self._rank: int | None = None

    @property
    def truncated(self) -> bool:
        return any(self.flags)

    def entry(self, r: int, c: int) -> Fraction:
        return self.cols[c].get(r, Fraction(0))

    def is_zero(self) -> bool:
        return all(not col for col in self.cols)

    def rank(self) -> int:
        if self._rank is None:
            self._rank = _sparse_rank([_clear_denominators(c) for c in self.cols if c])
        return self._rank

    def matmul(self, other: ExactMatrix) -> ExactMatrix:
        """self @ other; flags propagate from either factor."""
        if other.nrows != self.ncols:
            raise ValueError("shape mismatch")
        cols: list[dict[int, Fraction]] = []
        flags: list[bool] = []
        for j, ocol in enumerate(other.cols):
            acc: dict[int, Fraction] = {}
            flagged = other.flags[j]
            for k, v in ocol.items():
                flagged = flagged or self.flags[k]
                for r, w in self.cols[k].items():
                    s = acc.get(r, 0) + v * w
                    if s:
                        acc[r] = s
                    else:
                        acc.pop(r, None)
            cols.append(acc)
            flags.append(flagged)
        return ExactMatrix(self.nrows, other.ncols, cols, flags)

    def stack_cols(self, other: ExactMatrix) -> ExactMatrix:
        if other.nrows != self.nrows:
            raise ValueError("row mismatch")
        return ExactMatrix(self.nrows, self.ncols + other.ncols,
                           [dict(c) for c in self.cols] + [dict(c) for c in other.cols],
                           list(self.flags) + list(other.flags))

    def __eq__(self, other):
        return (isinstance(other, ExactMatrix) and self.nrows == other.nrows
                and self.ncols == other.ncols and self.cols == other.cols)

    def __repr__(self):
        return f"ExactMatrix({self.nrows}x{self.ncols}, nnz={sum(len(c) for c in self.cols)})"


def _clear_denominators(col: dict[int, Fraction]) -> dict[int, int]:
    lcm = 1
    for v in col.values():
        d = v.denominator
        lcm = lcm // gcd(lcm, d) * d
    return {r: int(v * lcm) for r, v in col.items()}


def _normalize(col: dict[int, int]) -> dict[int, int]:
    g = 0
    for v in col.values():
        g = gcd(g, v)
        if g == 1:
            return col
    return {r: v // g for r, v in col.items()} if g > 1 else col


def _sparse_rank(cols: list[dict[int, int]]) -> int:
    """Fraction-free sparse elimination; pivots chosen small-first."""
    pivots: list[tuple[int, int, dict[int, int]]] = []  # (row, value, column)
    for col in cols:
        col = dict(col)
        for prow, pval, pcol in pivots:
            v = col.get(prow)
            if v:
                new: dict[int, int] = {}
                for r, w in col.items():
                    new[r] = w * pval
                for r, w in pcol.items():
                    s = new.get(r, 0) - w * v
                    if s:
                        new[r] = s
                    else:
                        new.pop(r, None)
                col = _normalize(new)
        if col:
            prow = min(col, key=lambda r: (abs(col[r]), r))
            pivots.append((prow, col[prow], col))
    return len(pivots)


def naive_rank(rows: list[list[Fraction]]) -> int:
    """Dense Gaussian elimination oracle over Fractions."""
    rows = [list(map(Fraction, r)) for r in rows]
    if not rows:
        return 0
    ncols = len(rows[0])
    rank = 0
    for c in range(ncols):
        piv = next((i for i in range(rank, len(rows)) if rows[i][c] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        pv = rows[rank][c]
        for i in range(len(rows)):
            if i != rank and rows[i][c] != 0:
                f = rows[i][c] / pv
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[rank])]
        rank += 1
        if rank == len(rows):
            break
    return rank


def nullspace(mat: ExactMatrix) -> list[dict[int, Fraction]]:
    """Exact kernel basis (sparse column vectors); dense elimination inside."""
    n = mat.ncols
    if n == 0:
        return []
    rows: dict[int, list[Fraction]] = {}
    for j, col in enumerate(mat.cols):
        for r, v in col.items():
            rows.setdefault(r, [Fraction(0)] * n)[j] = v
    dense = list(rows.values())
    pivot_of_col: dict[int, int] = {}
    rank = 0
    for c in range(n):
        piv = next((i for i in range(rank, len(dense)) if dense[i][c] != 0), None)
        if piv is None:
            continue
        dense[rank], dense[piv] = dense[piv], dense[rank]
        pv = dense[rank][c]
        dense[rank] = [a / pv for a in dense[rank]]
        for i in range(len(dense)):
            if i != rank and dense[i][c] != 0:
                f = dense[i][c]
                dense[i] = [a - f * b for a, b in zip(dense[i], dense[rank])]
        pivot_of_col[c] = rank
        rank += 1
    basis = []
    free = [c for c in range(n) if c not in pivot_of_col]
    for c in free:
        vec: dict[int, Fraction] = {c: Fraction(1)}
        for pc, prow in pivot_of_col.items():
            v = dense[prow][c]
            if v:
                vec[pc] = -v
        basis.append(vec)
    return basis


def solve_linear(mat: ExactMatrix, rhs: dict[int, Fraction]) -> dict[int, Fraction] | None:
    """One exact solution x of mat @ x = rhs, or None; dense elimination."""
    n = mat.ncols
    rows: dict[int, list[Fraction]] = {}
    for j, col in enumerate(mat.cols):
        for r, v in col.items():
            rows.setdefault(r, [Fraction(0)] * (n + 1))[j] = v
    for r, v in rhs.items():
        rows.setdefault(r, [Fraction(0)] * (n + 1))[n] = v
    dense = list(rows.values())
    rank = 0
    pivots: list[int] = []
    for c in range(n):
        piv = next((i for i in range(rank, len(dense)) if dense[i][c] != 0), None)
        if piv is None:
            continue
        dense[rank], dense[piv] = dense[piv], dense[rank]
        pv = dense[rank][c]
        dense[rank] = [a / pv for a in dense[rank]]
        for i in range(len(dense)):
            if i != rank and dense[i][c] != 0:
                f = dense[i][c]
                dense[i] = [a - f * b for a, b in zip(dense[i], dense[rank])]
        pivots.append(c)
        rank += 1
    for i in range(rank, len(dense)):
        if dense[i][n] != 0:
            return None
    out: dict[int, Fraction] = {}
    for i, c in enumerate(pivots):
        if dense[i][n]:
            out[c] = dense[i][n]
    return out


MapFn = Callable[[tuple[int, ...]], AlgebraElement]


def multiplication_action(element: AlgebraElement) -> MapFn:
    def fn(mono: tuple[int, ...]) -> AlgebraElement:
        return element.mul_mono(mono)
    return fn


def differential_action(alg: AlgebraPresentation) -> MapFn:
    def fn(mono: tuple[int, ...]) -> AlgebraElement:
        return AlgebraElement(alg, {mono: Fraction(1)}).d()
    return fn


def linear_map_slice(action: MapFn, source: SliceBasis, target: SliceBasis,
                     box: TruncationBox) -> ExactMatrix:
    """Exact matrix of a degree-compatible action; over-budget images are
    dropped and the column flagged."""
    tindex = target.index()
    cols: list[dict[int, Fraction]] = []
    flags: list[bool] = []
    for mono in source.monomials:
        image = action(mono)
        col: dict[int, Fraction] = {}
        flagged = False
        for m, c in image.terms.items():
            talg = target.alg
            if talg.mono_budget(m) > box.expsum:
                flagged = True
                continue
            idx = tindex.get(m)
            if idx is None:
                raise DegreeMismatch(
                    f"image term {talg.mono_str(m)} of {source.alg.mono_str(mono)} "
                    f"is not in the target slice {target.weight}/h{target.hdeg}")
            col[idx] = c
        cols.append(col)
        flags.append(flagged)
    return ExactMatrix(target.dim, source.dim, cols, flags)
