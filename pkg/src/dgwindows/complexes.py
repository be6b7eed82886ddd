"""Chain complexes of slice spaces, homology dimensions, quasi-iso verdicts.

Complexes are indexed cohomologically: d raises the degree by one.  An entry
of a report is *certified* when no matrix feeding it lost image terms to the
exponent budget; verdicts outside the certified band are "inconclusive",
never "failed".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .slices import (ExactMatrix, SliceBasis, TruncationBox, differential_action,
                     enumerate_basis, linear_map_slice)


class NotAComplex(Exception):
    pass


class NotChainMap(Exception):
    pass


class SliceComplex:
    """One internal multidegree worth of a complex: dims and differentials.

    ``diffs[h]`` maps degree h to degree h+1.  ``bases`` is optional monomial
    bookkeeping for complexes that have one.
    """

    def __init__(self, weight: tuple[int, ...], dims: dict[int, int],
                 diffs: dict[int, ExactMatrix],
                 bases: dict[int, SliceBasis] | None = None):
        self.weight = weight
        self.dims = {h: d for h, d in dims.items() if d}
        self.diffs = {}
        for h, m in diffs.items():
            if m.ncols != self.dim(h) or m.nrows != self.dim(h + 1):
                raise NotAComplex(
                    f"differential at degree {h} has shape {m.nrows}x{m.ncols}, "
                    f"expected {self.dim(h + 1)}x{self.dim(h)}")
            if m.ncols:
                self.diffs[h] = m
        self.bases = bases or {}

    def dim(self, h: int) -> int:
        return self.dims.get(h, 0)

    def degrees(self) -> list[int]:
        return sorted(self.dims)

    def diff(self, h: int) -> ExactMatrix:
        return self.diffs.get(h) or ExactMatrix(self.dim(h + 1), self.dim(h))

    def rank_d(self, h: int) -> int:
        m = self.diffs.get(h)
        return m.rank() if m is not None else 0

    def entry_certified(self, h: int) -> bool:
        below = self.diffs.get(h - 1)
        here = self.diffs.get(h)
        return not ((below is not None and below.truncated)
                    or (here is not None and here.truncated))

    def check_composition(self):
        """d o d must vanish exactly on unflagged columns."""
        for h in self.degrees():
            lo = self.diffs.get(h)
            hi = self.diffs.get(h + 1)
            if lo is None or hi is None:
                continue
            prod = hi.matmul(lo)
            for j, col in enumerate(prod.cols):
                if col and not prod.flags[j]:
                    raise NotAComplex(
                        f"d^2 != 0 at weight {self.weight}, degree {h}, column {j}")

    def shift(self, k: int) -> SliceComplex:
        """Reindex degree h to h - k (homology shifts accordingly)."""
        return SliceComplex(self.weight,
                            {h - k: d for h, d in self.dims.items()},
                            {h - k: m for h, m in self.diffs.items()},
                            {h - k: b for h, b in self.bases.items()})

    def __repr__(self):
        return f"SliceComplex(weight={self.weight}, dims={dict(sorted(self.dims.items()))})"


@dataclass
class HomologyReport:
    weight: tuple[int, ...]
    dims: dict[int, int]
    certified: dict[int, bool]
    description: str | None = None

    def nonzero(self) -> dict[int, int]:
        return {h: d for h, d in self.dims.items() if d}

    def certified_nonzero(self) -> dict[int, int]:
        return {h: d for h, d in self.dims.items() if d and self.certified.get(h)}


def homology_dims(c: SliceComplex, check: bool = True) -> HomologyReport:
    """Exact per-degree homology dimensions with certification flags."""
    if check:
        c.check_composition()
    dims: dict[int, int] = {}
    certified: dict[int, bool] = {}
    degrees = set(c.degrees())
    for h in sorted(degrees):
        hd = c.dim(h) - c.rank_d(h) - c.rank_d(h - 1)
        cert = c.entry_certified(h)
        if hd < 0:
            if cert:
                raise NotAComplex(
                    f"negative homology dimension {hd} at weight {c.weight}, degree {h}")
            hd = 0
        dims[h] = hd
        certified[h] = cert
    return HomologyReport(c.weight, dims, certified)


def euler_characteristic(c: SliceComplex) -> int:
    return sum((-1) ** (h % 2) * d for h, d in c.dims.items())


def mapping_cone(a: SliceComplex, b: SliceComplex,
                 f: dict[int, ExactMatrix]) -> SliceComplex:
    """Cone of a chain map f: a -> b.  Cone degree h is a^{h+1} (+) b^h.

    Composition-zero of the cone is equivalent to f being a chain map, so
    NotChainMap surfaces through the cone's composition check.
    """
    degrees = set(a.degrees()) | set(b.degrees())
    degrees |= {h - 1 for h in a.degrees()}
    dims = {h: a.dim(h + 1) + b.dim(h) for h in degrees}
    diffs: dict[int, ExactMatrix] = {}
    for h in degrees:
        na1, nb0 = a.dim(h + 1), b.dim(h)
        na2, nb1 = a.dim(h + 2), b.dim(h + 1)
        if (na1 + nb0) == 0 or (na2 + nb1) == 0:
            continue
        mat = ExactMatrix(na2 + nb1, na1 + nb0,
                          [dict() for _ in range(na1 + nb0)],
                          [False] * (na1 + nb0))
        da = a.diff(h + 1)
        fm = f.get(h + 1)
        if fm is None:
            fm = ExactMatrix(nb1, na1)
        elif fm.nrows != nb1 or fm.ncols != na1:
            raise NotChainMap(
                f"map at degree {h + 1} has shape {fm.nrows}x{fm.ncols}, "
                f"expected {nb1}x{na1}")
        for j in range(na1):
            col = mat.cols[j]
            for r, v in da.cols[j].items():
                col[r] = -v
            for r, v in fm.cols[j].items():
                col[na2 + r] = v
            mat.flags[j] = da.flags[j] or fm.flags[j]
        db = b.diff(h)
        for j in range(nb0):
            col = mat.cols[na1 + j]
            for r, v in db.cols[j].items():
                col[na2 + r] = v
            mat.flags[na1 + j] = db.flags[j]
        diffs[h] = mat
    return SliceComplex(a.weight, dims, diffs)


@dataclass
class QuasiIsoVerdict:
    """Per-slice quasi-isomorphism outcome over a sweep of multidegrees."""

    per_slice: dict[tuple[int, ...], str] = field(default_factory=dict)
    detail: dict[tuple[int, ...], dict[int, int]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(v != "failed" for v in self.per_slice.values()) and self.per_slice

    @property
    def certified_count(self) -> int:
        return sum(1 for v in self.per_slice.values() if v == "quasi-iso")

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for v in self.per_slice.values():
            out[v] = out.get(v, 0) + 1
        return out

    def summary(self) -> str:
        c = self.counts()
        body = ", ".join(f"{k}: {v}" for k, v in sorted(c.items()))
        return f"{'PASS' if self.ok else 'FAIL'} ({body})"


def compare_quasi_iso(pairs) -> QuasiIsoVerdict:
    """Verdict for a family of chain maps, one (source, target, map) per slice.

    ``pairs`` iterates (source SliceComplex, target SliceComplex, map dict).
    A slice passes when the cone has certified zero homology everywhere;
    nonzero uncertified entries make it inconclusive, certified nonzero
    entries fail it.
    """
    verdict = QuasiIsoVerdict()
    for a, b, f in pairs:
        cone = mapping_cone(a, b, f)
        cone.check_composition()
        report = homology_dims(cone, check=False)
        bad = {h: d for h, d in report.nonzero().items() if report.certified[h]}
        fuzzy = {h: d for h, d in report.nonzero().items() if not report.certified[h]}
        if bad:
            verdict.per_slice[a.weight] = "failed"
            verdict.detail[a.weight] = bad
        elif fuzzy:
            verdict.per_slice[a.weight] = "inconclusive"
            verdict.detail[a.weight] = fuzzy
        else:
            verdict.per_slice[a.weight] = "quasi-iso"
    return verdict


class BlockComplexBuilder:
    """Assemble a SliceComplex from named blocks and block maps.

    Terms are registered as (degree, tag) with a dimension (or basis); block
    maps go from (h, src_tag) to (h+1, dst_tag).  Offsets are stable in
    registration order.
    """

    def __init__(self, weight: tuple[int, ...]):
        self.weight = weight
        self._terms: dict[int, list[tuple[str, int]]] = {}
        self._blocks: dict[tuple[int, str, str], tuple[ExactMatrix, int]] = {}

    def add_term(self, h: int, tag: str, dim_or_basis):
        dim = dim_or_basis.dim if isinstance(dim_or_basis, SliceBasis) else int(dim_or_basis)
        self._terms.setdefault(h, []).append((tag, dim))

    def add_block(self, h: int, src_tag: str, dst_tag: str, mat: ExactMatrix, sign: int = 1):
        self._blocks[(h, src_tag, dst_tag)] = (mat, sign)

    def offset(self, h: int, tag: str) -> tuple[int, int]:
        off = 0
        for t, d in self._terms.get(h, []):
            if t == tag:
                return off, d
            off += d
        raise KeyError((h, tag))

    def build(self) -> SliceComplex:
        dims = {h: sum(d for _, d in terms) for h, terms in self._terms.items()}
        diffs: dict[int, ExactMatrix] = {}
        for h in self._terms:
            ncols = dims.get(h, 0)
            nrows = dims.get(h + 1, 0)
            if ncols == 0 or nrows == 0:
                continue
            mat = ExactMatrix(nrows, ncols, [dict() for _ in range(ncols)], [False] * ncols)
            for (bh, src, dst), (block, sign) in self._blocks.items():
                if bh != h:
                    continue
                coff, cdim = self.offset(h, src)
                roff, rdim = self.offset(h + 1, dst)
                if block.ncols != cdim or block.nrows != rdim:
                    raise NotAComplex(
                        f"block ({h},{src})->({h + 1},{dst}) has shape "
                        f"{block.nrows}x{block.ncols}, expected {rdim}x{cdim}")
                for j in range(cdim):
                    col = mat.cols[coff + j]
                    for r, v in block.cols[j].items():
                        s = col.get(roff + r, Fraction(0)) + sign * v
                        if s:
                            col[roff + r] = s
                        else:
                            col.pop(roff + r, None)
                    mat.flags[coff + j] = mat.flags[coff + j] or block.flags[j]
            diffs[h] = mat
        return SliceComplex(self.weight, dims, diffs)


def algebra_slice_complex(alg, weight: tuple[int, ...], box: TruncationBox,
                          hdegs=None) -> SliceComplex:
    """Slice complex of a dg algebra at one multidegree: per-hdeg bases and
    differential matrices over the homological window."""
    if hdegs is None:
        hdegs = range(box.hmin, 1)
    hdegs = list(hdegs)
    bases = {h: enumerate_basis(alg, weight, h, box) for h in hdegs}
    action = differential_action(alg)
    diffs = {}
    for h in hdegs:
        src = bases.get(h)
        tgt = bases.get(h + 1)
        if src is None or tgt is None or src.dim == 0:
            continue
        diffs[h] = linear_map_slice(action, src, tgt, box)
    return SliceComplex(weight, {h: b.dim for h, b in bases.items()}, diffs,
                        {h: b for h, b in bases.items() if b.dim})


@dataclass
class HilbertTable:
    """Map (multidegree, homological degree) -> dimension with certification."""

    entries: dict[tuple[tuple[int, ...], int], tuple[int, bool]] = field(default_factory=dict)

    def set(self, weight: tuple[int, ...], hdeg: int, dim: int, certified: bool):
        self.entries[(weight, hdeg)] = (dim, certified)

    def get(self, weight: tuple[int, ...], hdeg: int) -> tuple[int, bool]:
        return self.entries.get((weight, hdeg), (0, True))

    def rows(self):
        for (w, h), (d, c) in sorted(self.entries.items()):
            yield w, h, d, c

    @staticmethod
    def from_reports(reports) -> HilbertTable:
        table = HilbertTable()
        for rep in reports:
            for h, d in rep.dims.items():
                table.set(rep.weight, h, d, rep.certified.get(h, False))
        return table

    def equal_on_certified(self, other: HilbertTable) -> tuple[bool, list]:
        """Compare entries certified on both sides; return (ok, mismatches)."""
        mismatches = []
        keys = set(self.entries) | set(other.entries)
        for key in sorted(keys):
            d1, c1 = self.entries.get(key, (0, True))
            d2, c2 = other.entries.get(key, (0, True))
            if c1 and c2 and d1 != d2:
                mismatches.append((key, d1, d2))
        return (not mismatches, mismatches)
