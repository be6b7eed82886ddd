"""Graded algebra homomorphisms given by generator images, plus the
budget-aware slice comparison used for all "identical Hilbert tables via an
explicit monomial map" checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import AlgebraElement, AlgebraPresentation, AlgebraError
from .slices import TruncationBox, enumerate_basis


class MonomialMap:
    """Algebra homomorphism src -> dst determined by variable images.

    Images may be arbitrary elements; inverted source variables need a
    single invertible monomial image.  Koszul signs come out right because
    images are multiplied in declaration order.
    """

    def __init__(self, src: AlgebraPresentation, dst: AlgebraPresentation,
                 images: dict[str, AlgebraElement]):
        self.src = src
        self.dst = dst
        self.images: list[AlgebraElement] = []
        for v in src.variables:
            if v.name not in images:
                raise AlgebraError(f"no image for variable {v.name}")
            img = images[v.name]
            if img.alg is not dst:
                raise AlgebraError(f"image of {v.name} lives in the wrong algebra")
            if not img.is_zero() and img.hdeg() != v.hdeg:
                raise AlgebraError(
                    f"image of {v.name} has hdeg {img.hdeg()}, expected {v.hdeg}")
            self.images.append(img)
        self._cache: dict[tuple[int, ...], AlgebraElement] = {}

    def var_image(self, name: str) -> AlgebraElement:
        return self.images[self.src.index[name]]

    def mono_image(self, mono: tuple[int, ...]) -> AlgebraElement:
        hit = self._cache.get(mono)
        if hit is not None:
            return hit
        out = self.dst.one()
        for i, e in enumerate(mono):
            if not e:
                continue
            img = self.images[i]
            if e < 0:
                img = invert_monomial(img)
                e = -e
            for _ in range(e):
                out = out * img
                if out.is_zero():
                    break
        if len(self._cache) < 200000:
            self._cache[mono] = out
        return out

    def apply(self, el: AlgebraElement) -> AlgebraElement:
        if el.alg is not self.src:
            raise AlgebraError("element does not belong to the source algebra")
        out = self.dst.zero()
        for m, c in el.terms.items():
            out = out + self.mono_image(m).scale(c)
        return out

    def as_action(self):
        return self.mono_image

    def chain_map_defects(self) -> list[str]:
        """Generators where apply(d v) != d(apply v); empty for chain maps."""
        defects = []
        for v in self.src.variables:
            dv = self.src.differential.get(v.name, self.src.zero())
            lhs = self.apply(dv)
            rhs = self.var_image(v.name).d()
            if lhs != rhs:
                defects.append(f"{v.name}: map(d {v.name}) = {lhs} but d(map {v.name}) = {rhs}")
        return defects


def invert_monomial(el: AlgebraElement) -> AlgebraElement:
    """Inverse of a single-monomial element; every variable must be inverted."""
    if len(el.terms) != 1:
        raise AlgebraError(f"cannot invert non-monomial element {el}")
    (mono, coeff), = el.terms.items()
    alg = el.alg
    for i, e in enumerate(mono):
        if e and not alg.inverted_flags[i]:
            raise AlgebraError(
                f"cannot invert monomial containing non-inverted variable "
                f"{alg.variables[i].name}")
    return AlgebraElement(alg, {tuple(-e for e in mono): Fraction(1) / coeff})


@dataclass
class SliceMatch:
    status: str  # "bijective" | "inconclusive" | "failed"
    src_dim: int
    dst_dim: int
    note: str = ""


@dataclass
class IsoComparison:
    """Outcome of comparing two slice families along a monomial bijection."""

    per_slice: dict[tuple, SliceMatch] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (any(m.status == "bijective" for m in self.per_slice.values())
                and all(m.status != "failed" for m in self.per_slice.values()))

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for m in self.per_slice.values():
            out[m.status] = out.get(m.status, 0) + 1
        return out

    def summary(self) -> str:
        c = self.counts()
        body = ", ".join(f"{k}: {v}" for k, v in sorted(c.items()))
        return f"{'PASS' if self.ok else 'FAIL'} ({body})"


def compare_monomial_iso(fwd: MonomialMap, rev: MonomialMap, box: TruncationBox,
                         slice_map=None, hdegs=None, weights=None) -> IsoComparison:
    """Certified Hilbert-table comparison along mutually inverse monomial maps.

    ``slice_map`` sends a source (weight, hdeg) to the matching target
    (weight, hdeg); identity by default.  A slice is certified when all
    forward images of the source basis and all reverse images of the target
    basis stay within the budget; certified slices must then be in bijection.
    """
    src, dst = fwd.src, fwd.dst
    out = IsoComparison()
    if hdegs is None:
        hdegs = range(box.hmin, 1)
    if weights is None:
        weights = box.weights(src.grading_arity)
    for w in weights:
        for h in hdegs:
            key = (w, h)
            tw, th = slice_map(w, h) if slice_map else (w, h)
            sb = enumerate_basis(src, w, h, box)
            tb = enumerate_basis(dst, tw, th, box)
            if sb.dim == 0 and tb.dim == 0:
                continue
            certified = True
            images = set()
            failed = None
            tindex = tb.index()
            for m in sb.monomials:
                img = fwd.mono_image(m)
                if len(img.terms) != 1:
                    failed = f"image of {src.mono_str(m)} is not a monomial: {img}"
                    break
                (im, _), = img.terms.items()
                if dst.mono_budget(im) > box.expsum:
                    certified = False
                    continue
                if im not in tindex:
                    failed = (f"image {dst.mono_str(im)} of {src.mono_str(m)} "
                              f"missed the target slice {tw}/h{th}")
                    break
                if im in images:
                    failed = f"image {dst.mono_str(im)} hit twice"
                    break
                images.add(im)
            if failed is None:
                for m in tb.monomials:
                    pre = rev.mono_image(m)
                    if len(pre.terms) != 1:
                        failed = f"preimage of {dst.mono_str(m)} is not a monomial"
                        break
                    (pm, _), = pre.terms.items()
                    if src.mono_budget(pm) > box.expsum:
                        certified = False
                    elif m not in images:
                        failed = (f"target monomial {dst.mono_str(m)} has in-budget "
                                  f"preimage but was not hit")
                        break
            if failed is not None:
                out.per_slice[key] = SliceMatch("failed", sb.dim, tb.dim, failed)
            elif certified:
                out.per_slice[key] = SliceMatch("bijective", sb.dim, tb.dim)
            else:
                out.per_slice[key] = SliceMatch("inconclusive", sb.dim, tb.dim)
    return out
