"""The diagonal kernel Delta(R) and the wall-crossing kernel Q(R).

Both are bigraded dg algebras over the base presentation R, carrying the two
structure maps p (co-projection) and s (co-action).  Q is stored by its
explicit presentation on {x, z, u, e, g}; the embedding eta into Delta is a
stored generator map, never recomputed from scratch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import (AlgebraElement, AlgebraError, AlgebraPresentation,
                      VariableDecl, build_algebra, finalize_presentation)
from .maps import IsoComparison, MonomialMap, compare_monomial_iso, invert_monomial
from .slices import TruncationBox


class WrongSide(AlgebraError):
    pass


class PositiveGeneratorPresent(AlgebraError):
    pass


class NonHomogeneousDifferential(AlgebraError):
    pass


@dataclass
class KernelAlgebra:
    """Bigraded kernel presentation with its p/s structure maps.

    ``rename`` maps base variable names to their kernel-side counterparts
    (y -> z, f -> g); x and e generators keep their names.
    """

    pres: AlgebraPresentation
    base: AlgebraPresentation
    p: MonomialMap
    s: MonomialMap
    u_name: str
    kind: str  # "q" or "delta"
    rename: dict[str, str]
    eta: MonomialMap | None = None
    delta: "KernelAlgebra | None" = None

    def u(self) -> AlgebraElement:
        return self.pres.var(self.u_name)

    def bidegree(self, name: str) -> tuple[int, int]:
        return self.pres.variables[self.pres.index[name]].weight

    def base_degree(self, name: str) -> int:
        return self.base.variables[self.base.index[name]].weight[0]

    def x_names(self) -> list[str]:
        return [v.name for v in self.base.variables if v.hdeg == 0 and v.weight[0] > 0]

    def y_names(self) -> list[str]:
        return [v.name for v in self.base.variables if v.hdeg == 0 and v.weight[0] < 0]

    def e_names(self) -> list[str]:
        return [v.name for v in self.base.variables if v.hdeg < 0 and v.weight[0] >= 0]

    def f_names(self) -> list[str]:
        return [v.name for v in self.base.variables if v.hdeg < 0 and v.weight[0] < 0]


def _fresh(name: str, used: set[str]) -> str:
    while name in used:
        name += "_"
    used.add(name)
    return name


def _split_generators(R: AlgebraPresentation):
    if R.grading_arity != 1:
        raise AlgebraError("kernel construction expects an arity-1 base; got "
                           f"arity {R.grading_arity}")
    if R.inverted:
        raise AlgebraError("kernel construction expects a non-localized base")
    xs, ys, es, fs = [], [], [], []
    for v in R.variables:
        if v.hdeg == 0:
            (xs if v.weight[0] > 0 else ys).append(v)
        else:
            (es if v.weight[0] >= 0 else fs).append(v)
    return xs, ys, es, fs


def build_delta(R: AlgebraPresentation) -> KernelAlgebra:
    """Delta(R) = R[u, u^-1] with pi/sigma giving the two module structures."""
    _split_generators(R)  # validates shape
    used = {v.name for v in R.variables}
    u_name = _fresh("u", used)
    decls = [VariableDecl(v.name, (v.weight[0], 0), v.hdeg) for v in R.variables]
    decls.append(VariableDecl(u_name, (-1, 1), 0))
    pres = AlgebraPresentation(2, decls, inverted={u_name})
    lift = {v.name: pres.var(v.name) for v in R.variables}
    for name, dv in R.differential.items():
        pres.differential[name] = _push_terms(R, pres, dv, lift)
    finalize_presentation(pres)
    p = MonomialMap(R, pres, {v.name: pres.var(v.name) for v in R.variables})
    u = pres.var(u_name)
    s_images = {}
    for v in R.variables:
        img = pres.var(v.name)
        d = v.weight[0]
        s_images[v.name] = img * pres.monomial({u_name: d})
    s = MonomialMap(R, pres, s_images)
    kern = KernelAlgebra(pres, R, p, s, u_name, "delta",
                         {v.name: v.name for v in R.variables})
    _validate_kernel(kern)
    return kern


def _push_terms(src: AlgebraPresentation, dst: AlgebraPresentation,
                el: AlgebraElement, lift: dict[str, AlgebraElement]) -> AlgebraElement:
    mapper = MonomialMap(src, dst, lift)
    return mapper.apply(el)


def build_q(R: AlgebraPresentation) -> KernelAlgebra:
    """Q(R) on variables {x, z, u, e, g} with induced differential
    d(e) = p(d_R e), d(g) = s(d_R f)."""
    xs, ys, es, fs = _split_generators(R)
    for v in es + fs:
        dv = R.differential.get(v.name)
        if dv is not None and not dv.is_homogeneous():
            raise NonHomogeneousDifferential(f"d({v.name}) is not homogeneous")
    used = {v.name for v in R.variables}
    rename: dict[str, str] = {}
    decls: list[VariableDecl] = []
    for v in R.variables:
        if v.hdeg == 0:
            a = v.weight[0]
            if a > 0:
                rename[v.name] = v.name
                decls.append(VariableDecl(v.name, (a, 0), 0))
            else:
                zn = _fresh("z" + v.name[1:] if v.name.startswith("y") else v.name + "_s",
                            used)
                rename[v.name] = zn
                decls.append(VariableDecl(zn, (0, a), 0))
    u_name = _fresh("u", used)
    decls.append(VariableDecl(u_name, (-1, 1), 0))
    for v in R.variables:
        if v.hdeg < 0:
            d = v.weight[0]
            if d >= 0:
                rename[v.name] = v.name
                decls.append(VariableDecl(v.name, (d, 0), v.hdeg))
            else:
                gn = _fresh("g" + v.name[1:] if v.name.startswith("f") else v.name + "_s",
                            used)
                rename[v.name] = gn
                decls.append(VariableDecl(gn, (0, d), v.hdeg))
    pres = AlgebraPresentation(2, decls)
    u = pres.var(u_name)

    def u_pow(k: int) -> AlgebraElement:
        return pres.monomial({u_name: k})

    p_images: dict[str, AlgebraElement] = {}
    s_images: dict[str, AlgebraElement] = {}
    for v in xs + es:
        d = v.weight[0]
        p_images[v.name] = pres.var(rename[v.name])
        s_images[v.name] = pres.var(rename[v.name]) * u_pow(d)
    for v in ys + fs:
        d = v.weight[0]
        p_images[v.name] = pres.var(rename[v.name]) * u_pow(-d)
        s_images[v.name] = pres.var(rename[v.name])
    p = MonomialMap(R, pres, p_images)
    s = MonomialMap(R, pres, s_images)
    for v in es:
        dv = R.differential.get(v.name)
        if dv is not None and not dv.is_zero():
            pres.differential[rename[v.name]] = p.apply(dv)
    for v in fs:
        dv = R.differential.get(v.name)
        if dv is not None and not dv.is_zero():
            pres.differential[rename[v.name]] = s.apply(dv)
    finalize_presentation(pres)
    delta = build_delta(R)
    eta_images: dict[str, AlgebraElement] = {u_name: delta.pres.var(delta.u_name)}
    for v in R.variables:
        img = delta.pres.var(v.name)
        if v.hdeg == 0 and v.weight[0] < 0:
            img = img * delta.pres.monomial({delta.u_name: v.weight[0]})
        elif v.hdeg < 0 and v.weight[0] < 0:
            img = img * delta.pres.monomial({delta.u_name: v.weight[0]})
        eta_images[rename[v.name]] = img
    eta = MonomialMap(pres, delta.pres, eta_images)
    kern = KernelAlgebra(pres, R, p, s, u_name, "q", rename, eta=eta, delta=delta)
    _validate_kernel(kern)
    return kern


def _validate_kernel(k: KernelAlgebra):
    """Bigrading and chain-map bookkeeping for p, s (and eta when present)."""
    if k.bidegree(k.u_name) != (-1, 1):
        raise AlgebraError("u must have bidegree (-1, 1)")
    for v in k.base.variables:
        d = v.weight[0]
        pim = k.p.var_image(v.name)
        sim = k.s.var_image(v.name)
        if pim.weight() != (d, 0):
            raise AlgebraError(f"p({v.name}) has bidegree {pim.weight()}, expected ({d}, 0)")
        if sim.weight() != (0, d):
            raise AlgebraError(f"s({v.name}) has bidegree {sim.weight()}, expected (0, {d})")
    for name, mapper in (("p", k.p), ("s", k.s)):
        defects = mapper.chain_map_defects()
        if defects:
            raise AlgebraError(f"{name} is not a chain map: {defects[0]}")
    if k.eta is not None:
        defects = k.eta.chain_map_defects()
        if defects:
            raise AlgebraError(f"eta is not a chain map: {defects[0]}")


# -- localization isomorphism (Q_t ~ Delta_t) -----------------------------------------


@dataclass
class LocalizationVerdict:
    variable: str
    side: str
    witness: str
    witness_ok: bool
    tables: IsoComparison

    @property
    def ok(self) -> bool:
        return self.witness_ok and self.tables.ok

    def summary(self) -> str:
        w = "witness ok" if self.witness_ok else "WITNESS FAILED"
        return f"localize {self.side}({self.variable}): {w}; tables {self.tables.summary()}"


def check_localization_iso(kern: KernelAlgebra, var: str, side: str,
                           box: TruncationBox) -> LocalizationVerdict:
    """Inverting the side-image of a base variable makes u invertible and
    identifies Q with Delta; verified by witness and certified tables."""
    if kern.kind != "q":
        raise AlgebraError("localization check applies to Q kernels")
    if var not in kern.base.index:
        raise AlgebraError(f"unknown base variable {var}")
    deg = kern.base_degree(var)
    if side == "s":
        if deg <= 0:
            raise WrongSide(f"side s needs deg {var} > 0, got {deg}")
    elif side == "p":
        if deg >= 0:
            raise WrongSide(f"side p needs deg {var} < 0, got {deg}")
    else:
        raise AlgebraError(f"side must be 'p' or 's', got {side!r}")

    qname = kern.rename[var]
    qpres = kern.pres.with_inverted({kern.u_name, qname})
    delta = kern.delta
    dpres = delta.pres.with_inverted({var})

    u = qpres.var(kern.u_name)
    if side == "s":
        # u^-1 = p(t) u^(deg t - 1) s(t)^-1
        st = qpres.monomial({qname: 1, kern.u_name: deg})
        witness = (qpres.var(qname) * qpres.monomial({kern.u_name: deg - 1})
                   * invert_monomial(st))
        text = f"u^-1 = {qpres.mono_str(next(iter(witness.terms)))}"
    else:
        # u^-1 = s(t) u^(-deg t - 1) p(t)^-1
        pt = qpres.monomial({qname: 1, kern.u_name: -deg})
        witness = (qpres.var(qname) * qpres.monomial({kern.u_name: -deg - 1})
                   * invert_monomial(pt))
        text = f"u^-1 = {qpres.mono_str(next(iter(witness.terms)))}"
    witness_ok = (u * witness) == qpres.one()

    fwd_images = {kern.u_name: dpres.var(delta.u_name)}
    rev_images = {delta.u_name: qpres.var(kern.u_name)}
    for v in kern.base.variables:
        qn = kern.rename[v.name]
        d = v.weight[0]
        img = dpres.var(v.name)
        pre = qpres.var(qn)
        if (v.hdeg == 0 and d < 0) or (v.hdeg < 0 and d < 0):
            img = img * dpres.monomial({delta.u_name: d})
            pre = pre * qpres.monomial({kern.u_name: -d})
        fwd_images[qn] = img
        rev_images[v.name] = pre
    fwd = MonomialMap(qpres, dpres, fwd_images)
    rev = MonomialMap(dpres, qpres, rev_images)
    tables = compare_monomial_iso(fwd, rev, box)
    return LocalizationVerdict(var, side, text, witness_ok, tables)


# -- base change (Q(T) tensor_T R ~ Q(R)) ---------------------------------------------


@dataclass
class BasechangeVerdict:
    chain_map_ok: bool
    tables: IsoComparison
    note: str = ""

    @property
    def ok(self) -> bool:
        return self.chain_map_ok and self.tables.ok

    def summary(self) -> str:
        c = "dg map ok" if self.chain_map_ok else "DG MAP FAILED"
        return f"base change: {c}; tables {self.tables.summary()}"


def check_basechange(R: AlgebraPresentation, box: TruncationBox) -> BasechangeVerdict:
    """q (x) 1 -> q, 1 (x) f -> g, 1 (x) t -> s(t) is a bidegree-preserving dg
    isomorphism from Q(T) (x)_T R onto Q(R); needs generators of non-positive
    degree."""
    xs, ys, es, fs = _split_generators(R)
    bad = [v.name for v in es if v.weight[0] > 0]
    if bad:
        raise PositiveGeneratorPresent(
            f"generators of positive internal degree: {', '.join(bad)}")
    kern = build_q(R)
    pres = kern.pres
    used = {v.name for v in pres.variables}
    # carrier: Q(T) with one adjoined generator per dg generator of R,
    # placed in the s-side grading (0, deg f)
    carrier_decls = []
    carrier_rename: dict[str, str] = {}
    for v in pres.variables:
        if pres.index[v.name] < len(xs) + len(ys) + 1:
            carrier_decls.append(v)  # x, z, u block
    for v in es + fs:
        cn = _fresh(v.name + "_t", used)
        carrier_rename[v.name] = cn
        carrier_decls.append(VariableDecl(cn, (0, v.weight[0]), v.hdeg))
    carrier = AlgebraPresentation(2, carrier_decls)
    # 1 (x) r moves across the tensor through s_T on the T-part
    into: dict[str, AlgebraElement] = {}
    for v in xs:
        into[v.name] = carrier.var(v.name) * carrier.monomial({kern.u_name: v.weight[0]})
    for v in ys:
        into[v.name] = carrier.var(kern.rename[v.name])
    for v in es + fs:
        into[v.name] = carrier.var(carrier_rename[v.name])
    embed = MonomialMap(R, carrier, into)
    for v in es + fs:
        dv = R.differential.get(v.name)
        if dv is not None and not dv.is_zero():
            carrier.differential[carrier_rename[v.name]] = embed.apply(dv)
    finalize_presentation(carrier)

    fwd_images = {v.name: pres.var(v.name) for v in pres.variables
                  if v.name in {x.name for x in xs} | {kern.rename[y.name] for y in ys}
                  | {kern.u_name}}
    rev_images = {v.name: carrier.var(v.name) for v in carrier.variables
                  if v.name not in set(carrier_rename.values())}
    for v in es + fs:
        fwd_images[carrier_rename[v.name]] = pres.var(kern.rename[v.name])
        rev_images[kern.rename[v.name]] = carrier.var(carrier_rename[v.name])
    fwd = MonomialMap(carrier, pres, fwd_images)
    rev = MonomialMap(pres, carrier, rev_images)
    defects = fwd.chain_map_defects()
    tables = compare_monomial_iso(fwd, rev, box)
    note = defects[0] if defects else ""
    return BasechangeVerdict(not defects, tables, note)


# -- middle-degree invariants ----------------------------------------------------------


@dataclass
class MiddleInvariantsVerdict:
    q_side: IsoComparison
    delta_side: IsoComparison
    witness: str = "u*v -> u"

    @property
    def ok(self) -> bool:
        return self.q_side.ok and self.delta_side.ok

    def summary(self) -> str:
        return (f"middle invariants: Q(x)Delta {self.q_side.summary()}; "
                f"Delta(x)Q {self.delta_side.summary()}")


def check_middle_invariants(kern: KernelAlgebra, box: TruncationBox) -> MiddleInvariantsVerdict:
    """(Q s(x)_pi Delta)_0 and (Delta sigma(x)_p Q)_0 both map isomorphically
    onto Q by dropping the middle Laurent variable (u*v -> u)."""
    pres = kern.pres
    used = {v.name for v in pres.variables}
    v_name = _fresh("v", set(used))
    w_name = _fresh("w", set(used))

    def three_sided(extra: str, extra_weight: tuple[int, int, int], left: bool):
        decls = []
        for var in pres.variables:
            a, b = var.weight
            w3 = (a, b, 0) if left else (0, a, b)
            decls.append(VariableDecl(var.name, w3, var.hdeg))
        decls.append(VariableDecl(extra, extra_weight, 0))
        t = AlgebraPresentation(3, decls, inverted={extra})
        lift = {var.name: t.var(var.name) for var in pres.variables}
        mapper = MonomialMap(pres, t, lift)
        for name, dv in pres.differential.items():
            t.differential[name] = mapper.apply(dv)
        finalize_presentation(t)
        return t

    # Q (x)_pi Delta reduces to Q[v, v^-1]; middle-0 slices are q v^(deg_2 q)
    qa = three_sided(v_name, (0, -1, 1), left=True)
    fwd_a = MonomialMap(qa, pres, {**{v.name: pres.var(v.name) for v in pres.variables},
                                   v_name: pres.one()})
    rev_a_images = {}
    for var in pres.variables:
        img = qa.var(var.name) * qa.monomial({v_name: var.weight[1]})
        rev_a_images[var.name] = img
    rev_a = MonomialMap(pres, qa, rev_a_images)

    # Delta (x)_p Q reduces to Q[w, w^-1]; middle-0 slices are q w^(-deg_1 q)
    qb = three_sided(w_name, (-1, 1, 0), left=False)
    fwd_b = MonomialMap(qb, pres, {**{v.name: pres.var(v.name) for v in pres.variables},
                                   w_name: pres.one()})
    rev_b_images = {}
    for var in pres.variables:
        img = qb.var(var.name) * qb.monomial({w_name: -var.weight[0]})
        rev_b_images[var.name] = img
    rev_b = MonomialMap(pres, qb, rev_b_images)

    r1 = box.degree_range[0]
    r2 = box.degree_range[1] if len(box.degree_range) > 1 else box.degree_range[0]
    weights = [(d1, 0, d3) for d1 in range(r1[0], r1[1] + 1)
               for d3 in range(r2[0], r2[1] + 1)]
    box3 = TruncationBox(box.expsum, box.hmin, (r1, (0, 0), r2))

    def slice_map(w, h):
        return ((w[0], w[2]), h)

    cmp_a = compare_monomial_iso(fwd_a, rev_a, box3, slice_map=slice_map, weights=weights)
    cmp_b = compare_monomial_iso(fwd_b, rev_b, box3, slice_map=slice_map, weights=weights)
    return MiddleInvariantsVerdict(cmp_a, cmp_b)
