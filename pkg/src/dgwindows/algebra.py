"""Free graded-commutative dg algebras with exact rational coefficients.

An algebra is presented by ordered variables, each carrying an internal
weight vector (length = grading arity, 1..3) and a homological degree <= 0.
Odd variables (hdeg odd) are exterior, even ones polynomial.  Elements are
sparse maps from exponent tuples to Fractions; negative exponents are only
allowed on explicitly inverted variables.  The differential is given on
generators and extended by the graded Leibniz rule.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping


class AlgebraError(Exception):
    pass


class DuplicateName(AlgebraError):
    pass


class DegreeMismatch(AlgebraError):
    pass


class DifferentialNotSquareZero(AlgebraError):
    pass


class ZeroWeightBaseVariable(AlgebraError):
    pass


class OddVariableInverted(AlgebraError):
    pass


class AlgebraMismatch(AlgebraError):
    pass


class ExprSyntaxError(AlgebraError):
    """Raised on malformed element expressions; carries the byte offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


@dataclass(frozen=True)
class VariableDecl:
    name: str
    weight: tuple[int, ...]
    hdeg: int = 0

    def __post_init__(self):
        if self.hdeg > 0:
            raise DegreeMismatch(f"variable {self.name}: homological degree must be <= 0")

    @property
    def odd(self) -> bool:
        return self.hdeg % 2 == 1


class AlgebraPresentation:
    """Validated free graded-commutative dg algebra.

    Immutable after construction; safe to share.  Use :func:`build_algebra`
    rather than calling the constructor with a differential directly.
    """

    def __init__(self, grading_arity: int, variables: Iterable[VariableDecl],
                 inverted: Iterable[str] = (), costs: Mapping[str, int] | None = None):
        if grading_arity not in (1, 2, 3):
            raise AlgebraError(f"grading arity must be 1..3, got {grading_arity}")
        self.grading_arity = grading_arity
        self.variables = tuple(variables)
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise DuplicateName(f"duplicate variable names: {', '.join(dup)}")
        for v in self.variables:
            if len(v.weight) != grading_arity:
                raise DegreeMismatch(
                    f"variable {v.name}: weight has length {len(v.weight)}, arity is {grading_arity}")
            if v.hdeg == 0 and all(w == 0 for w in v.weight):
                raise ZeroWeightBaseVariable(
                    f"variable {v.name} has weight 0 and homological degree 0; "
                    "fold it into the coefficient ring instead")
        self.index = {v.name: i for i, v in enumerate(self.variables)}
        self.inverted = frozenset(inverted)
        for name in sorted(self.inverted):
            if name not in self.index:
                raise AlgebraError(f"inverted variable {name} is not declared")
            if self.variables[self.index[name]].hdeg % 2 == 1:
                raise OddVariableInverted(f"cannot invert odd variable {name}")
            if self.variables[self.index[name]].hdeg != 0:
                raise OddVariableInverted(
                    f"cannot invert variable {name} of homological degree "
                    f"{self.variables[self.index[name]].hdeg}")
        self.nvars = len(self.variables)
        self.weights = tuple(v.weight for v in self.variables)
        self.hdegs = tuple(v.hdeg for v in self.variables)
        self.odd_flags = tuple(v.odd for v in self.variables)
        self.inverted_flags = tuple(v.name in self.inverted for v in self.variables)
        self.odd_indices = tuple(i for i, o in enumerate(self.odd_flags) if o)
        costs = costs or {}
        self.costs = tuple(int(costs.get(v.name, 1)) for v in self.variables)
        self._validate_costs()
        # name -> AlgebraElement; populated once by build_algebra, then frozen
        self.differential: dict[str, AlgebraElement] = {}
        self._frozen = False
        self._caches: dict = {}

    def _validate_costs(self):
        """Budget costs: at most one cost-0 variable, placed last, even,
        hdeg 0, with a two-coordinate (+1, -1) weight so slice enumeration
        can solve its exponent exactly."""
        free = [i for i, c in enumerate(self.costs) if c == 0]
        if any(c < 0 for c in self.costs):
            raise AlgebraError("budget costs must be >= 0")
        if not free:
            return
        if len(free) > 1 or free[0] != self.nvars - 1:
            raise AlgebraError("only one cost-0 variable is supported, in last position")
        i = free[0]
        v = self.variables[i]
        nz = [(c, w) for c, w in enumerate(v.weight) if w]
        if (v.hdeg != 0 or v.odd or self.inverted_flags[i]
                or len(nz) != 2 or sorted(w for _, w in nz) != [-1, 1]):
            raise AlgebraError(
                f"cost-0 variable {v.name} must be even, hdeg 0, non-inverted, "
                "with one +1 and one -1 weight coordinate")

    # -- basic element constructors -------------------------------------------------

    def zero(self) -> AlgebraElement:
        return AlgebraElement(self, {})

    def one(self) -> AlgebraElement:
        return AlgebraElement(self, {(0,) * self.nvars: Fraction(1)})

    def var(self, name: str) -> AlgebraElement:
        i = self.index[name]
        expo = [0] * self.nvars
        expo[i] = 1
        return AlgebraElement(self, {tuple(expo): Fraction(1)})

    def monomial(self, exponents: Mapping[str, int] | tuple[int, ...],
                 coeff: Fraction | int = 1) -> AlgebraElement:
        if isinstance(exponents, tuple):
            expo = exponents
        else:
            lst = [0] * self.nvars
            for name, e in exponents.items():
                lst[self.index[name]] = e
            expo = tuple(lst)
        self._check_mono(expo)
        c = Fraction(coeff)
        return AlgebraElement(self, {expo: c} if c else {})

    def _check_mono(self, expo: tuple[int, ...]):
        for i, e in enumerate(expo):
            if e < 0 and not self.inverted_flags[i]:
                raise AlgebraError(
                    f"negative exponent on non-inverted variable {self.variables[i].name}")
            if e not in (0, 1) and self.odd_flags[i]:
                raise AlgebraError(f"odd variable {self.variables[i].name} with exponent {e}")

    # -- degree bookkeeping ----------------------------------------------------------

    def mono_weight(self, expo: tuple[int, ...]) -> tuple[int, ...]:
        out = [0] * self.grading_arity
        for i, e in enumerate(expo):
            if e:
                w = self.weights[i]
                for c in range(self.grading_arity):
                    out[c] += e * w[c]
        return tuple(out)

    def mono_hdeg(self, expo: tuple[int, ...]) -> int:
        return sum(e * self.hdegs[i] for i, e in enumerate(expo) if e)

    def mono_expsum(self, expo: tuple[int, ...]) -> int:
        return sum(abs(e) for e in expo)

    def mono_budget(self, expo: tuple[int, ...]) -> int:
        """Budget charge of a monomial: |exponent| weighted by variable cost."""
        return sum(abs(e) * self.costs[i] for i, e in enumerate(expo) if e)

    @property
    def uniform_costs(self) -> bool:
        return all(c == 1 for c in self.costs)

    def mono_key(self, expo: tuple[int, ...]):
        """Graded-lex order: total |exponent| sum, then declaration order."""
        return (self.mono_expsum(expo), tuple(-e for e in expo))

    def mono_str(self, expo: tuple[int, ...]) -> str:
        parts = [f"{self.variables[i].name}" + (f"^{e}" if e != 1 else "")
                 for i, e in enumerate(expo) if e]
        return "*".join(parts) if parts else "1"

    # -- construction helpers ---------------------------------------------------------

    def with_inverted(self, extra: Iterable[str]) -> AlgebraPresentation:
        """Same presentation with additional variables inverted."""
        costs = {v.name: c for v, c in zip(self.variables, self.costs)}
        new = AlgebraPresentation(self.grading_arity, self.variables,
                                  self.inverted | set(extra), costs)
        for name, el in self.differential.items():
            new.differential[name] = AlgebraElement(new, dict(el.terms))
        new._frozen = True
        return new

    def transplant(self, el: AlgebraElement) -> AlgebraElement:
        """Re-root an element of a same-variable presentation onto this one."""
        if el.alg.variables != self.variables:
            raise AlgebraMismatch("presentations do not share a variable list")
        return AlgebraElement(self, dict(el.terms))

    def __repr__(self):
        inv = f", inverted={sorted(self.inverted)}" if self.inverted else ""
        return (f"AlgebraPresentation({[v.name for v in self.variables]}"
                f", arity={self.grading_arity}{inv})")


class AlgebraElement:
    """Sparse exact-rational combination of monomials of one presentation."""

    __slots__ = ("alg", "terms")

    def __init__(self, alg: AlgebraPresentation, terms: dict[tuple[int, ...], Fraction]):
        self.alg = alg
        self.terms = {m: c for m, c in terms.items() if c}

    def is_zero(self) -> bool:
        return not self.terms

    def copy(self) -> AlgebraElement:
        return AlgebraElement(self.alg, dict(self.terms))

    def _need_same(self, other: AlgebraElement):
        if self.alg is not other.alg:
            raise AlgebraMismatch("elements belong to different presentations")

    def __add__(self, other: AlgebraElement) -> AlgebraElement:
        self._need_same(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return AlgebraElement(self.alg, out)

    def __sub__(self, other: AlgebraElement) -> AlgebraElement:
        return self + (-other)

    def __neg__(self) -> AlgebraElement:
        return AlgebraElement(self.alg, {m: -c for m, c in self.terms.items()})

    def scale(self, c) -> AlgebraElement:
        c = Fraction(c)
        if not c:
            return self.alg.zero()
        return AlgebraElement(self.alg, {m: c * v for m, v in self.terms.items()})

    def __mul__(self, other: AlgebraElement) -> AlgebraElement:
        self._need_same(other)
        alg = self.alg
        odd = alg.odd_flags
        odd_idx = alg.odd_indices
        out: dict[tuple[int, ...], Fraction] = {}
        for m1, c1 in self.terms.items():
            odd1 = [i for i in odd_idx if m1[i]]
            for m2, c2 in other.terms.items():
                sign = 1
                clash = False
                for i in odd_idx:
                    if m2[i]:
                        if m1[i]:
                            clash = True
                            break
                        # move the odd factor i of m2 past later odd factors of m1
                        sign *= -1 if sum(1 for j in odd1 if j > i) % 2 else 1
                if clash:
                    continue
                m = tuple(a + b for a, b in zip(m1, m2))
                s = out.get(m, 0) + sign * c1 * c2
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        return AlgebraElement(alg, out)

    def mul_mono(self, expo: tuple[int, ...], coeff: Fraction = Fraction(1)) -> AlgebraElement:
        return self * AlgebraElement(self.alg, {expo: coeff})

    # -- degrees ---------------------------------------------------------------------

    def weight(self) -> tuple[int, ...]:
        """Internal weight; raises if not homogeneous."""
        ws = {self.alg.mono_weight(m) for m in self.terms}
        if len(ws) != 1:
            raise DegreeMismatch(f"element is not weight-homogeneous: {self}")
        return ws.pop()

    def hdeg(self) -> int:
        hs = {self.alg.mono_hdeg(m) for m in self.terms}
        if len(hs) != 1:
            raise DegreeMismatch(f"element is not hdeg-homogeneous: {self}")
        return hs.pop()

    def is_homogeneous(self) -> bool:
        return (len({self.alg.mono_weight(m) for m in self.terms}) <= 1
                and len({self.alg.mono_hdeg(m) for m in self.terms}) <= 1)

    def max_expsum(self) -> int:
        return max((self.alg.mono_expsum(m) for m in self.terms), default=0)

    # -- differential ----------------------------------------------------------------

    def d(self) -> AlgebraElement:
        """Graded Leibniz extension of the generator assignments."""
        alg = self.alg
        out = alg.zero()
        for mono, coeff in self.terms.items():
            out = out + _d_monomial(alg, mono).scale(coeff)
        return out

    # -- misc ------------------------------------------------------------------------

    def __eq__(self, other) -> bool:
        return (isinstance(other, AlgebraElement) and self.alg is other.alg
                and self.terms == other.terms)

    def __hash__(self):
        return hash((id(self.alg), frozenset(self.terms.items())))

    def __str__(self):
        if not self.terms:
            return "0"
        alg = self.alg
        parts = []
        for m in sorted(self.terms, key=alg.mono_key):
            c = self.terms[m]
            ms = alg.mono_str(m)
            if ms == "1":
                body = str(c) if c > 0 else str(-c)
            elif abs(c) == 1:
                body = ms
            else:
                body = f"{abs(c)}*{ms}"
            parts.append(("+" if c > 0 else "-", body))
        first_sign, first = parts[0]
        text = ("-" if first_sign == "-" else "") + first
        for sign, body in parts[1:]:
            text += f" {sign} {body}"
        return text

    __repr__ = __str__


def _d_monomial(alg: AlgebraPresentation, mono: tuple[int, ...]) -> AlgebraElement:
    cache = alg._caches.setdefault("d_mono", {})
    hit = cache.get(mono)
    if hit is not None:
        return hit
    out = alg.zero()
    hdeg_prefix = 0
    for j, e in enumerate(mono):
        if e:
            dv = alg.differential.get(alg.variables[j].name)
            if dv is not None and not dv.is_zero():
                left = list(mono[:j + 1]) + [0] * (alg.nvars - j - 1)
                left[j] = e - 1
                right = [0] * (j + 1) + list(mono[j + 1:])
                sign = -1 if hdeg_prefix % 2 else 1
                term = AlgebraElement(alg, {tuple(left): Fraction(sign * e)})
                out = out + term * dv * AlgebraElement(alg, {tuple(right): Fraction(1)})
            hdeg_prefix += e * alg.hdegs[j]
    if len(cache) < 200000:
        cache[mono] = out
    return out


def build_algebra(decls: Iterable[VariableDecl],
                  differential: Mapping[str, "AlgebraElement | str"] | None = None,
                  inverted: Iterable[str] = (),
                  grading_arity: int | None = None) -> AlgebraPresentation:
    """Validate and freeze a presentation.

    ``differential`` maps generator names to elements or expression strings;
    omitted generators are closed.  Checks weight/hdeg homogeneity of each
    d(v) and d(d(v)) = 0 on every generator.
    """
    decls = tuple(decls)
    if grading_arity is None:
        if not decls:
            raise AlgebraError("grading arity required for an empty variable list")
        grading_arity = len(decls[0].weight)
    alg = AlgebraPresentation(grading_arity, decls)
    differential = differential or {}
    for name in differential:
        if name not in alg.index:
            raise AlgebraError(f"differential assigned to unknown variable {name}")
    for name, expr in differential.items():
        el = parse_element(alg, expr) if isinstance(expr, str) else alg.transplant(expr)
        if el.is_zero():
            continue
        v = alg.variables[alg.index[name]]
        for m in el.terms:
            if alg.mono_weight(m) != v.weight:
                raise DegreeMismatch(
                    f"d({name}) term {alg.mono_str(m)} has weight {alg.mono_weight(m)}, "
                    f"expected {v.weight}")
            if alg.mono_hdeg(m) != v.hdeg + 1:
                raise DegreeMismatch(
                    f"d({name}) term {alg.mono_str(m)} has hdeg {alg.mono_hdeg(m)}, "
                    f"expected {v.hdeg + 1}")
        alg.differential[name] = el
    finalize_presentation(alg)
    if inverted:
        return alg.with_inverted(set(inverted))
    return alg


def finalize_presentation(alg: AlgebraPresentation):
    """Freeze a presentation after checking d^2 = 0 on every generator and
    budget monotonicity (each term of d(v) charges at least cost(v)), which
    downstream truncation soundness relies on."""
    for name in alg.differential:
        dd = alg.var(name).d().d()
        if not dd.is_zero():
            raise DifferentialNotSquareZero(f"d(d({name})) = {dd}")
    for name, dv in alg.differential.items():
        c = alg.costs[alg.index[name]]
        for m in dv.terms:
            if alg.mono_budget(m) < c:
                raise DegreeMismatch(
                    f"d({name}) term {alg.mono_str(m)} has budget "
                    f"{alg.mono_budget(m)} below the generator cost {c}")
    alg._frozen = True


def localize(alg: AlgebraPresentation, names: Iterable[str]) -> AlgebraPresentation:
    """Mark variables invertible; odd variables are rejected."""
    names = set(names)
    if not names:
        return alg
    return alg.with_inverted(names)


# -- expression parser ----------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_']*)"
                    r"|(?P<op>[-+*/^()]))")


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == m.start():
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ExprSyntaxError(f"unexpected character {stripped[0]!r}",
                                  len(text) - len(stripped))
        kind = m.lastgroup
        out.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


def parse_element(alg: AlgebraPresentation, text: str) -> AlgebraElement:
    """Parse ``coeff*var^exp*...`` sums; reports byte offsets on errors."""
    tokens = _tokenize(text)
    idx = 0

    def peek():
        return tokens[idx]

    def take():
        nonlocal idx
        tok = tokens[idx]
        idx += 1
        return tok

    def parse_int_token() -> int:
        kind, val, pos = take()
        if kind != "int":
            raise ExprSyntaxError("expected integer", pos)
        return int(val)

    def parse_factor() -> AlgebraElement:
        kind, val, pos = peek()
        if kind == "int":
            take()
            num = int(val)
            den = 1
            if peek()[0] == "op" and peek()[1] == "/":
                take()
                den = parse_int_token()
                if den == 0:
                    raise ExprSyntaxError("zero denominator", pos)
            return alg.monomial((0,) * alg.nvars, Fraction(num, den))
        if kind == "name":
            take()
            if val not in alg.index:
                raise ExprSyntaxError(f"unknown variable {val!r}", pos)
            exp = 1
            if peek()[0] == "op" and peek()[1] == "^":
                take()
                sign = 1
                if peek()[0] == "op" and peek()[1] == "-":
                    take()
                    sign = -1
                exp = sign * parse_int_token()
            i = alg.index[val]
            if exp < 0 and not alg.inverted_flags[i]:
                raise ExprSyntaxError(f"negative power of non-inverted variable {val!r}", pos)
            if alg.odd_flags[i] and exp not in (0, 1):
                raise ExprSyntaxError(f"odd variable {val!r} with exponent {exp}", pos)
            expo = [0] * alg.nvars
            expo[i] = exp
            return AlgebraElement(alg, {tuple(expo): Fraction(1)})
        raise ExprSyntaxError("expected coefficient or variable", pos)

    def parse_term() -> AlgebraElement:
        el = parse_factor()
        while peek()[0] == "op" and peek()[1] == "*":
            take()
            el = el * parse_factor()
        return el

    total = alg.zero()
    sign = 1
    kind, val, pos = peek()
    if kind == "op" and val in "+-":
        take()
        sign = -1 if val == "-" else 1
    while True:
        total = total + parse_term().scale(sign)
        kind, val, pos = peek()
        if kind == "end":
            return total
        if kind == "op" and val in "+-":
            take()
            sign = -1 if val == "-" else 1
            continue
        raise ExprSyntaxError(f"unexpected token {val!r}", pos)
