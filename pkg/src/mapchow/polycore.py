"""Sparse multivariate polynomials with exact rational coefficients.

The ring lives over a fixed :class:`VariableUniverse`.  For the stable-map
engine the universe holds the divisor classes H, psi and one boundary class
T_h per proper nonempty subset h of {1..d}, plus transient placeholder
variables t_h (one per subset, and one generic t) that only appear inside
relation builders and never in a finished presentation.  A custom universe
with arbitrary variable names and degrees backs the degree-two invariant
ring in H, psi, S, P.

Monomials are tuples of (variable index, exponent) pairs sorted by index;
coefficients are exact rationals (gmpy2 when available).  The monomial order
is graded: total (weighted) degree first, then lexicographic on the exponent
vector with H before psi before the T_h in canonical subset order.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Mapping

from . import setfam
from .setfam import Subset

try:  # exact rationals; gmpy2 is much faster than fractions on big runs
    from gmpy2 import mpq as QQ
except ImportError:  # pragma: no cover
    from fractions import Fraction as QQ

Monomial = tuple  # tuple[tuple[int, int], ...], sorted by variable index
MONO_ONE: Monomial = ()


class UniverseMismatch(ValueError):
    """Operands belong to different variable universes."""


class InexactDivision(ArithmeticError):
    """Polynomial division left a nonzero remainder.

    Signals a convention bug upstream: every division the builders perform
    is supposed to be exact.  The offending remainder is kept for reports.
    """

    def __init__(self, message: str, remainder: "Polynomial"):
        super().__init__(message)
        self.remainder = remainder


class VariableUniverse:
    """Fixed, ordered variable list with degrees.

    Two flavours: :meth:`moduli` lays out H, psi, {T_h}, {t_h}, t for a
    target dimension n and map degree d; :meth:`custom` takes explicit names
    and degrees (used for the symmetrised degree-two ring in H, psi, S, P).
    """

    __slots__ = (
        "kind", "n", "d", "names", "degrees", "subsets",
        "tvar", "pvar", "generic_t", "ring_indices", "_by_name",
    )

    def __init__(self, kind, n, d, names, degrees, subsets, tvar, pvar,
                 generic_t, ring_indices):
        self.kind = kind
        self.n = n
        self.d = d
        self.names = names
        self.degrees = degrees
        self.subsets = subsets
        self.tvar = tvar
        self.pvar = pvar
        self.generic_t = generic_t
        self.ring_indices = ring_indices
        self._by_name = {nm: i for i, nm in enumerate(names)}

    @classmethod
    def moduli(cls, n: int, d: int) -> "VariableUniverse":
        if n < 1 or d < 1:
            raise ValueError("need n >= 1 and d >= 1")
        subsets = tuple(setfam.proper_nonempty_subsets(d))
        names = ["H", "psi"]
        tvar: dict[Subset, int] = {}
        for h in subsets:
            tvar[h] = len(names)
            names.append("T{%s}" % ",".join(map(str, setfam.members_of(h))))
        pvar: dict[Subset, int] = {}
        for h in subsets:
            pvar[h] = len(names)
            names.append("t{%s}" % ",".join(map(str, setfam.members_of(h))))
        generic_t = len(names)
        names.append("t")
        ring_indices = tuple(range(2 + len(subsets)))
        return cls("moduli", n, d, tuple(names), (1,) * len(names), subsets,
                   tvar, pvar, generic_t, ring_indices)

    @classmethod
    def custom(cls, names: Iterable[str], degrees: Iterable[int]) -> "VariableUniverse":
        names = tuple(names)
        degrees = tuple(degrees)
        if len(names) != len(degrees) or not names:
            raise ValueError("names and degrees must match and be nonempty")
        return cls("custom", None, None, names, degrees, (), {}, {}, None,
                   tuple(range(len(names))))

    # -- variables ---------------------------------------------------------

    def var(self, index: int) -> "Polynomial":
        return Polynomial(self, {((index, 1),): QQ(1)})

    def var_named(self, name: str) -> "Polynomial":
        return self.var(self._by_name[name])

    @property
    def H(self) -> "Polynomial":
        return self.var(0)

    @property
    def psi(self) -> "Polynomial":
        return self.var(1)

    def T(self, h: Subset) -> "Polynomial":
        return self.var(self.tvar[h])

    def t(self, h: Subset) -> "Polynomial":
        return self.var(self.pvar[h])

    @property
    def t_gen(self) -> "Polynomial":
        return self.var(self.generic_t)

    def zero(self) -> "Polynomial":
        return Polynomial(self, {})

    def one(self) -> "Polynomial":
        return self.const(1)

    def const(self, c) -> "Polynomial":
        c = QQ(c)
        return Polynomial(self, {MONO_ONE: c} if c != 0 else {})

    def is_placeholder(self, index: int) -> bool:
        return self.kind == "moduli" and index >= 2 + len(self.subsets)

    # -- monomial helpers ---------------------------------------------------

    def mono_degree(self, mono: Monomial) -> int:
        return sum(e * self.degrees[v] for v, e in mono)

    def mono_key(self, mono: Monomial):
        """Sort key realising the graded order (ascending)."""
        dense = [0] * len(self.names)
        for v, e in mono:
            dense[v] = e
        return (self.mono_degree(mono), tuple(dense))

    def mono_str(self, mono: Monomial) -> str:
        if not mono:
            return "1"
        parts = []
        for v, e in mono:
            nm = self.names[v]
            parts.append(nm if e == 1 else f"{nm}^{e}")
        return "*".join(parts)

    def mono_from_str(self, text: str) -> Monomial:
        """Inverse of :meth:`mono_str` (used by the table cache)."""
        if text == "1":
            return MONO_ONE
        pairs = []
        for factor in text.split("*"):
            if "^" in factor:
                nm, e = factor.rsplit("^", 1)
                pairs.append((self._by_name[nm], int(e)))
            else:
                pairs.append((self._by_name[factor], 1))
        return tuple(sorted(pairs))

    def mono_support(self, mono: Monomial) -> tuple[Subset, ...]:
        """Boundary subsets occurring in the monomial (moduli universes)."""
        lo, hi = 2, 2 + len(self.subsets)
        return tuple(self.subsets[v - 2] for v, e in mono if lo <= v < hi)

    def mono_nested(self, mono: Monomial) -> bool:
        """True unless the monomial's T-support contains a crossing pair."""
        if self.kind != "moduli":
            return True
        return setfam.is_nested_family(self.mono_support(mono))


def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    da = dict(a)
    for v, e in b:
        da[v] = da.get(v, 0) + e
    return tuple(sorted(da.items()))


def mono_divides(a: Monomial, b: Monomial) -> bool:
    """True iff monomial a divides b."""
    db = dict(b)
    return all(db.get(v, 0) >= e for v, e in a)


def mono_div(b: Monomial, a: Monomial) -> Monomial:
    """b / a, assuming divisibility."""
    db = dict(b)
    for v, e in a:
        db[v] -= e
    return tuple(sorted((v, e) for v, e in db.items() if e))


class Polynomial:
    """Immutable-by-convention sparse polynomial over a universe."""

    __slots__ = ("u", "terms")

    def __init__(self, u: VariableUniverse, terms: Mapping[Monomial, object]):
        self.u = u
        self.terms = {m: c for m, c in terms.items() if c != 0}

    # -- basics --------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __bool__(self) -> bool:
        return bool(self.terms)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, Polynomial):
            return self.u is other.u and self.terms == other.terms
        if isinstance(other, int):
            return self == self.u.const(other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash((id(self.u), frozenset(self.terms.items())))

    def _check(self, other: "Polynomial") -> None:
        if self.u is not other.u:
            raise UniverseMismatch("operands from different universes")

    def coefficient(self, mono: Monomial):
        return self.terms.get(mono, QQ(0))

    def degree(self) -> int:
        """Total degree (-1 for the zero polynomial)."""
        if not self.terms:
            return -1
        return max(self.u.mono_degree(m) for m in self.terms)

    def is_homogeneous(self) -> bool:
        degs = {self.u.mono_degree(m) for m in self.terms}
        return len(degs) <= 1

    def homogeneous_components(self) -> dict[int, "Polynomial"]:
        comps: dict[int, dict] = {}
        for m, c in self.terms.items():
            comps.setdefault(self.u.mono_degree(m), {})[m] = c
        return {k: Polynomial(self.u, t) for k, t in sorted(comps.items())}

    def variables(self) -> set[int]:
        return {v for m in self.terms for v, _ in m}

    def has_placeholder(self) -> bool:
        return any(self.u.is_placeholder(v) for v in self.variables())

    # -- arithmetic -----------------------------------------------------------

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        self._check(other)
        terms = dict(self.terms)
        for m, c in other.terms.items():
            s = terms.get(m, 0) + c
            if s:
                terms[m] = s
            else:
                terms.pop(m, None)
        return Polynomial(self.u, terms)

    def __radd__(self, other) -> "Polynomial":
        return self.__add__(other)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.u, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "Polynomial":
        return self.__add__(self._coerce(other).__neg__())

    def __rsub__(self, other) -> "Polynomial":
        return self._coerce(other).__sub__(self)

    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            return other
        return self.u.const(other)

    def __mul__(self, other) -> "Polynomial":
        if not isinstance(other, Polynomial):
            c = QQ(other)
            if c == 0:
                return self.u.zero()
            return Polynomial(self.u, {m: v * c for m, v in self.terms.items()})
        self._check(other)
        a, b = self.terms, other.terms
        if len(a) > len(b):
            a, b = b, a
        out: dict[Monomial, object] = {}
        for ma, ca in a.items():
            for mb, cb in b.items():
                m = mono_mul(ma, mb)
                s = out.get(m, 0) + ca * cb
                if s:
                    out[m] = s
                else:
                    out.pop(m, None)
        return Polynomial(self.u, out)

    def __rmul__(self, other) -> "Polynomial":
        return self.__mul__(other)

    def __pow__(self, e: int) -> "Polynomial":
        if e < 0:
            raise ValueError("negative power")
        result = self.u.one()
        base = self
        while e:
            if e & 1:
                result = result * base
            base = base * base if e > 1 else base
            e >>= 1
        return result

    # -- order, substitution, division ----------------------------------------

    def leading_monomial(self) -> Monomial:
        if not self.terms:
            raise ValueError("zero polynomial has no leading monomial")
        return max(self.terms, key=self.u.mono_key)

    def sorted_terms(self) -> list[tuple[Monomial, object]]:
        """Terms in descending monomial order."""
        return sorted(self.terms.items(), key=lambda t: self.u.mono_key(t[0]),
                      reverse=True)

    def substitute(self, bindings: Mapping[int, "Polynomial"]) -> "Polynomial":
        """Simultaneous substitution variable index -> polynomial."""
        for v in bindings:
            if not 0 <= v < len(self.u.names):
                raise KeyError(f"unknown variable index {v}")
        out = self.u.zero()
        pow_cache: dict[tuple[int, int], Polynomial] = {}
        for m, c in self.terms.items():
            kept = tuple((v, e) for v, e in m if v not in bindings)
            piece = Polynomial(self.u, {kept: c})
            for v, e in m:
                if v in bindings:
                    p = pow_cache.get((v, e))
                    if p is None:
                        p = bindings[v] ** e
                        pow_cache[(v, e)] = p
                    piece = piece * p
            out = out + piece
        return out

    def zero_out(self, var_indices: Iterable[int]) -> "Polynomial":
        """Drop every term containing one of the given variables."""
        kill = set(var_indices)
        return Polynomial(self.u, {
            m: c for m, c in self.terms.items()
            if not any(v in kill for v, _ in m)
        })

    def exact_divide(self, q: "Polynomial") -> "Polynomial":
        """Quotient self / q, exact; raises InexactDivision otherwise.

        Leading-term cancellation under the graded order; because the order
        is multiplicative the loop succeeds without remainder exactly when q
        divides self.
        """
        self._check(q)
        if q.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        key = self.u.mono_key
        lm_q = q.leading_monomial()
        lc_q = q.terms[lm_q]
        rest = dict(self.terms)
        out: dict[Monomial, object] = {}
        while rest:
            lm_r = max(rest, key=key)
            if not mono_divides(lm_q, lm_r):
                raise InexactDivision(
                    "inexact polynomial division", Polynomial(self.u, rest))
            m = mono_div(lm_r, lm_q)
            c = rest[lm_r] / lc_q
            out[m] = out.get(m, 0) + c
            for mq, cq in q.terms.items():
                mm = mono_mul(m, mq)
                s = rest.get(mm, 0) - c * cq
                if s:
                    rest[mm] = s
                else:
                    rest.pop(mm, None)
        return Polynomial(self.u, out)

    def drop_H_power(self, n: int) -> "Polynomial":
        """Remove every term divisible by H^(n+1) (variable index 0)."""
        return Polynomial(self.u, {
            m: c for m, c in self.terms.items()
            if dict(m).get(0, 0) <= n
        })

    def prune_non_nested(self) -> "Polynomial":
        """Drop terms whose boundary support is not nested (moduli only)."""
        if self.u.kind != "moduli":
            return self
        return Polynomial(self.u, {
            m: c for m, c in self.terms.items() if self.u.mono_nested(m)
        })

    # -- text -----------------------------------------------------------------

    def canonical(self) -> str:
        """Canonical text: descending order, p/q coefficients, '*' products.

        Stays inside the expression grammar so that parse(canonical(q)) == q;
        in particular a negative leading coefficient keeps its magnitude
        explicit ("-1*H" rather than "-H").
        """
        if not self.terms:
            return "0"
        chunks: list[str] = []
        for idx, (m, c) in enumerate(self.sorted_terms()):
            neg = c < 0
            mag = -c if neg else c
            body = self.u.mono_str(m)
            if m == MONO_ONE:
                piece = str(mag)
            elif mag == 1 and not (idx == 0 and neg):
                piece = body
            else:
                piece = f"{mag}*{body}"
            if idx == 0:
                chunks.append(f"-{piece}" if neg else piece)
            else:
                chunks.append(f" - {piece}" if neg else f" + {piece}")
        return "".join(chunks)

    def __str__(self) -> str:
        return self.canonical()

    def __repr__(self) -> str:
        return f"<Polynomial {self.canonical()}>"


_MODULI_CACHE: dict[tuple[int, int], VariableUniverse] = {}


def moduli_universe(n: int, d: int) -> VariableUniverse:
    """Shared universe per (n, d); polynomials compare by universe identity."""
    key = (n, d)
    if key not in _MODULI_CACHE:
        _MODULI_CACHE[key] = VariableUniverse.moduli(n, d)
    return _MODULI_CACHE[key]


def multiply(p: Polynomial, q: Polynomial) -> Polynomial:
    return p * q


def substitute(p: Polynomial, bindings: Mapping[int, Polynomial]) -> Polynomial:
    return p.substitute(bindings)


def exact_divide(p: Polynomial, q: Polynomial) -> Polynomial:
    return p.exact_divide(q)


def drop_H_power(p: Polynomial, n: int) -> Polynomial:
    return p.drop_H_power(n)


def pipeline_divide(numerator: Polynomial, divisor: Polynomial, n: int,
                    prefix: Iterable[Subset] = (),
                    power: int = 1) -> Polynomial:
    """Formal psi-division used where a presentation writes 1/psi.

    Steps: discard terms divisible by H^(n+1) (they lie in the ideal of the
    hyperplane relation), discard terms carrying a placeholder or boundary
    variable whose subset crosses the relation's prefix family (killed by the
    incompatible-pair relation once the prefix T's multiply in), then divide
    exactly.  A remainder here means a convention was mis-chosen upstream.
    """
    u = numerator.u
    work = numerator.drop_H_power(n)
    prefix = list(prefix)
    if prefix and u.kind == "moduli":
        kill = [
            i for h, i in itertools.chain(u.tvar.items(), u.pvar.items())
            if any(not setfam.is_allowable_pair(h, p) for p in prefix)
        ]
        if kill:
            work = work.zero_out(kill)
            divisor = divisor.zero_out(kill)
            if divisor.is_zero():
                raise ZeroDivisionError("divisor vanished under prefix pruning")
    for _ in range(power):
        work = work.exact_divide(divisor)
    return work


def random_polynomial(u: VariableUniverse, rng, max_degree: int = 3,
                      terms: int = 4, ring_only: bool = True) -> Polynomial:
    """Small random polynomial for the property suites (seeded rng)."""
    idx = list(u.ring_indices) if ring_only else list(range(len(u.names)))
    out = u.zero()
    for _ in range(terms):
        deg = rng.randint(0, max_degree)
        mono: dict[int, int] = {}
        total = 0
        while total < deg:
            v = rng.choice(idx)
            step = u.degrees[v]
            if total + step > deg:
                break
            mono[v] = mono.get(v, 0) + 1
            total += step
        coeff = QQ(rng.randint(-6, 6), rng.randint(1, 4))
        out = out + Polynomial(u, {tuple(sorted(mono.items())): coeff})
    return out
