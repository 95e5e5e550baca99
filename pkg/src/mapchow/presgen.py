"""Relation builders for the boundary-extended ring of stable maps.

Two presentations of the same ring are constructed for a target projective
space P^n and map degree d:

* the *full* presentation, with one relation per step of the underlying
  blow-up sequence (indexed by a step number k and a pair of partial
  partitions I, J), and
* the *reduced* presentation, which keeps only the hyperplane power, the
  incompatible-pair products, one psi-type relation per disjoint pair of
  boundary labels, and one deep relation per proper subset prefix.

Both rest on a single family of polynomials: the top equivariant Chern class
of the graded normal bundle of a boundary stratum, expressed in the divisor
classes H, psi and placeholder variables t_h.  When the partial partition I
is empty the family carries a formal 1/psi; the subtracted power of the
twisted hyperplane class H_b makes that division exact (H_b is itself a null
class, so the subtraction does not change the ideal).

The reduced presentation's deep relation is typographically ambiguous in its
source; the two readings are kept behind :class:`ConventionFlags` and the
calibrated defaults are the pair that survives exact division and reproduces
the degree-two worked example.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Sequence

from . import setfam
from .setfam import Subset, Family
from .polycore import (
    QQ, InexactDivision, Polynomial, VariableUniverse,
    moduli_universe, pipeline_divide,
)


class IndexViolation(ValueError):
    """Arguments violate the combinatorial preconditions of a builder."""


@dataclass(frozen=True)
class ConventionFlags:
    """Resolved readings of the reduced presentation's deep relation.

    ``strict_denominator``: divide by psi + sum of t over *strict* supersets
    of the running subset (the literal inline text) instead of including the
    subset itself.  ``second_term``: "family" instantiates the subtracted
    numerator term from the general Chern-factor family; "inline" takes the
    literal inline display.  Calibrated defaults: inclusive denominator,
    family second term -- the only pair whose divisions are exact and which
    reproduces the degree-two null classes (see tests).
    """

    strict_denominator: bool = False
    second_term: str = "family"

    def __post_init__(self):
        if self.second_term not in ("family", "inline"):
            raise ValueError("second_term must be 'family' or 'inline'")

    def token(self) -> str:
        den = "strict" if self.strict_denominator else "incl"
        return f"{den}-{self.second_term}"


CALIBRATED = ConventionFlags()
LITERAL_STRICT = ConventionFlags(strict_denominator=True, second_term="inline")
LITERAL_INCLUSIVE = ConventionFlags(strict_denominator=False, second_term="inline")

FLAG_PRESETS = {
    "calibrated": CALIBRATED,
    "literal-strict": LITERAL_STRICT,
    "literal-inclusive": LITERAL_INCLUSIVE,
}


@dataclass
class PresentationSpec:
    """A named, versioned list of homogeneous ideal generators."""

    name: str
    n: int | None
    d: int | None
    flags: ConventionFlags | None
    universe: VariableUniverse
    generators: tuple[Polynomial, ...]
    report: tuple[dict, ...] = field(default_factory=tuple)

    @property
    def genhash(self) -> str:
        blob = "\n".join(g.canonical() for g in self.generators)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def cache_token(self) -> str:
        flags = self.flags.token() if self.flags else "none"
        return f"{self.name}-n{self.n}-d{self.d}-{flags}"

    def build_report(self) -> dict:
        return {
            "name": self.name,
            "n": self.n,
            "d": self.d,
            "flags": self.flags.token() if self.flags else None,
            "generator_count": len(self.generators),
            "genhash": self.genhash,
            "relations": list(self.report),
        }


def _validate_partitions(d: int, I: Family, J: Family) -> None:
    if not setfam.is_partial_partition(I) or not setfam.is_partial_partition(J):
        raise IndexViolation("I and J must be partial partitions")
    if not setfam.is_partial_partition(tuple(I) + tuple(J)):
        raise IndexViolation("I and J must be jointly disjoint")
    full = setfam.full_mask(d)
    for h in list(I) + list(J):
        if not 0 < h < full:
            raise IndexViolation("partition members must be proper nonempty subsets")


def chern_factor(n: int, d: int, k: int, I: Iterable[Subset],
                 J: Iterable[Subset], base: Subset) -> Polynomial:
    """Top-Chern-class factor of a stratum's graded normal bundle.

    Returns a polynomial in the placeholders t_h for all proper subsets
    h containing ``base``.  The twisted classes are

        psi_b = psi + sum_{h >= base} t_h,
        H_b   = H + (d - |base u J|) psi + sum_{h > base} |h - (base u J)| t_h,

    and the factor is psi_b^(|I|-1) times the product of (H_b + j psi_b)^(n+1)
    for j = 1+|base|-(d-k) .. |base|-|u(I)|.  For empty I the power
    H_b^((n+1)(d-k)) is subtracted before the exact division by psi_b; it is
    a division device only (with nonempty I no division happens and nothing
    is subtracted).
    """
    u = moduli_universe(n, d)
    I = setfam.canonical_family(I)
    J = setfam.canonical_family(J)
    _validate_partitions(d, I, J)
    if not 0 < base < setfam.full_mask(d):
        raise IndexViolation("base must be a proper nonempty subset")
    uI = setfam.family_union(I)
    if base & uI != uI:
        raise IndexViolation("base must contain the union of I")
    c = uI.bit_count()
    k0 = d - base.bit_count()
    if not k0 <= k <= d - c:
        raise IndexViolation(f"k={k} outside [{k0}, {d - c}]")

    supers = [h for h in u.subsets if h & base == base]
    psi_b = u.psi
    for h in supers:
        psi_b = psi_b + u.t(h)
    uJ = setfam.family_union(J)
    outside = base | uJ
    H_b = u.H + (d - outside.bit_count()) * u.psi
    for h in supers:
        if h != base:
            w = (h & ~outside).bit_count()
            if w:
                H_b = H_b + w * u.t(h)

    lower = 1 + base.bit_count() - (d - k)
    upper = base.bit_count() - c
    prod = u.one()
    for j in range(lower, upper + 1):
        prod = prod * (H_b + j * psi_b) ** (n + 1)
    if not I:
        nfac = upper - lower + 1
        return (prod - H_b ** ((n + 1) * nfac)).exact_divide(psi_b)
    return psi_b ** (len(I) - 1) * prod


def chern_factor_at_zero(n: int, d: int, k: int, I: Iterable[Subset],
                         J: Iterable[Subset]) -> Polynomial:
    """Placeholder-free value of the Chern factor.

    psi^(|I|-1) prod_{j=1..d-k-|uI|} (H + (k - |uJ| + j) psi)^(n+1), with the
    formal 1/psi of empty I realised by the division pipeline.
    """
    u = moduli_universe(n, d)
    I = setfam.canonical_family(I)
    J = setfam.canonical_family(J)
    _validate_partitions(d, I, J)
    c = setfam.family_union(I).bit_count()
    uu = setfam.family_union(J).bit_count()
    m = d - k - c
    if m < 0:
        raise IndexViolation("k exceeds d - |union(I)|")
    prod = u.one()
    for j in range(1, m + 1):
        prod = prod * (u.H + (k - uu + j) * u.psi) ** (n + 1)
    if not I:
        if m == 0:
            raise IndexViolation("empty I with k = d leaves a bare 1/psi")
        return pipeline_divide(prod, u.psi, n)
    return u.psi ** (len(I) - 1) * prod


def t_bracket(p: Polynomial, base: Subset) -> Polynomial:
    """Substitute T for the strict-superset placeholders, then take the
    difference of p at t_base = T_base and at t_base = 0."""
    u = p.u
    strict = {u.pvar[h]: u.T(h) for h in u.subsets if h & base == base and h != base}
    q = p.substitute(strict) if strict else p
    plus = q.substitute({u.pvar[base]: u.T(base)})
    minus = q.zero_out([u.pvar[base]])
    return plus - minus


def first_step_polynomial(n: int, d: int, I: Iterable[Subset]) -> Polynomial:
    """One-variable normal polynomial of the zeroth-step stratum:
    t^(s-1) prod_{i=1..d-l} (H + i t)^(n+1) in the generic placeholder t."""
    u = moduli_universe(n, d)
    I = setfam.canonical_family(I)
    _validate_partitions(d, I, ())
    s = len(I)
    l = setfam.family_union(I).bit_count()
    t = u.t_gen
    prod = u.one()
    for i in range(1, d - l + 1):
        prod = prod * (u.H + i * t) ** (n + 1)
    if s == 0:
        return pipeline_divide(prod, t, n)
    return t ** (s - 1) * prod


def stratum_class_step1(n: int, d: int, I: Iterable[Subset]) -> Polynomial:
    """Class of the I-labelled stratum inside the first intermediate space:
    psi^(-s) prod_{i=d-l+1..d} (H + i psi)^(n+1), pipeline-divided."""
    u = moduli_universe(n, d)
    I = setfam.canonical_family(I)
    _validate_partitions(d, I, ())
    if not I:
        raise IndexViolation("I must be a nonempty partial partition")
    s = len(I)
    l = setfam.family_union(I).bit_count()
    prod = u.one()
    for i in range(d - l + 1, d + 1):
        prod = prod * (u.H + i * u.psi) ** (n + 1)
    return pipeline_divide(prod, u.psi, n, power=s)


def _admissible_stratum_exists(d: int, k: int, I: Family, J: Family) -> bool:
    """A stratum label h with |h| = d-k, h >= union(I), h disjoint from
    union(J) and h not already in I must exist for the locus relation to
    carry geometric content."""
    uI = setfam.family_union(I)
    uJ = setfam.family_union(J)
    free = d - uI.bit_count() - uJ.bit_count()
    need = (d - k) - uI.bit_count()
    if need < 0 or need > free:
        return False
    if need == 0 and I == (uI,):
        # the only candidate is union(I) itself, already a member of I
        return False
    return True


def _bracket_index_set(d: int, k: int, I: Family, J: Family,
                       subsets: Sequence[Subset]) -> list[Subset]:
    """Subsets h0 with |h0| >= d-k containing union(I), disjoint from the
    members of J whenever |h0| = d-k exactly."""
    uI = setfam.family_union(I)
    uJ = setfam.family_union(J)
    out = []
    for h0 in subsets:
        if h0 & uI != uI:
            continue
        size = h0.bit_count()
        if size < d - k:
            continue
        if size == d - k and (h0 & uJ):
            continue
        out.append(h0)
    return out


def locus_relation(n: int, d: int, k: int, I: Iterable[Subset],
                   J: Iterable[Subset]) -> Polynomial:
    """Deep relation of the full presentation for a step k and partial
    partitions I, J: the prefix product of boundary classes times the total
    class of the k-th blow-up locus, written through the Chern factors."""
    u = moduli_universe(n, d)
    I = setfam.canonical_family(I)
    J = setfam.canonical_family(J)
    _validate_partitions(d, I, J)
    if not 1 <= k <= d - 1:
        raise IndexViolation("k must lie in 1..d-1")
    if setfam.family_union(I).bit_count() > d - k:
        raise IndexViolation("union of I larger than d-k")
    if not _admissible_stratum_exists(d, k, I, J):
        raise IndexViolation("no admissible stratum label for (k, I, J)")
    total = chern_factor_at_zero(n, d, k, I, J)
    for h0 in _bracket_index_set(d, k, I, J, u.subsets):
        total = total + t_bracket(chern_factor(n, d, k, I, J, h0), h0)
    prefix = u.one()
    for h in tuple(I) + tuple(J):
        prefix = prefix * u.T(h)
    return prefix * total


def stratum_class(n: int, d: int, k: int, I: Iterable[Subset],
                  J: Iterable[Subset]) -> Polynomial:
    """Class of the stratum labelled by a cardinality-(d-k) subset inside the
    k-th intermediate space: the bracket corrections over strictly larger
    subsets plus the placeholder-free Chern factor."""
    u = moduli_universe(n, d)
    I = setfam.canonical_family(I)
    J = setfam.canonical_family(J)
    _validate_partitions(d, I, J)
    if not 1 <= k <= d - 1:
        raise IndexViolation("k must lie in 1..d-1")
    if setfam.family_union(I).bit_count() > d - k:
        raise IndexViolation("union of I larger than d-k")
    if not _admissible_stratum_exists(d, k, I, J):
        raise IndexViolation("no admissible stratum label for (k, I, J)")
    uI = setfam.family_union(I)
    total = chern_factor_at_zero(n, d, k, I, J)
    members = tuple(I) + tuple(J)
    for h0 in u.subsets:
        if h0.bit_count() <= d - k or h0 & uI != uI:
            continue
        if not setfam.is_nested_family(members + (h0,)):
            continue
        total = total + t_bracket(chern_factor(n, d, k, I, J, h0), h0)
    assert not total.has_placeholder()
    assert total.is_homogeneous()
    return total


def collapsed_partition_relation(n: int, d: int, k: int, I: Iterable[Subset],
                                 J: Iterable[Subset]) -> Polynomial:
    """Collapsed form of the deep relation for nonempty I: every admissible
    placeholder is substituted at once, summed over the admissible base
    subsets.  Used only as an executable redundancy check against the
    canonical ideal, never as a canonical generator."""
    u = moduli_universe(n, d)
    I = setfam.canonical_family(I)
    J = setfam.canonical_family(J)
    _validate_partitions(d, I, J)
    if not I:
        raise IndexViolation("collapsed form needs nonempty I")
    if not 1 <= k <= d - 1 or setfam.family_union(I).bit_count() > d - k:
        raise IndexViolation("k out of range for I")
    index_set = _bracket_index_set(d, k, I, J, u.subsets)
    total = u.zero()
    for hj in index_set:
        p = chern_factor(n, d, k, I, J, hj)
        delta = {h for h in index_set if h & hj == hj}
        subs = {u.pvar[h]: u.T(h) for h in delta}
        away = [u.pvar[h] for h in u.subsets
                if h & hj == hj and h not in delta]
        q = p.zero_out(away) if away else p
        total = total + q.substitute(subs)
    prefix = u.one()
    for h in tuple(I) + tuple(J):
        prefix = prefix * u.T(h)
    return prefix * total


def _finish(name: str, n: int, d: int, flags: ConventionFlags | None,
            u: VariableUniverse, raw: list[tuple[Polynomial, dict]],
            failures: list[dict]) -> PresentationSpec:
    seen: dict[str, dict] = {}
    for g, meta in raw:
        if g.is_zero():
            continue
        assert not g.has_placeholder(), f"placeholder leaked into {meta}"
        assert g.is_homogeneous(), f"inhomogeneous generator from {meta}"
        key = g.canonical()
        if key not in seen:
            meta = dict(meta, degree=g.degree(), term_count=len(g.terms))
            seen[key] = {"poly": g, "meta": meta}
    order = sorted(seen.values(), key=lambda e: (e["poly"].degree(),
                                                 e["poly"].canonical()))
    gens = tuple(e["poly"] for e in order)
    report = tuple([e["meta"] for e in order] + failures)
    return PresentationSpec(name, n, d, flags, u, gens, report)


def build_full_presentation(n: int, d: int) -> PresentationSpec:
    """All relations arising along the blow-up sequence, one per datum:
    hyperplane power, incompatible pairs, first-step relations per partial
    partition, and the locus relations per admissible (k, I, J)."""
    u = moduli_universe(n, d)
    raw: list[tuple[Polynomial, dict]] = []
    raw.append((u.H ** (n + 1), {"family": "hyperplane_power"}))
    subsets = u.subsets
    for i, h in enumerate(subsets):
        for h2 in subsets[i + 1:]:
            if not setfam.is_allowable_pair(h, h2):
                raw.append((u.T(h) * u.T(h2), {
                    "family": "incompatible_pair",
                    "pair": [setfam.members_of(h), setfam.members_of(h2)],
                }))
    for I in setfam.partial_partitions(d):
        poly = first_step_polynomial(n, d, I).substitute({u.generic_t: u.psi})
        gen = u.one()
        for h in I:
            gen = gen * u.T(h)
        raw.append((gen * poly, {
            "family": "first_step",
            "I": [setfam.members_of(h) for h in I],
        }))
    parts = setfam.partial_partitions(d)
    for k in range(1, d):
        for I in parts:
            if setfam.family_union(I).bit_count() > d - k:
                continue
            uI = setfam.family_union(I)
            for J in parts:
                if setfam.family_union(J) & uI or set(I) & set(J):
                    continue
                if not _admissible_stratum_exists(d, k, I, J):
                    continue
                gen = locus_relation(n, d, k, I, J)
                raw.append((gen, {
                    "family": "locus_relation", "k": k,
                    "I": [setfam.members_of(h) for h in I],
                    "J": [setfam.members_of(h) for h in J],
                }))
    return _finish("full", n, d, None, u, raw, [])


def _deep_factor(n: int, d: int, prefix: Subset, base: Subset,
                 flags: ConventionFlags) -> Polynomial:
    """Deep-relation factor of the reduced presentation for one running
    subset ``base`` against the relation prefix (0 encodes the empty set)."""
    u = moduli_universe(n, d)
    supers = [h for h in u.subsets if h & base == base]
    psi_incl = u.psi
    for h in supers:
        psi_incl = psi_incl + u.t(h)
    if flags.strict_denominator:
        denom = psi_incl - u.t(base)
    else:
        denom = psi_incl
    outside = base | prefix
    if flags.second_term == "family":
        H_b = u.H + (d - outside.bit_count()) * u.psi
        for h in supers:
            if h != base:
                w = (h & ~outside).bit_count()
                if w:
                    H_b = H_b + w * u.t(h)
        num = (H_b + base.bit_count() * psi_incl) ** (n + 1) - H_b ** (n + 1)
    else:
        first = u.H + d * u.psi
        for h in supers:
            first = first + h.bit_count() * u.t(h)
        second = u.H + (d - outside.bit_count()) * u.psi
        for h in supers:
            if h != base:
                w = (h & ~outside).bit_count()
                if w:
                    second = second + w * u.t(h)
        num = first ** (n + 1) - second ** (n + 1)
    return pipeline_divide(num, denom, n,
                           prefix=[prefix] if prefix else [])


def _build_reduced(n: int, d: int, flags: ConventionFlags):
    u = moduli_universe(n, d)
    raw: list[tuple[Polynomial, dict]] = []
    failures: list[dict] = []
    raw.append((u.H ** (n + 1), {"family": "hyperplane_power"}))
    subsets = u.subsets
    full = setfam.full_mask(d)
    for i, h in enumerate(subsets):
        for h2 in subsets[i + 1:]:
            if not setfam.is_allowable_pair(h, h2):
                raw.append((u.T(h) * u.T(h2), {
                    "family": "incompatible_pair",
                    "pair": [setfam.members_of(h), setfam.members_of(h2)],
                }))
    for i, h in enumerate(subsets):
        for h2 in subsets[i + 1:]:
            if h & h2:
                continue
            s = u.psi
            union = h | h2
            for h3 in subsets:
                if h3 & union == union:
                    s = s + u.T(h3)
            raw.append((u.T(h) * u.T(h2) * s, {
                "family": "pair_psi",
                "pair": [setfam.members_of(h), setfam.members_of(h2)],
            }))
    for prefix in (0,) + subsets:
        J = (prefix,) if prefix else ()
        meta = {"family": "deep_relation",
                "prefix": setfam.members_of(prefix) if prefix else []}
        try:
            total = chern_factor_at_zero(n, d, d - 1, (), J)
            for base in subsets:
                if base & prefix == base:  # base contained in the prefix
                    continue
                total = total + t_bracket(_deep_factor(n, d, prefix, base, flags),
                                          base)
        except InexactDivision as err:
            failures.append(dict(meta, error="inexact_division",
                                 remainder=err.remainder.canonical()))
            continue
        gen = (u.T(prefix) if prefix else u.one()) * total
        raw.append((gen, meta))
    return u, raw, failures


def build_reduced_presentation(
        n: int, d: int,
        flags: ConventionFlags = CALIBRATED) -> PresentationSpec:
    """Simplified generating set: hyperplane power, incompatible pairs, the
    psi relation per disjoint pair, and one deep relation per proper subset
    prefix (the empty prefix contributing with unit coefficient).

    Raises InexactDivision when the chosen convention flags make one of the
    deep divisions inexact; the offending remainders are in the exception's
    report payload.
    """
    u, raw, failures = _build_reduced(n, d, flags)
    if failures:
        err = InexactDivision(
            f"{len(failures)} deep relation(s) failed exact division under "
            f"flags {flags.token()}", u.zero())
        err.report = failures
        raise err
    return _finish("reduced", n, d, flags, u, raw, [])


# -- degree-two worked example ------------------------------------------------

MASK1, MASK2 = 1, 2  # the two singleton subsets of {1, 2}


def degree_two_null_classes(n: int) -> list[tuple[str, Polynomial]]:
    """The six classes that vanish in the boundary-extended ring at d = 2."""
    d = 2
    u = moduli_universe(n, d)
    H, psi = u.H, u.psi
    T1, T2 = u.T(MASK1), u.T(MASK2)
    P1 = chern_factor(n, d, 1, (), (), MASK1)  # polynomial in t_{1}
    P2 = chern_factor(n, d, 1, (), (), MASK2)
    P1_at = lambda v: P1.substitute({u.pvar[MASK1]: v})
    P2_at = lambda v: P2.substitute({u.pvar[MASK2]: v})
    locus_total = (t_bracket(P1, MASK1) + t_bracket(P2, MASK2)
                   + chern_factor_at_zero(n, d, 1, (), ()))
    return [
        ("hyperplane_power", H ** (n + 1)),
        ("product_locus",
         pipeline_divide((H + psi) ** (n + 1) * (H + 2 * psi) ** (n + 1),
                         psi, n)),
        ("pair_psi", T1 * T2 * psi),
        ("marked_boundary_1", T1 * (H + psi) ** (n + 1)),
        ("marked_boundary_2", T2 * (H + psi) ** (n + 1)),
        ("boundary_self_1", T1 * P1_at(T1)),
        ("boundary_self_2", T2 * P2_at(T2)),
        ("locus_total", locus_total),
    ]


def power_sum_sp(su: VariableUniverse, k: int) -> Polynomial:
    """k-th power sum of two variables written in S = e1, P = e2."""
    S, P = su.var_named("S"), su.var_named("P")
    if k == 0:
        return su.const(2)
    if k == 1:
        return S
    prev2, prev1 = su.const(2), S
    for _ in range(k - 1):
        prev2, prev1 = prev1, S * prev1 - P * prev2
    return prev1


def pair_power_closed_form(su: VariableUniverse, k: int) -> Polynomial:
    """sum_i (-1)^i C(k-i, i) S^(k-2i) P^i -- the complete homogeneous
    symmetric polynomial of two variables in S, P."""
    S, P = su.var_named("S"), su.var_named("P")
    out = su.zero()
    for i in range(k // 2 + 1):
        out = out + ((-1) ** i * comb(k - i, i)) * S ** (k - 2 * i) * P ** i
    return out


def sp_universe() -> VariableUniverse:
    return VariableUniverse.custom(("H", "psi", "S", "P"), (1, 1, 1, 2))


def _transplant_hpsi(p: Polynomial, su: VariableUniverse) -> Polynomial:
    """Move a polynomial in H, psi only into the symmetrised universe."""
    out = su.zero()
    Hs, psis = su.var(0), su.var(1)
    for m, c in p.terms.items():
        piece = su.const(c)
        for v, e in m:
            if v == 0:
                piece = piece * Hs ** e
            elif v == 1:
                piece = piece * psis ** e
            else:
                raise ValueError("polynomial not in H, psi alone")
        out = out + piece
    return out


def degree_two_invariant_presentation(n: int) -> PresentationSpec:
    """The symmetrised ring at d = 2 in H, psi, S (degree 1), P (degree 2).

    The two symmetric combinations of the boundary polynomial are rewritten
    in S, P by exact power-sum recursion.
    """
    d = 2
    u = moduli_universe(n, d)
    su = sp_universe()
    Hs, psis, Ps = su.var_named("H"), su.var_named("psi"), su.var_named("P")

    P1 = chern_factor(n, d, 1, (), (), MASK1)
    tv = u.pvar[MASK1]
    by_power: dict[int, dict] = {}
    for m, c in P1.terms.items():
        md = dict(m)
        j = md.pop(tv, 0)
        rest = tuple(sorted(md.items()))
        by_power.setdefault(j, {})[rest] = by_power.setdefault(j, {}).get(rest, 0) + c
    coeffs = {j: Polynomial(u, t) for j, t in by_power.items()}

    sym_value = su.zero()       # P(T1) + P(T2)
    sym_weighted = su.zero()    # T1 P(T1) + T2 P(T2)
    for j, cj in sorted(coeffs.items()):
        cj_sp = _transplant_hpsi(cj, su)
        sym_value = sym_value + cj_sp * power_sum_sp(su, j)
        sym_weighted = sym_weighted + cj_sp * power_sum_sp(su, j + 1)

    tail = (2 * pipeline_divide((u.H + u.psi) ** (n + 1), u.psi, n)
            - pipeline_divide((u.H + 2 * u.psi) ** (n + 1), u.psi, n))
    g4 = sym_value + _transplant_hpsi(tail, su)

    raw = [
        (Hs ** (n + 1), {"family": "hyperplane_power"}),
        (Ps * psis, {"family": "product_psi"}),
        (sym_weighted, {"family": "weighted_boundary_sum"}),
        (g4, {"family": "boundary_sum"}),
    ]
    return _finish("invariant_d2", n, d, None, su, raw, [])
