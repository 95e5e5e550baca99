"""Subset combinatorics underlying the boundary strata of stable-map spaces.

Subsets of D = {1, ..., d} are encoded as d-bit masks (element i <-> bit i-1).
The canonical order on subsets is (cardinality, mask value); it fixes the
variable order of the boundary generators and makes every enumeration in the
engine deterministic.

A family of subsets is *nested* (allowable) when any two members are
comparable or disjoint; a *partial partition* is a family of pairwise
disjoint subsets.  Both index the relation families of the ring
presentations, and the symmetric group S_d acts on everything by relabelling
the ground set.
"""

from __future__ import annotations

import itertools
from typing import Iterable, Iterator, Sequence

Subset = int  # d-bit mask; element i of {1..d} is bit i-1
Family = tuple  # tuple of Subset in canonical order


def full_mask(d: int) -> Subset:
    return (1 << d) - 1


def mask_of(members: Iterable[int], d: int) -> Subset:
    """Encode a collection of elements of {1..d} as a bitmask."""
    m = 0
    for i in members:
        if not 1 <= i <= d:
            raise ValueError(f"element {i} outside 1..{d}")
        m |= 1 << (i - 1)
    return m


def members_of(mask: Subset) -> tuple[int, ...]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def subset_key(mask: Subset) -> tuple[int, int]:
    """Canonical sort key: cardinality first, then numeric mask value."""
    return (mask.bit_count(), mask)


def proper_nonempty_subsets(d: int) -> list[Subset]:
    """All proper nonempty subsets of {1..d} in canonical order."""
    return sorted(range(1, full_mask(d)), key=subset_key)


def canonical_family(fam: Iterable[Subset]) -> Family:
    return tuple(sorted(set(fam), key=subset_key))


def is_allowable_pair(h: Subset, h2: Subset) -> bool:
    """True iff the two subsets are comparable or disjoint."""
    inter = h & h2
    return inter == 0 or inter == h or inter == h2


def is_nested_family(fam: Iterable[Subset]) -> bool:
    """True iff every pair of members is allowable."""
    labels = list(fam)
    return all(
        is_allowable_pair(a, b) for a, b in itertools.combinations(labels, 2)
    )


def is_partial_partition(fam: Iterable[Subset]) -> bool:
    """True iff the members are pairwise disjoint (and nonzero)."""
    seen = 0
    for h in fam:
        if h == 0 or (seen & h):
            return False
        seen |= h
    return True


def family_union(fam: Iterable[Subset]) -> Subset:
    u = 0
    for h in fam:
        u |= h
    return u


def partial_partitions(d: int) -> list[Family]:
    """All partial partitions of {1..d} into proper nonempty subsets.

    Canonically ordered: by size, then lexicographically on the member keys.
    """
    subsets = proper_nonempty_subsets(d)
    out: list[Family] = []

    def extend(start: int, chosen: list[Subset], used: Subset) -> None:
        out.append(tuple(chosen))
        for i in range(start, len(subsets)):
            h = subsets[i]
            if used & h:
                continue
            chosen.append(h)
            extend(i + 1, chosen, used | h)
            chosen.pop()

    extend(0, [], 0)
    out.sort(key=lambda fam: (len(fam), tuple(subset_key(h) for h in fam)))
    return out


def enumerate_allowable_supports(d: int, size_budget: int) -> Iterator[Family]:
    """Stream every nested family with at most ``size_budget`` members.

    Families are emitted exactly once, smaller families first, ties broken
    lexicographically on canonical subset positions.  Lazy: consumers that
    stop early (graded bases never need more members than the degree allows)
    do not pay for the full enumeration.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    subsets = proper_nonempty_subsets(d)

    # size-major order: one DFS pass per target size
    yield ()
    for target in range(1, size_budget + 1):

        def exact(start: int, chosen: list[Subset]) -> Iterator[Family]:
            if len(chosen) == target:
                yield tuple(chosen)
                return
            for i in range(start, len(subsets)):
                h = subsets[i]
                if all(is_allowable_pair(h, c) for c in chosen):
                    chosen.append(h)
                    yield from exact(i + 1, chosen)
                    chosen.pop()

        emitted = False
        for fam in exact(0, []):
            emitted = True
            yield fam
        if not emitted:
            return


class Permutation:
    """Bijection of {1..d}, stored as the tuple of images of 1..d."""

    __slots__ = ("images",)

    def __init__(self, images: Sequence[int]):
        images = tuple(images)
        if sorted(images) != list(range(1, len(images) + 1)):
            raise ValueError(f"not a permutation of 1..{len(images)}: {images}")
        self.images = images

    @property
    def degree(self) -> int:
        return len(self.images)

    @classmethod
    def identity(cls, d: int) -> "Permutation":
        return cls(tuple(range(1, d + 1)))

    @classmethod
    def transposition(cls, d: int, a: int, b: int) -> "Permutation":
        images = list(range(1, d + 1))
        images[a - 1], images[b - 1] = b, a
        return cls(images)

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    def compose(self, other: "Permutation") -> "Permutation":
        """self after other: (self * other)(i) = self(other(i))."""
        return Permutation(tuple(self.images[j - 1] for j in other.images))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.images)
        for i, j in enumerate(self.images, start=1):
            inv[j - 1] = i
        return Permutation(inv)

    def __mul__(self, other: "Permutation") -> "Permutation":
        return self.compose(other)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Permutation) and self.images == other.images

    def __hash__(self) -> int:
        return hash(self.images)

    def __repr__(self) -> str:
        return f"Permutation({self.images})"


def all_permutations(d: int) -> list[Permutation]:
    """S_d in lexicographic order of image tuples."""
    return [Permutation(p) for p in itertools.permutations(range(1, d + 1))]


def act_on_subset(sigma: Permutation, h: Subset) -> Subset:
    """Image of the subset under the relabelling sigma."""
    out = 0
    i = 1
    while h:
        if h & 1:
            out |= 1 << (sigma(i) - 1)
        h >>= 1
        i += 1
    return out


def act_on_family(sigma: Permutation, fam: Iterable[Subset]) -> Family:
    return canonical_family(act_on_subset(sigma, h) for h in fam)


def orbit_and_stabilizer(
    fam: Iterable[Subset], d: int
) -> tuple[list[Family], int]:
    """S_d-orbit of a family (sorted, deduplicated) and its stabilizer order."""
    fam = canonical_family(fam)
    orbit: set[Family] = set()
    stab = 0
    for sigma in all_permutations(d):
        img = act_on_family(sigma, fam)
        orbit.add(img)
        if img == fam:
            stab += 1
    return sorted(orbit), stab
