"""Sib-pair family simulator.

Parents are drawn from the two-locus haplotype distribution, non-informative
parent pairs (both marker-homozygous) are redrawn, each parent transmits one
possibly recombinant haplotype to each of two offspring, and the transmission
indicator Z of each offspring is read off the marker genotypes.

The array-level functions (``simulate_families`` and the ``*_array`` helpers)
are what the power harness uses; the scalar operations mirror them one family
at a time and are convenient for inspection and for parsing external trios.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import MendelianInconsistencyError, ParameterDomainError
from .genetics_core import HAPLOTYPE_ALLELES, HAPLOTYPE_ORDER, Haplotype, HaplotypeDist, LocusParams

MarkerGenotype = Union[int, Sequence[int], str]


@dataclass(frozen=True)
class ParentGenotype:
    hap_a: Haplotype
    hap_b: Haplotype

    @property
    def marker_count(self) -> int:
        """Number of M2 alleles."""
        return self.hap_a.marker_allele + self.hap_b.marker_allele

    @property
    def marker_heterozygous(self) -> bool:
        return self.hap_a.marker_allele != self.hap_b.marker_allele

    def __str__(self) -> str:
        return f"{self.hap_a}/{self.hap_b}"

    @classmethod
    def parse(cls, text: str) -> "ParentGenotype":
        a, b = text.split("/")
        return cls(Haplotype.parse(a), Haplotype.parse(b))


@dataclass(frozen=True)
class Offspring:
    marker_genotype: tuple[int, int]  # sorted marker alleles, 1 = M2
    x: int  # copies of D2
    z: int | None = None


@dataclass(frozen=True)
class Family:
    parents: tuple[ParentGenotype, ParentGenotype]
    sibs: tuple[Offspring, Offspring]


@dataclass
class FamilyPanel:
    """``n`` informative sib-pair families stored as arrays.

    parent_haps: (n, 2, 2) haplotype codes, indexed [family, parent, slot]
    child_haps:  (n, 2, 2) haplotype codes, indexed [family, sib, source parent]
    x:           (n, 2) QTL D2 counts of the sibs
    z:           (n, 2) transmission indicators
    """

    parent_haps: np.ndarray
    child_haps: np.ndarray
    x: np.ndarray
    z: np.ndarray
    locus_params: LocusParams
    _families: list[Family] | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    @property
    def parent_marker_counts(self) -> np.ndarray:
        return HAPLOTYPE_ALLELES[self.parent_haps, 0].sum(axis=2)

    @property
    def child_marker_counts(self) -> np.ndarray:
        return HAPLOTYPE_ALLELES[self.child_haps, 0].sum(axis=2)

    @property
    def families(self) -> list[Family]:
        if self._families is None:
            self._families = [self.family(i) for i in range(len(self))]
        return self._families

    def family(self, i: int) -> Family:
        parents = tuple(
            ParentGenotype(HAPLOTYPE_ORDER[self.parent_haps[i, p, 0]], HAPLOTYPE_ORDER[self.parent_haps[i, p, 1]])
            for p in range(2)
        )
        sibs = []
        for s in range(2):
            markers = sorted(int(HAPLOTYPE_ALLELES[self.child_haps[i, s, p], 0]) for p in range(2))
            sibs.append(Offspring((markers[0], markers[1]), int(self.x[i, s]), int(self.z[i, s])))
        return Family(parents, tuple(sibs))  # type: ignore[arg-type]


def _code(marker: np.ndarray, qtl: np.ndarray) -> np.ndarray:
    # inverse of HAPLOTYPE_ALLELES: (1,1)->0, (0,1)->1, (1,0)->2, (0,0)->3
    return ((1 - qtl) * 2 + (1 - marker)).astype(np.int8)


def _marker_count(genotype: MarkerGenotype) -> int:
    if isinstance(genotype, str):
        g = genotype.strip().upper()
        if len(g) != 4 or g[0] != "M" or g[2] != "M" or g[1] not in "12" or g[3] not in "12":
            raise ValueError(f"cannot parse marker genotype {genotype!r}; expected e.g. 'M1M2'")
        return (g[1] == "2") + (g[3] == "2")
    if isinstance(genotype, (int, np.integer)):
        if not 0 <= genotype <= 2:
            raise ValueError(f"marker count must be 0, 1 or 2, got {genotype}")
        return int(genotype)
    a, b = genotype
    return int(a) + int(b)


def sample_parent(dist: HaplotypeDist, rng: np.random.Generator) -> ParentGenotype:
    a, b = rng.choice(4, size=2, p=dist.as_array())
    return ParentGenotype(HAPLOTYPE_ORDER[a], HAPLOTYPE_ORDER[b])


def is_informative(parents: Sequence[ParentGenotype]) -> bool:
    return any(p.marker_heterozygous for p in parents)


def transmit_haplotype(parent: ParentGenotype, theta: float, rng: np.random.Generator) -> Haplotype:
    """One gamete: marker allele from a random parental haplotype, QTL allele from
    the other haplotype with probability ``theta``."""
    if not 0.0 <= theta <= 0.5:
        raise ParameterDomainError(f"theta must lie in [0, 0.5], got {theta}")
    haps = (parent.hap_a, parent.hap_b)
    pick = int(rng.random() < 0.5)
    recomb = int(rng.random() < theta)
    return Haplotype(haps[pick].marker_allele, haps[pick ^ recomb].qtl_allele)


def derive_z(
    parent_markers: Sequence[MarkerGenotype],
    offspring_marker: MarkerGenotype,
    rng: np.random.Generator,
) -> int:
    """Transmission indicator of M2 for one offspring.

    Raises :class:`MendelianInconsistencyError` when the offspring genotype
    cannot be produced by the parents, and ``ValueError`` for a
    non-informative parent pair.
    """
    p1, p2 = (_marker_count(g) for g in parent_markers)
    child = _marker_count(offspring_marker)
    alleles = {0: (0,), 1: (0, 1), 2: (1,)}
    if child not in {a + b for a in alleles[p1] for b in alleles[p2]}:
        raise MendelianInconsistencyError(
            f"offspring with {child} M2 allele(s) impossible for parents with {p1} and {p2}"
        )
    if p1 != 1 and p2 != 1:
        raise ValueError("non-informative family: neither parent is marker-heterozygous")
    if child == 0:
        return 0
    if child == 2:
        return 1
    if p1 == 1 and p2 == 1:
        return int(rng.random() < 0.5)
    other = p2 if p1 == 1 else p1
    return 0 if other == 2 else 1


def derive_z_array(parent_counts: np.ndarray, child_counts: np.ndarray, coins: np.ndarray) -> np.ndarray:
    """Vectorised :func:`derive_z` for informative families.

    parent_counts: (n, 2); child_counts: (n, s); coins: (n, s) fair 0/1 draws.
    """
    both_het = (parent_counts[:, 0] == 1) & (parent_counts[:, 1] == 1)
    other = np.where(parent_counts[:, 0] == 1, parent_counts[:, 1], parent_counts[:, 0])
    het_rule = np.where(both_het[:, None], coins, (other != 2)[:, None].astype(np.int8))
    z = np.where(child_counts == 2, 1, np.where(child_counts == 0, 0, het_rule))
    return z.astype(np.int8)


def sample_informative_parents(n: int, dist: HaplotypeDist, rng: np.random.Generator) -> np.ndarray:
    """(n, 2, 2) parental haplotype codes; non-informative pairs are redrawn."""
    probs = dist.as_array()
    informative_mass = 1.0 - (probs[[0, 2]].sum() ** 2 + probs[[1, 3]].sum() ** 2) ** 2
    if informative_mass <= 0.0:
        raise ParameterDomainError("marker is monomorphic; no informative parent pairs exist")
    haps = rng.choice(4, size=(n, 2, 2), p=probs).astype(np.int8)
    todo = np.arange(n)
    while True:
        markers = HAPLOTYPE_ALLELES[haps[todo], 0]
        bad = todo[(markers[:, :, 0] == markers[:, :, 1]).all(axis=1)]
        if bad.size == 0:
            return haps
        haps[bad] = rng.choice(4, size=(bad.size, 2, 2), p=probs)
        todo = bad


def transmit_array(parent_haps: np.ndarray, theta: float, rng: np.random.Generator) -> np.ndarray:
    """Gametes for two sibs: (n, 2, 2) codes indexed [family, sib, source parent]."""
    n = parent_haps.shape[0]
    pick = (rng.random((n, 2, 2)) < 0.5).astype(np.intp)
    recomb = (rng.random((n, 2, 2)) < theta).astype(np.intp)
    fam = np.arange(n)[:, None, None]
    par = np.arange(2)[None, None, :]
    marker_src = parent_haps[fam, par, pick]
    qtl_src = parent_haps[fam, par, pick ^ recomb]
    return _code(HAPLOTYPE_ALLELES[marker_src, 0], HAPLOTYPE_ALLELES[qtl_src, 1])


def simulate_families(n: int, params: LocusParams, rng: np.random.Generator) -> FamilyPanel:
    if n < 1:
        raise ValueError(f"need at least one family, got n={n}")
    parents = sample_informative_parents(n, params.haplotypes(), rng)
    children = transmit_array(parents, params.theta, rng)
    x = HAPLOTYPE_ALLELES[children, 1].sum(axis=2).astype(np.int8)
    coins = (rng.random((n, 2)) < 0.5).astype(np.int8)
    parent_counts = HAPLOTYPE_ALLELES[parents, 0].sum(axis=2)
    child_counts = HAPLOTYPE_ALLELES[children, 0].sum(axis=2)
    z = derive_z_array(parent_counts, child_counts, coins)
    return FamilyPanel(parents, children, x, z, params)
