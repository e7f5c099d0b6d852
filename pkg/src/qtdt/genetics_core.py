"""Two-locus primitives: allele frequencies, LD and haplotype probabilities.

Haplotypes are encoded as ``(marker, qtl)`` allele pairs where ``marker`` is 1
for M2 and 0 for M1, and ``qtl`` is 1 for D2 and 0 for D1.  The integer code
used by the vectorised simulator follows the order of :data:`HAPLOTYPE_ORDER`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ParameterDomainError

FEASIBILITY_TOL = 1e-12


class Haplotype(NamedTuple):
    marker_allele: int  # 1 = M2, 0 = M1
    qtl_allele: int  # 1 = D2, 0 = D1

    def __str__(self) -> str:
        return f"M{self.marker_allele + 1}D{self.qtl_allele + 1}"

    @classmethod
    def parse(cls, text: str) -> "Haplotype":
        text = text.strip().upper()
        if len(text) != 4 or text[0] != "M" or text[2] != "D" or text[1] not in "12" or text[3] not in "12":
            raise ValueError(f"cannot parse haplotype {text!r}; expected e.g. 'M2D1'")
        return cls(int(text[1]) - 1, int(text[3]) - 1)


M2D2 = Haplotype(1, 1)
M1D2 = Haplotype(0, 1)
M2D1 = Haplotype(1, 0)
M1D1 = Haplotype(0, 0)

HAPLOTYPE_ORDER: tuple[Haplotype, ...] = (M2D2, M1D2, M2D1, M1D1)
# (marker, qtl) columns for each code in HAPLOTYPE_ORDER
HAPLOTYPE_ALLELES = np.array([[h.marker_allele, h.qtl_allele] for h in HAPLOTYPE_ORDER], dtype=np.int8)


@dataclass(frozen=True)
class LocusParams:
    """Allele frequencies, normalised LD and recombination fraction."""

    d: float
    m: float
    delta_star: float
    theta: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 < self.d < 1.0:
            raise ParameterDomainError(f"d must lie in (0, 1), got {self.d}")
        if not 0.0 < self.m < 1.0:
            raise ParameterDomainError(f"m must lie in (0, 1), got {self.m}")
        if not 0.0 <= self.delta_star <= 1.0:
            raise ParameterDomainError(f"delta_star must lie in [0, 1], got {self.delta_star}")
        if not 0.0 <= self.theta <= 0.5:
            raise ParameterDomainError(f"theta must lie in [0, 0.5], got {self.theta}")

    @property
    def delta(self) -> float:
        return compute_delta(self)

    def haplotypes(self) -> "HaplotypeDist":
        return haplotype_distribution(self.d, self.m, self.delta)


@dataclass(frozen=True)
class HaplotypeDist:
    p_m2d2: float
    p_m1d2: float
    p_m2d1: float
    p_m1d1: float

    def __post_init__(self) -> None:
        probs = self.as_array()
        if np.any(probs < -FEASIBILITY_TOL) or np.any(probs > 1 + FEASIBILITY_TOL):
            raise ParameterDomainError(f"haplotype probabilities outside [0, 1]: {probs.tolist()}")
        if abs(probs.sum() - 1.0) > FEASIBILITY_TOL:
            raise ParameterDomainError(f"haplotype probabilities sum to {probs.sum()!r}, not 1")

    def as_array(self) -> np.ndarray:
        """Probabilities in :data:`HAPLOTYPE_ORDER`."""
        return np.array([self.p_m2d2, self.p_m1d2, self.p_m2d1, self.p_m1d1], dtype=float)

    def probability(self, hap: Haplotype) -> float:
        return float(self.as_array()[HAPLOTYPE_ORDER.index(hap)])

    @property
    def d(self) -> float:
        return self.p_m2d2 + self.p_m1d2

    @property
    def m(self) -> float:
        return self.p_m2d2 + self.p_m2d1


def compute_delta(params: LocusParams) -> float:
    """LD coefficient scaled so that ``delta_star = 1`` is the largest feasible positive value."""
    d, m = params.d, params.m
    return params.delta_star * min(d * (1.0 - m), m * (1.0 - d))


def delta_bounds(d: float, m: float) -> tuple[float, float]:
    """Feasible ``(lower, upper)`` range of the LD coefficient for given allele frequencies."""
    return -min(d * m, (1.0 - d) * (1.0 - m)), min(d * (1.0 - m), m * (1.0 - d))


def haplotype_distribution(d: float, m: float, delta: float) -> HaplotypeDist:
    if not 0.0 < d < 1.0 or not 0.0 < m < 1.0:
        raise ParameterDomainError(f"allele frequencies must lie in (0, 1), got d={d}, m={m}")
    lo, hi = delta_bounds(d, m)
    if delta > hi + FEASIBILITY_TOL:
        raise ParameterDomainError(
            f"delta={delta} exceeds upper bound min(d(1-m), m(1-d))={hi}"
        )
    if delta < lo - FEASIBILITY_TOL:
        raise ParameterDomainError(
            f"delta={delta} is below lower bound -min(dm, (1-d)(1-m))={lo}"
        )
    probs = [
        m * d + delta,
        (1.0 - m) * d - delta,
        m * (1.0 - d) - delta,
        (1.0 - m) * (1.0 - d) + delta,
    ]
    # absorb rounding noise at the feasibility boundary
    probs = [0.0 if abs(p) <= FEASIBILITY_TOL else p for p in probs]
    return HaplotypeDist(*probs)
