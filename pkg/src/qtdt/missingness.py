"""Missing-completely-at-random masks for sib-pair phenotype panels."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigurationError
from .trait_models import TraitKind


class MissingType(enum.Enum):
    T1 = "1"
    T2_1 = "2.1"
    T2_3 = "2.3"
    T2_4 = "2.4"

    @classmethod
    def parse(cls, text: str) -> "MissingType":
        key = str(text).strip().upper().replace("TYPE", "").replace("_", ".").lstrip("T").strip()
        for member in cls:
            if member.value == key:
                return member
        if key == "2.2":
            raise ConfigurationError("missing type 2.2 is not supported")
        raise ConfigurationError(f"unknown missing type {text!r}")

    @property
    def n_traits(self) -> int:
        return 1 if self is MissingType.T1 else 2


# Admissible "missing" patterns per family, as boolean (sib, trait) grids.
_PATTERNS: dict[MissingType, np.ndarray] = {
    MissingType.T1: np.array([[[True], [False]], [[False], [True]]]),
    MissingType.T2_1: np.array([np.eye(4, dtype=bool)[i].reshape(2, 2) for i in range(4)]),
    MissingType.T2_3: np.array([[[True, True], [False, False]], [[False, False], [True, True]]]),
    MissingType.T2_4: np.array([~np.eye(4, dtype=bool)[i].reshape(2, 2) for i in range(4)]),
}


def mask_patterns(mtype: MissingType) -> np.ndarray:
    """(n_patterns, 2, k) arrays, True where the cell is missing."""
    return _PATTERNS[mtype].copy()


class Transmissions(NamedTuple):
    z: np.ndarray  # (N,)
    y: np.ndarray  # (N, k)


@dataclass
class PhenotypePanel:
    """Sib-pair phenotypes with an observation mask.

    values:   (n, 2, k) trait values (NaN where missing)
    observed: (n, 2, k) True where the cell is observed
    z:        (n, 2) transmission indicators
    present:  (n, 2) False for a sib that does not exist (single-sib families)
    imputed:  (n, 2, k) True where the value was filled in by imputation
    """

    values: np.ndarray
    observed: np.ndarray
    kinds: tuple[TraitKind, ...]
    z: np.ndarray
    present: np.ndarray | None = None
    imputed: np.ndarray | None = field(default=None)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[1] != 2:
            raise ValueError(f"values must have shape (n, 2, k), got {self.values.shape}")
        if self.values.shape[2] != len(self.kinds):
            raise ValueError(f"{self.values.shape[2]} trait columns but {len(self.kinds)} kinds")
        self.observed = np.asarray(self.observed, dtype=bool)
        if self.present is None:
            self.present = np.ones(self.values.shape[:2], dtype=bool)
        if self.imputed is None:
            self.imputed = np.zeros(self.values.shape, dtype=bool)
        self.kinds = tuple(self.kinds)

    @classmethod
    def complete(cls, values: np.ndarray, kinds: Sequence[TraitKind], z: np.ndarray) -> "PhenotypePanel":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape, dtype=bool), tuple(kinds), np.asarray(z))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[2]

    @property
    def n_missing(self) -> int:
        return int((~self.observed & self.present[:, :, None]).sum())

    def complete_offspring(self) -> np.ndarray:
        """(n, 2) True for existing sibs with every trait observed."""
        return self.present & self.observed.all(axis=2)

    def transmissions(self) -> Transmissions:
        """(Z, trait vector) records of every existing sib with no missing cell."""
        keep = self.complete_offspring()
        return Transmissions(self.z[keep].astype(float), self.values[keep])


def round_half_up(x: float) -> int:
    return int(Decimal(repr(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def draw_mask(n: int, k: int, mtype: MissingType, miss_p: float, rng: np.random.Generator) -> np.ndarray:
    """Observation mask (n, 2, k); True where observed.

    Only the panel dimensions reach this function, so the mask cannot depend
    on trait values or transmissions.
    """
    if k != mtype.n_traits:
        raise ConfigurationError(f"missing type {mtype.value} needs {mtype.n_traits} trait(s), panel has {k}")
    if not 0.0 <= miss_p < 1.0:
        raise ConfigurationError(f"miss_p must lie in [0, 1), got {miss_p}")
    observed = np.ones((n, 2, k), dtype=bool)
    n_sel = round_half_up(miss_p * n)
    if n_sel == 0:
        return observed
    families = np.sort(rng.choice(n, size=n_sel, replace=False))
    patterns = _PATTERNS[mtype]
    which = rng.integers(0, len(patterns), size=n_sel)
    observed[families] = ~patterns[which]
    return observed


def apply_missingness(panel: PhenotypePanel, mtype: MissingType, miss_p: float, rng: np.random.Generator) -> PhenotypePanel:
    if panel.n_missing:
        raise ConfigurationError("panel already has missing cells")
    observed = draw_mask(panel.n, panel.k, mtype, miss_p, rng)
    values = np.where(observed, panel.values, np.nan)
    return replace(panel, values=values, observed=observed, imputed=np.zeros_like(observed))


def deleted_panel(panel: PhenotypePanel, unit: str = "offspring") -> Transmissions:
    """Complete-case data.

    With ``unit="offspring"`` every offspring record holding a missing cell is
    dropped and its sib is kept; with ``unit="family"`` any family with a
    missing cell is dropped as a whole.
    """
    if unit == "offspring":
        return panel.transmissions()
    if unit != "family":
        raise ConfigurationError(f"deletion unit must be 'offspring' or 'family', got {unit!r}")
    keep = (panel.complete_offspring() | ~panel.present).all(axis=1)
    sub = replace(panel, values=panel.values[keep], observed=panel.observed[keep], z=panel.z[keep],
                  present=panel.present[keep], imputed=panel.imputed[keep])
    return sub.transmissions()
