"""Scenario definition and its ``key = value`` text format.

Example::

    # bivariate normal, one cell missing in 30% of families
    name = normal_normal_t21
    n_families = 500
    d = 0.1
    m = 0.5
    theta = 0.01
    delta_star = 0, 0.33, 0.67, 1
    trait_kind = normal, normal
    trait_alpha = 5, 10
    trait_beta = 1, 2
    trait_p_star = 0.1, 0.2
    residual_cross_trait = 0.3
    residual_cross_sib = 0.3
    missing_type = 2.1
    miss_p = 0.3
    strategy = auto
    replications = 1000
    alpha = 0.05
    centering = mean
    seed = 1

Blank lines and ``#`` comments are ignored; list values are comma
separated.  Per-trait keys take one entry per trait.  ``trait_residual``
gives the residual parameter directly (variance, df, Poisson mean or latent
sigma); an entry of ``-`` there means "calibrate from ``trait_p_star``".
Binary traits need ``trait_residual`` and ``trait_threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError
from .genetics_core import LocusParams
from .imputation import Strategy
from .missingness import MissingType
from .trait_models import (
    TraitKind,
    TraitSpec,
    residual_correlation_matrix,
    residual_correlations_for_targets,
    solve_residual_param,
)

DEFAULT_DELTA_GRID = (0.0, 0.33, 0.67, 1.0)

KNOWN_KEYS = {
    "name", "n_families", "d", "m", "theta", "delta_star",
    "trait_kind", "trait_alpha", "trait_beta", "trait_p_star", "trait_residual", "trait_threshold",
    "residual_cross_trait", "residual_cross_sib", "residual_cross_sib_cross_trait", "target_rho1", "target_rho2",
    "missing_type", "miss_p", "strategy", "replications", "alpha", "centering", "deletion", "seed",
}


@dataclass(frozen=True)
class Scenario:
    traits: tuple[TraitSpec, ...]
    d: float = 0.1
    m: float = 0.5
    theta: float = 0.01
    delta_stars: tuple[float, ...] = DEFAULT_DELTA_GRID
    n_families: int = 500
    missing_type: MissingType = MissingType.T1
    miss_p: float = 0.2
    strategy: Strategy | str = "auto"
    replications: int = 1000
    alpha: float = 0.05
    master_seed: int = 0
    centering: str = "mean"
    deletion: str = "family"
    residual_cross_trait: float = 0.0
    residual_cross_sib: tuple[float, ...] = (0.0,)
    residual_cross_sib_cross_trait: float = 0.0
    p_star_targets: tuple[float | None, ...] = field(default=())
    name: str = "scenario"

    def __post_init__(self) -> None:
        if self.replications < 1:
            raise ConfigurationError(f"replications must be at least 1, got {self.replications}")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigurationError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.n_families < 1:
            raise ConfigurationError(f"n_families must be at least 1, got {self.n_families}")
        if len(self.traits) != self.missing_type.n_traits:
            raise ConfigurationError(
                f"missing type {self.missing_type.value} needs {self.missing_type.n_traits} trait(s), "
                f"got {len(self.traits)}"
            )
        if not 0.0 <= self.miss_p < 1.0:
            raise ConfigurationError(f"miss_p must lie in [0, 1), got {self.miss_p}")
        if self.centering not in ("mean", "median"):
            raise ConfigurationError(f"centering must be mean or median, got {self.centering!r}")
        if self.deletion not in ("offspring", "family"):
            raise ConfigurationError(f"deletion must be offspring or family, got {self.deletion!r}")
        if isinstance(self.strategy, str) and self.strategy != "auto":
            object.__setattr__(self, "strategy", Strategy.parse(self.strategy))
        if not self.delta_stars:
            raise ConfigurationError("delta_star grid is empty")
        for ds in self.delta_stars:
            self.locus(ds)
        self.residual_corr()

    @property
    def kinds(self) -> tuple[TraitKind, ...]:
        return tuple(t.kind for t in self.traits)

    def locus(self, delta_star: float) -> LocusParams:
        return LocusParams(self.d, self.m, delta_star, self.theta)

    def residual_corr(self) -> np.ndarray | None:
        k = len(self.traits)
        sib = self.residual_cross_sib
        if len(sib) not in (1, k):
            raise ConfigurationError(f"residual_cross_sib needs 1 or {k} values, got {len(sib)}")
        if self.residual_cross_trait == 0 and not any(sib) and self.residual_cross_sib_cross_trait == 0:
            return None
        if k == 1 and (self.residual_cross_trait or self.residual_cross_sib_cross_trait):
            raise ConfigurationError("cross-trait residual correlation needs two traits")
        return residual_correlation_matrix(
            k, self.residual_cross_trait, sib if len(sib) == k else sib[0], self.residual_cross_sib_cross_trait
        )

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, master_seed=int(seed))

    def to_text(self) -> str:
        """Fully resolved scenario in the file format (residuals given explicitly)."""
        def fmt(values: Sequence) -> str:
            return ", ".join("-" if v is None else f"{v:g}" if isinstance(v, float) else str(v) for v in values)

        lines = [
            f"name = {self.name}",
            f"n_families = {self.n_families}",
            f"d = {self.d:g}",
            f"m = {self.m:g}",
            f"theta = {self.theta:g}",
            f"delta_star = {fmt(self.delta_stars)}",
            f"trait_kind = {', '.join(t.kind.value for t in self.traits)}",
            f"trait_alpha = {fmt([float(t.alpha) for t in self.traits])}",
            f"trait_beta = {fmt([float(t.beta) for t in self.traits])}",
            f"trait_residual = {', '.join(repr(float(t.residual)) for t in self.traits)}",
        ]
        if any(t.threshold is not None for t in self.traits):
            lines.append(f"trait_threshold = {fmt([t.threshold for t in self.traits])}")
        if self.p_star_targets:
            lines.append(f"trait_p_star = {fmt(self.p_star_targets)}")
        lines += [
            f"residual_cross_trait = {self.residual_cross_trait!r}",
            f"residual_cross_sib = {', '.join(repr(float(v)) for v in self.residual_cross_sib)}",
            f"residual_cross_sib_cross_trait = {self.residual_cross_sib_cross_trait!r}",
            f"missing_type = {self.missing_type.value}",
            f"miss_p = {self.miss_p:g}",
            f"strategy = {self.strategy if isinstance(self.strategy, str) else self.strategy.value}",
            f"replications = {self.replications}",
            f"alpha = {self.alpha:g}",
            f"centering = {self.centering}",
            f"deletion = {self.deletion}",
            f"seed = {self.master_seed}",
        ]
        return "\n".join(lines) + "\n"


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _floats(key: str, value: str) -> list[float | None]:
    out: list[float | None] = []
    for item in _split(value):
        if item in ("-", "auto"):
            out.append(None)
            continue
        try:
            out.append(float(item))
        except ValueError:
            raise ConfigurationError(f"{key}: {item!r} is not a number") from None
    return out


def parse_scenario(text: str, name: str = "scenario") -> Scenario:
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value

    def scalar(key: str, cast, default):
        if key not in raw:
            return default
        try:
            return cast(raw[key])
        except ValueError:
            raise ConfigurationError(f"{key}: cannot parse {raw[key]!r}") from None

    d = scalar("d", float, 0.1)
    if "trait_kind" not in raw:
        raise ConfigurationError("scenario needs trait_kind")
    kinds = [TraitKind.parse(k) for k in _split(raw["trait_kind"])]
    k = len(kinds)

    def per_trait(key: str, default: float | None) -> list[float | None]:
        if key not in raw:
            return [default] * k
        vals = _floats(key, raw[key])
        if len(vals) == 1 and k > 1:
            vals = vals * k
        if len(vals) != k:
            raise ConfigurationError(f"{key} needs {k} value(s), got {len(vals)}")
        return vals

    alphas = per_trait("trait_alpha", 0.0)
    betas = per_trait("trait_beta", 1.0)
    p_stars = per_trait("trait_p_star", None)
    residuals = per_trait("trait_residual", None)
    thresholds = per_trait("trait_threshold", None)
    traits = []
    for j, kind in enumerate(kinds):
        residual = residuals[j]
        if residual is None:
            if p_stars[j] is None:
                raise ConfigurationError(f"trait {j + 1}: give trait_residual or trait_p_star")
            residual = solve_residual_param(kind, d, betas[j], p_stars[j])
        threshold = thresholds[j] if kind is TraitKind.BINARY_THRESHOLD else None
        if kind is TraitKind.BINARY_THRESHOLD and threshold is None:
            raise ConfigurationError(f"trait {j + 1}: binary traits need trait_threshold")
        traits.append(TraitSpec(kind, alphas[j] or 0.0, betas[j] if betas[j] is not None else 1.0, residual, threshold))

    deltas = tuple(v for v in _floats("delta_star", raw["delta_star"]) if v is not None) if "delta_star" in raw \
        else DEFAULT_DELTA_GRID
    sib = tuple(v or 0.0 for v in _floats("residual_cross_sib", raw.get("residual_cross_sib", "0")))
    cross_trait = scalar("residual_cross_trait", float, 0.0)
    if "target_rho1" in raw or "target_rho2" in raw:
        if "residual_cross_trait" in raw or "residual_cross_sib" in raw:
            raise ConfigurationError("give either target_rho1/target_rho2 or residual_cross_* keys, not both")
        cross_trait, sib = residual_correlations_for_targets(
            traits, d, scalar("target_rho1", float, None), scalar("target_rho2", float, None)
        )
    return Scenario(
        traits=tuple(traits),
        d=d,
        m=scalar("m", float, 0.5),
        theta=scalar("theta", float, 0.01),
        delta_stars=deltas,
        n_families=scalar("n_families", int, 500),
        missing_type=MissingType.parse(raw.get("missing_type", "1")),
        miss_p=scalar("miss_p", float, 0.2),
        strategy=raw.get("strategy", "auto").strip().lower(),
        replications=scalar("replications", int, 1000),
        alpha=scalar("alpha", float, 0.05),
        master_seed=scalar("seed", int, 0),
        centering=raw.get("centering", "mean").strip().lower(),
        deletion=raw.get("deletion", "family").strip().lower(),
        residual_cross_trait=cross_trait,
        residual_cross_sib=sib,
        residual_cross_sib_cross_trait=scalar("residual_cross_sib_cross_trait", float, 0.0),
        p_star_targets=tuple(p_stars) if any(p is not None for p in p_stars) else (),
        name=raw.get("name", name),
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario(text, name=path.stem)


__all__ = ["Scenario", "parse_scenario", "load_scenario", "DEFAULT_DELTA_GRID"]
