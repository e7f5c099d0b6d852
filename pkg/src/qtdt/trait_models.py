"""Trait generators conditional on the QTL allele count, and heritability calibration."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special, stats

from .errors import CalibrationError, ConfigurationError, ParameterDomainError


class TraitKind(enum.Enum):
    NORMAL = "normal"
    CHI_SQUARE_SHIFT = "chisq"
    POISSON_SHIFT = "poisson"
    BINARY_THRESHOLD = "binary"

    @classmethod
    def parse(cls, text: str) -> "TraitKind":
        key = text.strip().lower().replace("-", "_")
        aliases = {
            "normal": cls.NORMAL,
            "gaussian": cls.NORMAL,
            "chisq": cls.CHI_SQUARE_SHIFT,
            "chi_square": cls.CHI_SQUARE_SHIFT,
            "chisquare": cls.CHI_SQUARE_SHIFT,
            "chi_square_shift": cls.CHI_SQUARE_SHIFT,
            "poisson": cls.POISSON_SHIFT,
            "poisson_shift": cls.POISSON_SHIFT,
            "binary": cls.BINARY_THRESHOLD,
            "binary_threshold": cls.BINARY_THRESHOLD,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigurationError(f"unknown trait kind {text!r}") from None


@dataclass(frozen=True)
class TraitSpec:
    """Generative model of one trait.

    ``residual`` is the variance for NORMAL, the degrees of freedom for
    CHI_SQUARE_SHIFT, the Poisson mean for POISSON_SHIFT and the latent
    standard deviation for BINARY_THRESHOLD.
    """

    kind: TraitKind
    alpha: float
    beta: float
    residual: float
    threshold: float | None = None

    def __post_init__(self) -> None:
        if not self.residual > 0:
            raise ParameterDomainError(f"{self.kind.value} residual parameter must be positive, got {self.residual}")
        if self.kind is TraitKind.BINARY_THRESHOLD and self.threshold is None:
            raise ParameterDomainError("binary trait needs a threshold")

    @property
    def residual_variance(self) -> float:
        if self.kind is TraitKind.NORMAL:
            return self.residual
        if self.kind is TraitKind.CHI_SQUARE_SHIFT:
            return 2.0 * self.residual
        if self.kind is TraitKind.POISSON_SHIFT:
            return self.residual
        return self.residual**2


@dataclass(frozen=True)
class HeritabilityTarget:
    p_star: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p_star < 1.0:
            raise ParameterDomainError(f"p_star must lie in (0, 1), got {self.p_star}")


def genotype_weights(d: float) -> np.ndarray:
    """Hardy-Weinberg probabilities of 0, 1, 2 copies of D2."""
    return np.array([(1 - d) ** 2, 2 * d * (1 - d), d**2])


def genetic_variance(d: float, beta: float) -> float:
    if not 0.0 < d < 1.0:
        raise ParameterDomainError(f"d must lie in (0, 1), got {d}")
    return 2.0 * d * (1.0 - d) * beta**2


def solve_residual_param(kind: TraitKind, d: float, beta: float, target: HeritabilityTarget | float) -> float:
    p = target.p_star if isinstance(target, HeritabilityTarget) else float(target)
    if kind is TraitKind.BINARY_THRESHOLD:
        raise CalibrationError("binary traits are calibrated through (c, sigma), not a closed-form residual")
    if not 0.0 < p < 1.0:
        raise CalibrationError(f"p_star must lie in (0, 1), got {p}")
    r = genetic_variance(d, beta) * (1.0 - p) / p
    if not r > 0:
        raise CalibrationError(f"residual variance {r} is not positive (beta={beta}, d={d}, p_star={p})")
    if kind is TraitKind.CHI_SQUARE_SHIFT:
        return r / 2.0
    return r


def calibrated_spec(kind: TraitKind, alpha: float, beta: float, d: float, p_star: float) -> TraitSpec:
    return TraitSpec(kind, alpha, beta, solve_residual_param(kind, d, beta, HeritabilityTarget(p_star)))


def binary_penetrance(spec: TraitSpec, x) -> np.ndarray | float:
    """P(Y = 1 | x) for the latent-threshold model (Y = 1 when the latent value exceeds c)."""
    if spec.kind is not TraitKind.BINARY_THRESHOLD:
        raise ConfigurationError(f"penetrance is defined for binary traits only, got {spec.kind.value}")
    if spec.residual <= 0:
        raise ParameterDomainError(f"latent sigma must be positive, got {spec.residual}")
    z = (spec.threshold - spec.alpha - spec.beta * np.asarray(x, dtype=float)) / spec.residual
    out = special.ndtr(-z)
    return float(out) if np.ndim(out) == 0 else out


def binary_prevalence(spec: TraitSpec, d: float) -> float:
    return float(genotype_weights(d) @ binary_penetrance(spec, np.arange(3)))


def conditional_moments(spec: TraitSpec) -> tuple[np.ndarray, np.ndarray]:
    """E(Y | x) and V(Y | x) for x = 0, 1, 2."""
    x = np.arange(3, dtype=float)
    if spec.kind is TraitKind.BINARY_THRESHOLD:
        pen = binary_penetrance(spec, x)
        return pen, pen * (1 - pen)
    shift = {TraitKind.NORMAL: 0.0, TraitKind.CHI_SQUARE_SHIFT: spec.residual, TraitKind.POISSON_SHIFT: spec.residual}
    mean = spec.alpha + spec.beta * x + shift[spec.kind]
    return mean, np.full(3, spec.residual_variance)


def p_star_oracle(spec: TraitSpec, d: float) -> float:
    """Proportion of trait variance explained by the QTL, by enumeration over x."""
    w = genotype_weights(d)
    mean, var = conditional_moments(spec)
    grand = w @ mean
    v_mean = w @ (mean - grand) ** 2
    total = v_mean + w @ var
    return float(v_mean / total)


def residual_quantile(spec: TraitSpec, u: np.ndarray) -> np.ndarray:
    """Map standard-normal latent values to the residual distribution of ``spec``."""
    if spec.kind is TraitKind.NORMAL:
        return np.sqrt(spec.residual) * u
    if spec.kind is TraitKind.BINARY_THRESHOLD:
        return spec.residual * u
    q = special.ndtr(u)
    if spec.kind is TraitKind.CHI_SQUARE_SHIFT:
        return stats.gamma.ppf(q, spec.residual / 2.0, scale=2.0)
    return stats.poisson.ppf(q, spec.residual)


def generate_traits(
    spec: TraitSpec,
    x: np.ndarray,
    rng: np.random.Generator,
    latent: np.ndarray | None = None,
) -> np.ndarray:
    """Trait values for an array of allele counts.

    When ``latent`` (standard normals, same shape as ``x``) is given, the
    residuals are obtained from it through the residual quantile function;
    this is how correlated residuals are injected.  Otherwise residuals are
    drawn directly from ``rng``.
    """
    x = np.asarray(x, dtype=float)
    loc = spec.alpha + spec.beta * x
    if latent is not None:
        resid = residual_quantile(spec, np.asarray(latent, dtype=float))
    elif spec.kind is TraitKind.NORMAL:
        resid = rng.normal(0.0, np.sqrt(spec.residual), size=x.shape)
    elif spec.kind is TraitKind.CHI_SQUARE_SHIFT:
        resid = rng.gamma(spec.residual / 2.0, 2.0, size=x.shape)
    elif spec.kind is TraitKind.POISSON_SHIFT:
        resid = rng.poisson(spec.residual, size=x.shape).astype(float)
    else:
        resid = rng.normal(0.0, spec.residual, size=x.shape)
    if spec.kind is TraitKind.BINARY_THRESHOLD:
        return (loc + resid > spec.threshold).astype(float)
    return loc + resid


def generate_trait(spec: TraitSpec, x: int, rng: np.random.Generator) -> float:
    return float(generate_traits(spec, np.array([x]), rng)[0])


def residual_correlation_matrix(k: int, cross_trait: float = 0.0, cross_sib: float | Sequence[float] = 0.0,
                                cross_sib_cross_trait: float = 0.0) -> np.ndarray:
    """Latent correlation of the 2k residual cells ordered (sib, trait).

    ``cross_sib`` may be a single value or one value per trait.
    """
    sib = np.broadcast_to(np.asarray(cross_sib, dtype=float), (k,))
    within = np.full((k, k), cross_trait)
    np.fill_diagonal(within, 1.0)
    between = np.full((k, k), cross_sib_cross_trait)
    np.fill_diagonal(between, sib)
    corr = np.block([[within, between], [between, within]])
    if np.linalg.eigvalsh(corr).min() < -1e-12:
        raise ParameterDomainError(f"residual correlation matrix is not positive semidefinite:\n{corr}")
    return corr


def latent_normals(n: int, corr: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """(n, 2, k) correlated standard normals for the copula."""
    dim = corr.shape[0]
    w, v = np.linalg.eigh(corr)
    root = v * np.sqrt(np.clip(w, 0.0, None))
    draws = rng.standard_normal((n, dim)) @ root.T
    return draws.reshape(n, 2, dim // 2)


def generate_panel_traits(
    specs: Sequence[TraitSpec],
    x: np.ndarray,
    rng: np.random.Generator,
    corr: np.ndarray | None = None,
) -> np.ndarray:
    """(n, 2, k) trait values for sib pairs with QTL counts ``x`` of shape (n, 2)."""
    n = x.shape[0]
    k = len(specs)
    out = np.empty((n, 2, k))
    latent = None
    if corr is not None and not np.allclose(corr, np.eye(2 * k)):
        latent = latent_normals(n, corr, rng)
    for j, spec in enumerate(specs):
        out[:, :, j] = generate_traits(spec, x, rng, None if latent is None else latent[:, :, j])
    return out


def residual_correlations_for_targets(
    specs: Sequence[TraitSpec], d: float, rho1: float | None = None, rho2: float | None = None
) -> tuple[float, tuple[float, ...]]:
    """Residual correlations that give the requested observed trait correlations.

    ``rho1`` is the target correlation between the two traits of one
    offspring, ``rho2`` the target correlation of a trait between sibs.
    Genotypic covariances use Hardy-Weinberg proportions and the sib
    covariance d(1 - d) of allele counts; the result is exact for normal
    traits and a first-order approximation for the others (the copula maps
    latent to observed correlation nonlinearly).  Returns
    ``(cross_trait, cross_sib_per_trait)``.
    """
    if any(s.kind is TraitKind.BINARY_THRESHOLD for s in specs):
        raise ConfigurationError("correlation targets are supported for continuous and count traits only")
    gv = np.array([genetic_variance(d, s.beta) for s in specs])
    rv = np.array([s.residual_variance for s in specs])
    total = gv + rv
    cross_trait = 0.0
    if rho1 is not None:
        if len(specs) != 2:
            raise ConfigurationError("a cross-trait correlation target needs two traits")
        b1, b2 = specs[0].beta, specs[1].beta
        genetic_cov = 2 * d * (1 - d) * b1 * b2
        cross_trait = (rho1 * np.sqrt(total[0] * total[1]) - genetic_cov) / np.sqrt(rv[0] * rv[1])
    cross_sib = np.zeros(len(specs))
    if rho2 is not None:
        sib_genetic_cov = np.array([d * (1 - d) * s.beta**2 for s in specs])
        cross_sib = (rho2 * total - sib_genetic_cov) / rv
    values = np.append(cross_sib, cross_trait)
    if np.any(np.abs(values) > 1):
        raise CalibrationError(f"correlation targets need residual correlations outside [-1, 1]: {values.tolist()}")
    return float(cross_trait), tuple(float(v) for v in cross_sib)
