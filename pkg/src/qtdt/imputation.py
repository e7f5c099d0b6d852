"""Conditional-mean imputation of missing sib-pair phenotypes.

Each missing cell is replaced by E(Y | predictors) from a GLM fitted on the
records where the response and all predictor cells are observed: least
squares for continuous traits (on the log scale for chi-square traits),
Poisson regression for counts and logistic regression for binary traits.
Every model has an intercept.

A predictor is addressed relative to the sib being imputed as
``(other_sib, trait)``: ``(False, t)`` is trait ``t`` of the same offspring,
``(True, t)`` is trait ``t`` of the sib.  Rows are stacked over both sibs, so
cross-sib models are fitted symmetrically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.special import expit

from . import glm
from .errors import ConfigurationError, EstimationError, TransformError
from .missingness import MissingType, PhenotypePanel
from .trait_models import TraitKind

MIN_TRAINING_ROWS = 10
MIN_COMPLETE_FAMILIES = 10
TIE_MARGIN = 0.02

Predictor = tuple[bool, int]


class Strategy(enum.Enum):
    USE_SAME = "use_same"
    USE_OTHER = "use_other"
    USE_BOTH = "use_both"

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        key = text.strip().lower().replace("-", "_").replace(" ", "_")
        for member in cls:
            if key in (member.value, member.name.lower(), member.value.replace("use_", "")):
                return member
        raise ConfigurationError(f"unknown imputation strategy {text!r}")


@dataclass(frozen=True)
class CorrelationSummary:
    rho1: float  # cross-trait, same offspring
    rho2: float  # same trait across sibs, max over traits

    @property
    def case(self) -> str:
        if abs(self.rho1 - self.rho2) <= TIE_MARGIN:
            return "equal"
        return "greater" if self.rho1 > self.rho2 else "less"


# Best strategy per unordered trait-kind pair and sign of rho1 - rho2.
_N, _C, _P = TraitKind.NORMAL, TraitKind.CHI_SQUARE_SHIFT, TraitKind.POISSON_SHIFT
_SAME, _OTHER = Strategy.USE_SAME, Strategy.USE_OTHER
STRATEGY_TABLE: dict[frozenset, dict[str, Strategy]] = {
    frozenset([_N]): {"greater": _OTHER, "less": _OTHER, "equal": _OTHER},
    frozenset([_N, _P]): {"greater": _OTHER, "less": _SAME, "equal": _OTHER},
    frozenset([_P]): {"greater": _OTHER, "less": _OTHER, "equal": _OTHER},
    frozenset([_N, _C]): {"greater": _SAME, "less": _OTHER, "equal": _OTHER},
    frozenset([_P, _C]): {"greater": _SAME, "less": _OTHER, "equal": _OTHER},
    frozenset([_C]): {"greater": _SAME, "less": _OTHER, "equal": _OTHER},
}


def transform_for_skew(values, kind: TraitKind) -> np.ndarray:
    """Natural log for chi-square traits; identity for every other kind."""
    values = np.asarray(values, dtype=float)
    if kind is not TraitKind.CHI_SQUARE_SHIFT:
        return values
    finite = values[np.isfinite(values)]
    if np.any(finite <= 0):
        raise TransformError(f"log transform needs positive values, found minimum {finite.min()}")
    with np.errstate(invalid="ignore"):
        return np.log(values)


def inverse_skew_transform(values, kind: TraitKind) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.exp(values) if kind is TraitKind.CHI_SQUARE_SHIFT else values


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    denom = np.sqrt((a @ a) * (b @ b))
    return float(a @ b / denom) if denom > 0 else 0.0


def estimate_correlations(panel: PhenotypePanel) -> CorrelationSummary:
    if panel.k != 2:
        raise ConfigurationError(f"correlation summary needs two traits, panel has {panel.k}")
    full = panel.complete_offspring().all(axis=1)
    if full.sum() < MIN_COMPLETE_FAMILIES:
        raise EstimationError(f"only {int(full.sum())} complete families; need {MIN_COMPLETE_FAMILIES}")
    v = panel.values[full]
    rho1 = _pearson(v[:, :, 0].ravel(), v[:, :, 1].ravel())
    rho2 = max(_pearson(v[:, 0, j], v[:, 1, j]) for j in range(2))
    return CorrelationSummary(rho1, rho2)


def select_strategy(combo: Sequence[TraitKind], corr: CorrelationSummary) -> Strategy:
    key = frozenset(combo)
    if len(combo) != 2 or key not in STRATEGY_TABLE:
        names = ", ".join(k.value for k in combo)
        raise ConfigurationError(f"no strategy recommendation for trait combination ({names})")
    return STRATEGY_TABLE[key][corr.case]


def strategy_predictors(strategy: Strategy, trait: int) -> tuple[Predictor, ...]:
    other = 1 - trait
    if strategy is Strategy.USE_OTHER:
        return ((False, other),)
    if strategy is Strategy.USE_SAME:
        return ((True, trait),)
    return ((False, other), (True, trait))


@dataclass
class ConditionalModel:
    """A fitted imputation model for one response trait."""

    trait: int
    kind: TraitKind
    predictors: tuple[Predictor, ...]
    fit: glm.FitResult
    n_train: int

    def predict_working(self, design: np.ndarray) -> np.ndarray:
        """Conditional mean on the working scale (log scale for chi-square)."""
        eta = design @ self.fit.coefficients
        if self.kind is TraitKind.POISSON_SHIFT:
            return np.exp(eta)
        if self.kind is TraitKind.BINARY_THRESHOLD:
            return expit(eta)
        return eta

    def predict(self, design: np.ndarray) -> np.ndarray:
        return inverse_skew_transform(self.predict_working(design), self.kind)


def _working_values(panel: PhenotypePanel) -> np.ndarray:
    work = np.empty_like(panel.values)
    for j, kind in enumerate(panel.kinds):
        work[:, :, j] = transform_for_skew(panel.values[:, :, j], kind)
    return work


def _gather(work: np.ndarray, ok: np.ndarray, fam: np.ndarray, sib: np.ndarray,
            predictors: Iterable[Predictor]) -> tuple[np.ndarray, np.ndarray]:
    cols, usable = [np.ones(fam.size)], np.ones(fam.size, dtype=bool)
    for other_sib, t in predictors:
        s = 1 - sib if other_sib else sib
        cols.append(work[fam, s, t])
        usable &= ok[fam, s, t]
    return np.column_stack(cols), usable


def fit_conditional_model(panel: PhenotypePanel, trait: int, predictors: Sequence[Predictor],
                          work: np.ndarray | None = None) -> ConditionalModel:
    """Fit E(trait | predictors) on every sib whose response and predictor cells are observed."""
    if work is None:
        work = _working_values(panel)
    ok = panel.observed & panel.present[:, :, None]
    n = panel.n
    fam = np.tile(np.arange(n), 2)
    sib = np.repeat([0, 1], n)
    X, usable = _gather(work, ok, fam, sib, predictors)
    usable &= ok[fam, sib, trait]
    X, y = X[usable], work[fam[usable], sib[usable], trait]
    if y.size < MIN_TRAINING_ROWS:
        raise EstimationError(
            f"only {y.size} training rows for trait {trait} given {list(predictors)}; need {MIN_TRAINING_ROWS}"
        )
    kind = panel.kinds[trait]
    if kind is TraitKind.POISSON_SHIFT:
        fit = glm.fit_poisson(X, y)
    elif kind is TraitKind.BINARY_THRESHOLD:
        fit = glm.fit_logistic(X, y)
    else:
        fit = glm.fit_ols(X, y)
    return ConditionalModel(trait, kind, tuple(predictors), fit, int(y.size))


def _cell_predictors(observed: np.ndarray, present_other: bool, k: int, sib: int, trait: int,
                     mtype: MissingType, strategy: Strategy) -> tuple[Predictor, ...] | None:
    """Predictor set for one missing cell, or None when the cell cannot be imputed."""
    if not present_other:
        return ((False, 1 - trait),) if k == 2 and observed[sib, 1 - trait] else None
    if mtype is MissingType.T1:
        return ((True, trait),)
    if mtype is MissingType.T2_1:
        return strategy_predictors(strategy, trait)
    if mtype is MissingType.T2_3:
        return ((True, trait),)
    # T2_4: the single observed cell predicts the other three
    s_obs, t_obs = (int(i) for i in np.argwhere(observed)[0])
    return ((s_obs != sib, t_obs),)


def impute(panel: PhenotypePanel, mtype: MissingType, strategy: Strategy | str = "auto",
           models: dict | None = None) -> PhenotypePanel:
    """Fill every missing cell with its fitted conditional mean.

    ``strategy`` matters only for type 2.1; ``"auto"`` picks it from the
    estimated correlations.  If ``models`` is a dict, the fitted
    :class:`ConditionalModel` objects are stored in it keyed by
    ``(trait, predictors)``.
    """
    if panel.k != mtype.n_traits:
        raise ConfigurationError(f"missing type {mtype.value} needs {mtype.n_traits} trait(s), panel has {panel.k}")
    missing = ~panel.observed & panel.present[:, :, None]
    if not missing.any():
        return replace(panel, values=panel.values.copy())
    if isinstance(strategy, str):
        if strategy == "auto":
            strategy = (
                select_strategy(panel.kinds, estimate_correlations(panel))
                if mtype is MissingType.T2_1 else Strategy.USE_SAME
            )
        else:
            strategy = Strategy.parse(strategy)

    groups: dict[tuple[int, tuple[Predictor, ...]], list[tuple[int, int]]] = {}
    for f in np.flatnonzero(missing.any(axis=(1, 2))):
        obs = panel.observed[f] & panel.present[f][:, None]
        for s, t in np.argwhere(missing[f]):
            preds = _cell_predictors(obs, bool(panel.present[f, 1 - s]), panel.k, int(s), int(t), mtype, strategy)
            if preds is None:
                continue
            if not all(obs[1 - s if o else s, pt] for o, pt in preds):
                raise ConfigurationError(
                    f"family {f}: mask pattern does not conform to missing type {mtype.value}"
                )
            groups.setdefault((int(t), preds), []).append((int(f), int(s)))

    work = _working_values(panel)
    values = panel.values.copy()
    observed = panel.observed.copy()
    imputed = panel.imputed.copy()
    for (t, preds), cells in groups.items():
        model = fit_conditional_model(panel, t, preds, work)
        if models is not None:
            models[(t, preds)] = model
        fam = np.array([c[0] for c in cells])
        sib = np.array([c[1] for c in cells])
        design, _ = _gather(work, np.ones_like(observed), fam, sib, preds)
        values[fam, sib, t] = model.predict(design)
        observed[fam, sib, t] = True
        imputed[fam, sib, t] = True
    return replace(panel, values=values, observed=observed, imputed=imputed)
