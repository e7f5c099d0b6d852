"""Monte Carlo power studies comparing complete, imputed and complete-case data.

Every replicate simulates one panel and analyses it three ways, so the
variants are paired.  The random stream of a replicate is derived from
``(master_seed, delta index, replicate index)`` only; results therefore do
not depend on how replicates are scheduled across workers.
"""

from __future__ import annotations

import enum
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .association_test import TestInput, multivariate_tdt
from .errors import QTDTError
from .imputation import Strategy, estimate_correlations, impute, select_strategy
from .missingness import MissingType, PhenotypePanel, Transmissions, apply_missingness, deleted_panel
from .pedigree_sim import simulate_families
from .scenario import Scenario
from .trait_models import generate_panel_traits, p_star_oracle

log = logging.getLogger(__name__)


class Variant(enum.IntEnum):
    NO_MISSING = 0
    IMPUTED = 1
    DELETED = 2

    @property
    def label(self) -> str:
        return self.name.lower()


# green / blue / red
VARIANT_COLOURS = {Variant.NO_MISSING: "#2ca02c", Variant.IMPUTED: "#1f77b4", Variant.DELETED: "#d62728"}


def replicate_rng(master_seed: int, delta_index: int, rep_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(delta_index), int(rep_index)))
    return np.random.Generator(np.random.PCG64(seq))


@dataclass
class ReplicateOutcome:
    p_values: np.ndarray  # (3,), NaN where the analysis failed
    lrt: np.ndarray
    converged: np.ndarray
    errors: list[str] = field(default_factory=list)
    strategy: str = ""
    rho: tuple[float, float] = (math.nan, math.nan)

    def decisions(self, alpha: float) -> tuple[bool | None, ...]:
        return tuple(None if np.isnan(p) else bool(p < alpha) for p in self.p_values)


def run_replicate(scenario: Scenario, delta_index: int, rep_index: int) -> ReplicateOutcome:
    rng = replicate_rng(scenario.master_seed, delta_index, rep_index)
    families = simulate_families(scenario.n_families, scenario.locus(scenario.delta_stars[delta_index]), rng)
    values = generate_panel_traits(scenario.traits, families.x, rng, scenario.residual_corr())
    full = PhenotypePanel.complete(values, scenario.kinds, families.z)
    masked = apply_missingness(full, scenario.missing_type, scenario.miss_p, rng)

    p = np.full(3, np.nan)
    lrt = np.full(3, np.nan)
    conv = np.zeros(3, dtype=bool)
    errors: list[str] = []
    strategy = scenario.strategy
    rho = (math.nan, math.nan)
    if full.k == 2:
        corr = estimate_correlations(full)
        rho = (corr.rho1, corr.rho2)

    def analyse(variant: Variant, build) -> None:
        try:
            data = build()
            res = multivariate_tdt(TestInput(data.z, data.y, scenario.centering))
        except (QTDTError, np.linalg.LinAlgError) as exc:
            errors.append(f"{variant.label}: {exc}")
            return
        p[variant], lrt[variant], conv[variant] = res.p_value, res.lrt, res.converged

    analyse(Variant.NO_MISSING, full.transmissions)
    if scenario.missing_type is MissingType.T2_1 and strategy == "auto":
        try:
            strategy = select_strategy(scenario.kinds, estimate_correlations(masked))
        except QTDTError as exc:
            errors.append(f"strategy: {exc}")
    analyse(Variant.IMPUTED, lambda: impute(masked, scenario.missing_type, strategy).transmissions())
    analyse(Variant.DELETED, lambda: deleted_panel(masked, scenario.deletion))
    return ReplicateOutcome(p, lrt, conv, errors, strategy if isinstance(strategy, str) else strategy.value, rho)


@dataclass
class ScenarioRun:
    """Per-replicate results, arrays indexed [delta, replicate, variant]."""

    scenario: Scenario
    p_values: np.ndarray
    lrt: np.ndarray
    converged: np.ndarray
    rho: np.ndarray  # [delta, replicate, (rho1, rho2)]
    errors: list[tuple[int, int, str]]

    @property
    def decisions(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return self.p_values < self.scenario.alpha

    def power(self, delta_index: int, variant: Variant) -> float:
        return float(self.decisions[delta_index, :, variant].mean())

    def paired_difference(self, delta_index: int, a: Variant, b: Variant) -> tuple[float, float]:
        """Mean of the paired decision difference a - b and its standard error."""
        diff = self.decisions[delta_index, :, a].astype(float) - self.decisions[delta_index, :, b]
        r = diff.size
        se = float(diff.std(ddof=1) / math.sqrt(r)) if r > 1 else math.nan
        return float(diff.mean()), se


def _run_chunk(args: tuple[Scenario, int, int, int]) -> list[tuple[int, int, ReplicateOutcome]]:
    scenario, di, start, stop = args
    return [(di, r, run_replicate(scenario, di, r)) for r in range(start, stop)]


def _chunks(scenario: Scenario, deltas: Sequence[int], size: int) -> Iterable[tuple[Scenario, int, int, int]]:
    for di in deltas:
        for start in range(0, scenario.replications, size):
            yield scenario, di, start, min(start + size, scenario.replications)


def simulate_scenario(scenario: Scenario, threads: int = 1, progress=None) -> ScenarioRun:
    n_d, reps = len(scenario.delta_stars), scenario.replications
    p = np.full((n_d, reps, 3), np.nan)
    lrt = np.full((n_d, reps, 3), np.nan)
    conv = np.zeros((n_d, reps, 3), dtype=bool)
    rho = np.full((n_d, reps, 2), np.nan)
    errors: list[tuple[int, int, str]] = []

    def collect(batch) -> None:
        for di, r, out in batch:
            p[di, r], lrt[di, r], conv[di, r], rho[di, r] = out.p_values, out.lrt, out.converged, out.rho
            errors.extend((di, r, e) for e in out.errors)
        if progress is not None:
            progress(len(batch))

    jobs = list(_chunks(scenario, range(n_d), 25))
    if threads <= 1:
        for job in jobs:
            collect(_run_chunk(job))
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            for batch in pool.map(_run_chunk, jobs):
                collect(batch)
    errors.sort()
    return ScenarioRun(scenario, p, lrt, conv, rho, errors)


@dataclass(frozen=True)
class PowerRow:
    delta_star: float
    variant: Variant
    power: float
    monte_carlo_se: float
    replications: int
    errors: int = 0
    nonconverged: int = 0


def summarize(run: ScenarioRun) -> list[PowerRow]:
    reps = run.scenario.replications
    rows = []
    dec = run.decisions
    failed = np.isnan(run.p_values)
    for di, ds in enumerate(run.scenario.delta_stars):
        for v in Variant:
            power = float(dec[di, :, v].mean())
            rows.append(PowerRow(
                ds, v, power, math.sqrt(power * (1 - power) / reps), reps,
                int(failed[di, :, v].sum()), int((~run.converged[di, :, v] & ~failed[di, :, v]).sum()),
            ))
    rows.sort(key=lambda r: (r.delta_star, r.variant))
    return rows


def run_scenario(scenario: Scenario, threads: int = 1) -> list[PowerRow]:
    return summarize(simulate_scenario(scenario, threads))


CSV_HEADER = "delta_star,variant,power,mc_se,replications"


def format_csv(rows: Sequence[PowerRow]) -> str:
    lines = [CSV_HEADER]
    for r in sorted(rows, key=lambda r: (r.delta_star, r.variant)):
        lines.append(f"{r.delta_star:g},{r.variant.label},{r.power:.6f},{r.monte_carlo_se:.6f},{r.replications}")
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def write_results(rows: Sequence[PowerRow], path: str | Path, svg: bool = False, title: str = "") -> Path:
    path = Path(path)
    _write(path, format_csv(rows))
    if svg:
        _write(path.with_suffix(".svg"), render_svg(rows, title or path.stem))
    return path


def render_svg(rows: Sequence[PowerRow], title: str = "") -> str:
    width, height, pad = 480, 320, 48
    deltas = sorted({r.delta_star for r in rows}) or [0.0, 1.0]
    lo, hi = min(deltas), max(deltas)
    span = (hi - lo) or 1.0

    def px(ds: float) -> float:
        return pad + (ds - lo) / span * (width - 2 * pad)

    def py(power: float) -> float:
        return height - pad - power * (height - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">delta*</text>',
        f'<text x="14" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {height / 2:.1f})">power</text>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(f'<text x="{pad - 6}" y="{py(tick) + 4:.1f}" text-anchor="end" font-size="10">{tick:g}</text>')
    for ds in deltas:
        parts.append(f'<text x="{px(ds):.1f}" y="{height - pad + 14}" text-anchor="middle" font-size="10">{ds:g}</text>')
    for i, v in enumerate(Variant):
        pts = sorted((r.delta_star, r.power) for r in rows if r.variant is v)
        if not pts:
            continue
        coords = " ".join(f"{px(ds):.1f},{py(pw):.1f}" for ds, pw in pts)
        colour = VARIANT_COLOURS[v]
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{coords}"/>')
        parts.append(
            f'<text x="{pad + 8}" y="{pad + 14 * i}" font-size="11" fill="{colour}">{v.label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def manifest_text(run: ScenarioRun) -> str:
    from . import __version__

    s = run.scenario
    lines = [f"# qtdt {__version__} run manifest", s.to_text().rstrip("\n")]
    for j, t in enumerate(s.traits):
        lines.append(f"trait{j + 1}_p_star_exact = {p_star_oracle(t, s.d)!r}")
    lines.append(f"analysis_errors = {len(run.errors)}")
    for di, r, msg in run.errors:
        lines.append(f"error = delta_index {di}, replicate {r}: {msg}")
    return "\n".join(lines) + "\n"


def write_run(run: ScenarioRun, out_dir: str | Path, svg: bool = False) -> dict[str, Path]:
    out_dir = Path(out_dir)
    name = run.scenario.name
    paths = {"csv": write_results(summarize(run), out_dir / f"{name}.csv", svg=svg, title=name)}
    if svg:
        paths["svg"] = out_dir / f"{name}.svg"
    paths["manifest"] = _write(out_dir / f"{name}.manifest.txt", manifest_text(run))
    return paths


@dataclass(frozen=True)
class StrategyRow:
    strategy: Strategy
    delta_star: float
    power: float


def compare_strategies(scenario: Scenario, threads: int = 1) -> tuple[list[StrategyRow], tuple[float, float]]:
    """Imputed-data power under each fixed strategy on identical panels.

    Also returns the mean estimated (rho1, rho2) of the complete panels.
    """
    rows = []
    rho = (math.nan, math.nan)
    for strategy in Strategy:
        run = simulate_scenario(replace(scenario, strategy=strategy), threads)
        for di, ds in enumerate(scenario.delta_stars):
            rows.append(StrategyRow(strategy, ds, run.power(di, Variant.IMPUTED)))
        rho = tuple(float(x) for x in np.nanmean(run.rho.reshape(-1, 2), axis=0))  # type: ignore[assignment]
    return rows, rho


def default_threads() -> int:
    return max(1, min(os.cpu_count() or 1, 8))
