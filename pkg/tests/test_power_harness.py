import math
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from oracles import exact_transmission_moments
from qtdt.cli import main
from qtdt.errors import ConfigurationError
from qtdt.imputation import Strategy
from qtdt.missingness import MissingType
from qtdt.power_harness import (
    CSV_HEADER,
    PowerRow,
    Variant,
    format_csv,
    manifest_text,
    render_svg,
    replicate_rng,
    run_replicate,
    simulate_scenario,
    summarize,
    write_results,
    write_run,
)
from qtdt.scenario import Scenario, load_scenario, parse_scenario
from qtdt.trait_models import TraitKind, calibrated_spec

SCENARIOS = Path(__file__).parent.parent / "scenarios"
N = TraitKind.NORMAL


def normal_t1(**kw):
    base = dict(traits=(calibrated_spec(N, 5, 1, 0.1, 0.1),), d=0.1, m=0.5, n_families=500,
                missing_type=MissingType.T1, miss_p=0.3, replications=20, master_seed=3)
    return Scenario(**(base | kw))


# ---------------------------------------------------------------- scenario files

def test_scenario_files_parse():
    for path in sorted(SCENARIOS.glob("*.txt")):
        sc = load_scenario(path)
        assert sc.name == path.stem
        assert parse_scenario(sc.to_text()) == sc


def test_parse_minimal_and_defaults():
    sc = parse_scenario("trait_kind = normal\ntrait_p_star = 0.1\n")
    assert sc.delta_stars == (0.0, 0.33, 0.67, 1.0)
    assert sc.traits[0].residual == pytest.approx(1.62)
    assert sc.theta == 0.01 and sc.n_families == 500 and sc.replications == 1000


@pytest.mark.parametrize(
    "text, match",
    [
        ("trait_kind = normal\ntrait_p_star = .1\nbogus = 1", "unknown key"),
        ("trait_kind = normal\ntrait_p_star = .1\nd = .1\nd = .2", "duplicate"),
        ("trait_kind = normal", "trait_residual or trait_p_star"),
        ("trait_kind = binary\ntrait_residual = .6", "threshold"),
        ("trait_kind = normal\ntrait_p_star = .1\nmissing_type = 2.1", "needs 2 trait"),
        ("trait_kind = normal\ntrait_p_star = .1\nmissing_type = 2.2", "2.2"),
        ("trait_kind = normal\ntrait_p_star = .1\nreplications = 0", "replications"),
        ("trait_kind = normal\ntrait_p_star = .1\nalpha = 1", "alpha"),
        ("trait_kind = normal, normal\ntrait_p_star = .1\nmissing_type = 2.1\n"
         "target_rho1 = .3\nresidual_cross_trait = .1", "not both"),
        ("trait_kind = normal\ntrait_p_star = x", "not a number"),
        ("trait_kind normal", "key = value"),
    ],
)
def test_parse_errors(text, match):
    with pytest.raises(ConfigurationError, match=match):
        parse_scenario(text)


def test_target_rho_keys_resolve():
    sc = load_scenario(SCENARIOS / "normal_normal_t21.txt")
    assert sc.residual_corr() is not None
    assert -1 < sc.residual_cross_trait < 1 and len(sc.residual_cross_sib) == 2


def test_fixed_strategy_parsed():
    sc = parse_scenario("trait_kind = normal, normal\ntrait_p_star = .1, .2\nmissing_type = 2.1\nstrategy = use_same")
    assert sc.strategy is Strategy.USE_SAME


# ---------------------------------------------------------------- replicates

def test_replicate_rng_streams():
    a = replicate_rng(7, 1, 2).random(3)
    np.testing.assert_array_equal(a, replicate_rng(7, 1, 2).random(3))
    assert not np.array_equal(a, replicate_rng(7, 2, 1).random(3))
    assert not np.array_equal(a, replicate_rng(8, 1, 2).random(3))


def test_zero_missing_variants_coincide():
    sc = normal_t1(miss_p=0.0, delta_stars=(0.0, 1.0))
    for di in range(2):
        for r in range(5):
            out = run_replicate(sc, di, r)
            assert out.p_values[0] == out.p_values[1] == out.p_values[2]
            assert len(set(out.decisions(0.05))) == 1


def test_replicate_is_deterministic():
    sc = normal_t1()
    a, b = run_replicate(sc, 2, 4), run_replicate(sc, 2, 4)
    np.testing.assert_array_equal(a.p_values, b.p_values)


def test_two_trait_replicate_records_strategy():
    sc = load_scenario(SCENARIOS / "normal_normal_t21.txt")
    out = run_replicate(replace(sc, replications=1), 0, 0)
    assert out.strategy == "use_other"
    assert all(np.isfinite(out.p_values)) and not out.errors


def test_failed_analysis_counted_as_error():
    # two families cannot support imputation or a test: errors are recorded, not raised
    sc = normal_t1(n_families=2, replications=2, delta_stars=(0.0,))
    run = simulate_scenario(sc)
    assert run.errors
    rows = summarize(run)
    assert all(r.errors == 2 for r in rows)
    assert all(r.power == 0.0 for r in rows)


# ---------------------------------------------------------------- output

def make_rows():
    return [PowerRow(ds, v, p, math.sqrt(p * (1 - p) / 1000), 1000)
            for ds, p in zip((0.0, 0.33, 0.67, 1.0), (0.05, 0.3, 0.7, 0.95)) for v in Variant]


def test_empty_rows_header_only(tmp_path):
    path = write_results([], tmp_path / "out.csv")
    assert path.read_text() == CSV_HEADER + "\n"


def test_twelve_rows_thirteen_lines(tmp_path):
    text = write_results(make_rows(), tmp_path / "out.csv").read_text()
    lines = text.splitlines()
    assert len(lines) == 13
    assert lines[0] == "delta_star,variant,power,mc_se,replications"
    assert lines[1].startswith("0,no_missing,0.050000,")


def test_csv_order_is_canonical():
    rows = make_rows()
    assert format_csv(rows[::-1]) == format_csv(rows)


def test_svg_colours(tmp_path):
    write_results(make_rows(), tmp_path / "curve.csv", svg=True)
    svg = (tmp_path / "curve.svg").read_text()
    assert svg.count("<polyline") == 3
    for colour in ("#2ca02c", "#1f77b4", "#d62728"):
        assert colour in svg
    assert render_svg([]).startswith("<svg")


def test_write_error_has_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        write_results([], blocker / "out.csv")


@settings(max_examples=50)
@given(st.floats(0, 1), st.integers(1, 5000))
def test_power_row_se(power, reps):
    hits = round(power * reps)
    p = hits / reps
    row = PowerRow(0.0, Variant.IMPUTED, p, math.sqrt(p * (1 - p) / reps), reps)
    assert 0 <= row.power <= 1
    assert row.monte_carlo_se == pytest.approx(math.sqrt(row.power * (1 - row.power) / reps))


def test_rerun_byte_identical(tmp_path):
    sc = normal_t1(replications=30)
    a = write_run(simulate_scenario(sc), tmp_path / "a")
    b = write_run(simulate_scenario(sc), tmp_path / "b", svg=True)
    assert a["csv"].read_bytes() == b["csv"].read_bytes()
    assert b["svg"].exists()
    text = a["manifest"].read_text()
    assert "seed = 3" in text
    exact = [l for l in text.splitlines() if l.startswith("trait1_p_star_exact")]
    assert float(exact[0].split("=")[1]) == pytest.approx(0.1, abs=1e-12)


def test_thread_count_does_not_change_output(tmp_path):
    sc = normal_t1(replications=60, delta_stars=(0.0, 0.67))
    one = summarize(simulate_scenario(sc, threads=1))
    two = summarize(simulate_scenario(sc, threads=2))
    assert format_csv(one) == format_csv(two)


def test_manifest_resolves_parameters():
    run = simulate_scenario(normal_t1(replications=2, delta_stars=(0.0,)))
    text = manifest_text(run)
    resolved = parse_scenario("\n".join(l for l in text.splitlines()
                                        if not l.startswith(("trait1_p_star_exact", "analysis_errors", "error"))))
    assert resolved == run.scenario


# ---------------------------------------------------------------- CLI

def test_cli_run(tmp_path, capsys):
    code = main(["run", "--scenario", str(SCENARIOS / "normal_t1.txt"), "--seed", "5", "--out", str(tmp_path),
                 "--replications", "10", "--svg"])
    assert code == 0
    assert (tmp_path / "normal_t1.csv").read_text().startswith(CSV_HEADER)
    assert (tmp_path / "normal_t1.svg").exists()
    assert "seed = 5" in (tmp_path / "normal_t1.manifest.txt").read_text()
    assert "no_missing" in capsys.readouterr().out


def test_cli_validate(capsys):
    assert main(["validate", "--scenario", str(SCENARIOS / "binary_t1.txt")]) == 0
    out = capsys.readouterr().out
    assert "prevalence=0.306" in out
    assert main(["validate", "--scenario", str(SCENARIOS / "normal_t1.txt")]) == 0
    assert "OK" in capsys.readouterr().out


def test_cli_strategies(tmp_path, capsys):
    code = main(["strategies", "--scenario", str(SCENARIOS / "normal_normal_t21.txt"), "--replications", "4",
                 "--out", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "recommended: use_other" in out
    lines = (tmp_path / "normal_normal_t21.strategies.csv").read_text().splitlines()
    assert lines[0] == "strategy,delta_star,power" and len(lines) == 1 + 3 * 4


def test_cli_errors(tmp_path, capsys):
    assert main(["validate", "--scenario", str(tmp_path / "missing.txt")]) == 2
    assert "error:" in capsys.readouterr().err


# ---------------------------------------------------------------- Monte Carlo checks

@pytest.fixture(scope="module")
def t1_run():
    sc = normal_t1(replications=1000, delta_stars=(0.0, 1.0), master_seed=11)
    return simulate_scenario(sc)


def test_null_decisions_near_level(t1_run):
    for v in Variant:
        assert 0.035 <= t1_run.power(0, v) <= 0.065


def test_information_ordering(t1_run):
    diff, se = t1_run.paired_difference(1, Variant.NO_MISSING, Variant.DELETED)
    assert diff >= -2 * se


def analytic_power(d, m, ds, beta, resid, n_offspring, alpha=0.05):
    """Large-sample power from the score noncentrality with exact transmission moments."""
    delta = ds * min(d * (1 - m), m * (1 - d))
    _, _, cov = exact_transmission_moments(d, m, delta, 0.01)
    ncp = n_offspring * (beta * cov) ** 2 / (0.25 * (2 * d * (1 - d) * beta**2 + resid))
    return stats.ncx2.sf(stats.chi2.ppf(1 - alpha, 1), 1, ncp)


def test_full_ld_power_matches_analytic(t1_run):
    expected = analytic_power(0.1, 0.5, 1.0, 1.0, 1.62, 1000)
    assert expected == pytest.approx(0.637, abs=0.001)
    observed = t1_run.power(1, Variant.NO_MISSING)
    se = math.sqrt(expected * (1 - expected) / 1000)
    assert abs(observed - expected) <= 3 * se + 0.02


@pytest.mark.xfail(strict=True, reason="under this model the full-LD power at m=.5 is about .64, not 1")
def test_full_ld_power_reaches_one(t1_run):
    assert t1_run.power(1, Variant.NO_MISSING) == pytest.approx(1.0, abs=0.01)
