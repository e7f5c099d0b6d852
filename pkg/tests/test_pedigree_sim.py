import numpy as np
import pytest
from scipy import stats

from oracles import exact_transmission_moments
from qtdt.errors import MendelianInconsistencyError
from qtdt.genetics_core import HAPLOTYPE_ORDER, Haplotype, LocusParams, haplotype_distribution
from qtdt.pedigree_sim import (
    ParentGenotype,
    derive_z,
    is_informative,
    sample_informative_parents,
    sample_parent,
    simulate_families,
    transmit_haplotype,
)

P = ParentGenotype.parse


def test_degenerate_distribution_parent(rng):
    dist = type(haplotype_distribution(0.1, 0.1, 0.0))(1.0, 0.0, 0.0, 0.0)
    for _ in range(20):
        assert sample_parent(dist, rng) == P("M2D2/M2D2")


def test_two_point_distribution_parent(rng):
    dist = haplotype_distribution(0.5, 0.5, 0.25)  # (.5, 0, 0, .5)
    np.testing.assert_allclose(dist.as_array(), [0.5, 0, 0, 0.5])
    draws = [sample_parent(dist, rng) for _ in range(20000)]
    mixed = np.mean([{str(p.hap_a), str(p.hap_b)} == {"M2D2", "M1D1"} for p in draws])
    assert mixed == pytest.approx(0.5, abs=0.015)


def test_parent_haplotype_frequencies(rng):
    dist = haplotype_distribution(0.2, 0.5, 0.05)
    draws = [sample_parent(dist, rng) for _ in range(50000)]
    counts = np.zeros(4)
    for p in draws:
        counts[HAPLOTYPE_ORDER.index(p.hap_a)] += 1
        counts[HAPLOTYPE_ORDER.index(p.hap_b)] += 1
    np.testing.assert_allclose(counts / counts.sum(), dist.as_array(), atol=0.01)


@pytest.mark.parametrize(
    "parents, expected",
    [
        (("M1D1/M1D1", "M1D2/M1D1"), False),
        (("M1D1/M2D1", "M1D1/M1D1"), True),
        (("M2D2/M1D2", "M2D1/M1D1"), True),
    ],
)
def test_is_informative(parents, expected):
    assert is_informative([P(p) for p in parents]) is expected


def test_transmit_double_homozygote(rng):
    for _ in range(50):
        assert transmit_haplotype(P("M1D1/M1D1"), 0.3, rng) == Haplotype(0, 0)


def test_transmit_no_recombination(rng):
    parent = P("M2D2/M1D1")
    draws = [str(transmit_haplotype(parent, 0.0, rng)) for _ in range(100000)]
    assert set(draws) == {"M2D2", "M1D1"}
    assert draws.count("M2D2") / len(draws) == pytest.approx(0.5, abs=0.01)


def test_transmit_recombination_rate():
    # array simulator, 10^6 gametes from M2D2/M1D1 parents
    from qtdt.pedigree_sim import transmit_array

    rng = np.random.default_rng(7)
    n = 250000
    code = {str(h): i for i, h in enumerate(HAPLOTYPE_ORDER)}
    parents = np.empty((n, 2, 2), dtype=np.int8)
    parents[:, :, 0] = code["M2D2"]
    parents[:, :, 1] = code["M1D1"]
    kids = transmit_array(parents, 0.01, rng).ravel()
    recomb = np.isin(kids, [code["M2D1"], code["M1D2"]]).mean()
    assert kids.size == 10**6
    assert recomb == pytest.approx(0.01, abs=0.002)


def test_transmit_single_locus_het(rng):
    parent = P("M2D1/M1D1")
    draws = [str(transmit_haplotype(parent, 0.5, rng)) for _ in range(20000)]
    assert set(draws) == {"M2D1", "M1D1"}
    assert draws.count("M2D1") / len(draws) == pytest.approx(0.5, abs=0.015)


@pytest.mark.parametrize(
    "parents, child, expected",
    [(("M1M2", "M1M1"), "M1M2", 1), (("M1M2", "M2M2"), "M1M2", 0), (("M1M2", "M1M2"), "M2M2", 1),
     (("M1M2", "M1M2"), "M1M1", 0), (("M2M2", "M1M2"), "M1M2", 0)],
)
def test_derive_z_table(parents, child, expected, rng):
    assert derive_z(parents, child, rng) == expected


def test_derive_z_random_when_all_het(rng):
    zs = [derive_z(("M1M2", "M1M2"), "M1M2", rng) for _ in range(4000)]
    assert np.mean(zs) == pytest.approx(0.5, abs=0.03)


def test_derive_z_mendelian_error(rng):
    with pytest.raises(MendelianInconsistencyError):
        derive_z(("M1M1", "M1M2"), "M2M2", rng)
    with pytest.raises(ValueError, match="non-informative"):
        derive_z(("M1M1", "M2M2"), "M1M2", rng)


def test_panel_structure(rng):
    panel = simulate_families(300, LocusParams(0.2, 0.3, 0.5), rng)
    assert len(panel) == 300
    assert panel.z.shape == (300, 2) and set(np.unique(panel.z)) <= {0, 1}
    assert np.all((panel.parent_marker_counts == 1).any(axis=1))
    fam = panel.family(0)
    for s, kid in enumerate(fam.sibs):
        assert kid.x == panel.x[0, s]
        assert kid.z is not None
    # x is the D2 count of the received haplotypes; z matches the scalar rule
    for i in range(50):
        f = panel.family(i)
        pm = [p.marker_count for p in f.parents]
        for kid in f.sibs:
            if sum(kid.marker_genotype) != 1 or pm != [1, 1]:
                assert derive_z(pm, kid.marker_genotype, rng) == kid.z


def test_null_z_mean(rng):
    zs = [simulate_families(500, LocusParams(0.2, 0.5, 0.0), rng).z for _ in range(2)]
    assert np.concatenate(zs).mean() == pytest.approx(0.5, abs=0.04)


def test_null_z_independent_of_x():
    rng = np.random.default_rng(3)
    panel = simulate_families(50000, LocusParams(0.3, 0.4, 0.0), rng)
    table = np.zeros((2, 3))
    np.add.at(table, (panel.z.ravel(), panel.x.ravel()), 1)
    assert stats.chi2_contingency(table)[1] > 0.001


def test_hwe_under_null():
    rng = np.random.default_rng(4)
    d = 0.2
    panel = simulate_families(50000, LocusParams(d, 0.5, 0.0), rng)
    freqs = np.bincount(panel.x.ravel(), minlength=3) / panel.x.size
    np.testing.assert_allclose(freqs, stats.binom.pmf([0, 1, 2], 2, d), atol=0.005)


def test_perfect_ld_z_predicts_x():
    rng = np.random.default_rng(5)
    pvals = []
    for _ in range(3):
        panel = simulate_families(500, LocusParams(0.3, 0.3, 1.0, 0.0), rng)
        x, z = panel.x.ravel(), panel.z.ravel()
        pvals.append(stats.mannwhitneyu(x[z == 1], x[z == 0], alternative="greater").pvalue)
    assert stats.combine_pvalues(pvals).pvalue < 0.01


@pytest.mark.parametrize("d, m, ds", [(0.1, 0.5, 1.0), (0.1, 0.1, 0.33), (0.3, 0.5, 0.67)])
def test_transmission_covariance_matches_enumeration(d, m, ds):
    params = LocusParams(d, m, ds, 0.01)
    ez, ex, cov = exact_transmission_moments(d, m, params.delta, 0.01)
    panel = simulate_families(100000, params, np.random.default_rng(6))
    z, x = panel.z.ravel().astype(float), panel.x.ravel().astype(float)
    assert z.mean() == pytest.approx(ez, abs=0.005)
    assert x.mean() == pytest.approx(ex, abs=0.01)
    assert np.cov(z, x)[0, 1] == pytest.approx(cov, abs=0.004)


def test_rejection_keeps_conditional_law():
    dist = haplotype_distribution(0.2, 0.3, 0.03)
    p = dist.as_array()
    parents = sample_informative_parents(100000, dist, np.random.default_rng(8))
    # analytic frequency of a haplotype in one slot given the pair is informative
    marker = np.array([1, 0, 1, 0])
    m = p[marker == 1].sum()
    hom = m**2 + (1 - m) ** 2
    informative = 1 - hom**2
    expected = np.empty(4)
    for h in range(4):
        # P(slot = h and pair informative) = p_h * (1 - P(pair non-informative | slot = h))
        same_parent_hom = p[marker == marker[h]].sum()  # other slot of same parent matches marker
        expected[h] = p[h] * (1 - same_parent_hom * hom) / informative
    observed = np.bincount(parents[:, 0, 0], minlength=4) / parents.shape[0]
    np.testing.assert_allclose(observed, expected, atol=0.01)


def test_reproducible_with_same_seed():
    a = simulate_families(200, LocusParams(0.1, 0.5, 0.5), np.random.default_rng(9))
    b = simulate_families(200, LocusParams(0.1, 0.5, 0.5), np.random.default_rng(9))
    assert np.array_equal(a.parent_haps, b.parent_haps) and np.array_equal(a.z, b.z)
