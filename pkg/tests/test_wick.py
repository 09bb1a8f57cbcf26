import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from egren.wick import (
    ContractionGraph,
    Verdict,
    brute_force_pairings,
    classify_interaction,
    critical_power,
    divergence_degree,
    enumerate_saturated_graphs,
    random_connected_multigraph,
    verdict_rank,
    wick_coefficient,
    wick_expand,
)

degree_lists = st.lists(st.integers(0, 3), min_size=1, max_size=4).filter(lambda m: sum(m) <= 8)


def test_two_quadratics_give_one_saturated_graph():
    (g,) = enumerate_saturated_graphs([2, 2])
    assert g.a == ((0, 2), (2, 0))
    assert wick_coefficient(g, [2, 2]) == 2


def test_full_expansion_of_two_quadratics():
    terms = {t.graph.upper(): (t.coefficient, t.residual) for t in wick_expand([2, 2])}
    assert terms == {(0,): (1, (2, 2)), (1,): (4, (1, 1)), (2,): (2, (0, 0))}


@given(degree_lists)
@settings(max_examples=60)
def test_memoized_oracle_matches_naive_enumeration(degrees):
    assert brute_force_pairings(degrees) == oracles.naive_pairings(degrees)


@given(degree_lists)
@settings(max_examples=60)
def test_coefficients_match_pairing_census(degrees):
    census = oracles.naive_pairings(degrees)
    got = {t.graph.upper(): t.coefficient for t in wick_expand(degrees)}
    assert got == census


@given(degree_lists)
@settings(max_examples=60)
def test_saturated_coefficients_sum_to_perfect_pairings(degrees):
    total = sum(wick_coefficient(g, degrees) for g in enumerate_saturated_graphs(degrees))
    assert total == sum(oracles.naive_pairings(degrees, saturated_only=True).values())


def test_single_vertex_has_no_contractions():
    (t,) = wick_expand([4])
    assert t.coefficient == 1 and t.residual == (4,)


def test_coefficient_rejects_overfull_graph():
    with pytest.raises(ValueError):
        wick_coefficient(ContractionGraph([[0, 3], [3, 0]]), [2, 3])


@given(st.integers(2, 6), st.integers(0, 6), st.integers(3, 8), st.integers(0, 10**6))
def test_divergence_degree_identity(n, extra, d, seed):
    g = random_connected_multigraph(random.Random(seed), n, extra)
    assert g.is_connected()
    assert divergence_degree(g, d) == d * g.loops - 2 * g.edge_count


def test_divergence_degree_sums_components():
    g = ContractionGraph([[0, 2, 0, 0], [2, 0, 0, 0], [0, 0, 0, 3], [0, 0, 3, 0]])
    assert divergence_degree(g, 4) == (2 * 2 - 4) + (3 * 2 - 4)


@pytest.mark.parametrize("d,k", [(3, 6), (4, 4), (6, 3)])
def test_critical_powers(d, k):
    assert critical_power(d) == k
    assert classify_interaction(d, k).verdict is Verdict.RENORMALIZABLE
    assert classify_interaction(d, k + 1).verdict is Verdict.NONRENORMALIZABLE
    assert classify_interaction(d, k - 1).verdict is Verdict.SUPERRENORMALIZABLE


def test_phi4_in_four_dimensions_has_constant_divergence():
    rep = classify_interaction(4, 4, n_max=8)
    assert [Fraction(row["rho"]) for row in rep.table] == [4] * 7
    assert [row["n"] for row in rep.table] == list(range(2, 9))


@given(st.integers(3, 8), st.integers(1, 8))
def test_rows_follow_vacuum_superficial_degree(d, k):
    # no external legs: rho(n) = d + n (k (d - 2)/2 - d)
    rep = classify_interaction(d, k, n_max=6)
    assert all(Fraction(r["rho"]) == d + r["n"] * (Fraction(k * (d - 2), 2) - d) for r in rep.table)


@given(st.integers(3, 8), st.integers(1, 9))
def test_classifier_monotone_in_power(d, k):
    assert verdict_rank(classify_interaction(d, k).verdict) <= verdict_rank(classify_interaction(d, k + 1).verdict)


@given(st.integers(1, 12), st.integers(2, 10))
def test_two_dimensions_always_superrenormalizable(k, n_max):
    rep = classify_interaction(2, k, n_max)
    assert rep.verdict is Verdict.SUPERRENORMALIZABLE and rep.threshold is None
    assert all(Fraction(r["rho"]) == -2 * (r["n"] - 1) for r in rep.table)


def test_table_matches_per_order_formula():
    rep = classify_interaction(3, [4, 6], n_max=5)
    for row in rep.table:
        n = row["n"]
        omega = Fraction(6 * (3 - 2), 2) * n
        assert Fraction(row["omega"]) == omega
        assert Fraction(row["rho"]) == omega - 3 * (n - 1)
        rho = omega - 3 * (n - 1)
        codim = 3 * (n - 1)
        expected = math.comb(int(rho) + codim, codim) if rho >= 0 else 0
        assert row["ambiguity_dimension"] == expected


def test_classifier_input_checks():
    with pytest.raises(ValueError):
        classify_interaction(1, 4)
    with pytest.raises(ValueError):
        classify_interaction(4, 0)


def test_lower_order_input_shifts_table_only():
    base = classify_interaction(4, 4, n_max=4)
    shifted = classify_interaction(4, 4, n_max=4, lower_sd=Fraction(1, 2))
    assert shifted.verdict is base.verdict
    for a, b in zip(base.table, shifted.table):
        assert Fraction(b["rho"]) - Fraction(a["rho"]) == Fraction(1, 2)
