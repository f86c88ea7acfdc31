import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import normloc as nl
from helpers import dense_norm, naive_compression_norm


def test_compression_blocks_are_subreads(c6):
    a = nl.random_banded(c6, 1, seed=1)
    comp = nl.compress(a, 1)
    block = comp.block(0)
    points = nl.ball(c6, 0, 1)
    assert np.array_equal(block, a.to_dense()[np.ix_(points, points)])


def test_compression_norm_matches_naive_oracle(c60):
    for seed in range(5):
        a = nl.random_banded(c60, 1, seed=seed)
        for radius in (1, 3):
            assert (
                abs(nl.compress(a, radius).norm() - naive_compression_norm(a, radius))
                < 1e-12
            )


def test_compression_known_values(c6):
    adj = nl.adjacency(c6)
    # window of radius 1 sees a path on 3 vertices, radius 2 a path on 5
    assert abs(nl.compress(adj, 1).norm() - math.sqrt(2)) < 1e-12
    assert abs(nl.compress(adj, 2).norm() - 2 * math.cos(math.pi / 6)) < 1e-12


def test_compression_multislot(c6):
    a = nl.random_banded(c6, 1, seed=8, m=2)
    comp = nl.compress(a, 1)
    assert comp.block(2).shape == (6, 6)
    assert abs(comp.norm() - naive_compression_norm(a, 1)) < 1e-12


def test_compress_zero_and_is_zero(c6):
    z = nl.BandedOperator(c6, 1, np.zeros((6, 6)))
    comp = nl.compress(z, 1)
    assert comp.norm() == 0.0
    assert comp.is_zero()
    with pytest.raises(nl.InvalidParams):
        nl.compress(nl.adjacency(c6), -1)


def test_best_localized_vector_properties(c60):
    a = nl.random_banded(c60, 1, seed=3)
    witness = nl.best_localized_vector(a, 2)
    inside = np.zeros(60, dtype=bool)
    inside[witness.points] = True
    support = nl.vector_point_support(witness.vector, 1)
    assert inside[support].all()
    assert abs(np.linalg.norm(witness.vector) - 1) < 1e-12
    achieved = np.linalg.norm(a.apply(witness.vector))
    assert abs(achieved - witness.column_norm) < 1e-10
    assert witness.column_norm <= nl.operator_norm(a) + 1e-10


def test_best_localized_vector_tie_breaks_to_smallest_center(c6):
    one = nl.identity(c6)
    witness = nl.best_localized_vector(one, 1)
    assert witness.center == 0


def test_best_localized_vector_zero_operator(c6):
    z = nl.BandedOperator(c6, 1, np.zeros((6, 6)))
    with pytest.raises(nl.ZeroOperator):
        nl.best_localized_vector(z, 1)


def test_localization_report_chain_and_csv(c60):
    a = nl.random_banded(c60, 1, seed=12)
    rep = nl.localization_report(a, 2)
    assert rep.propagation == 1
    assert rep.chain_ok
    assert rep.sigma_sq <= rep.sigma_col + 1e-10
    assert rep.sigma_col <= rep.sigma_sq_wide + 1e-10
    row = rep.csv_row()
    assert row[0] == "cycle_60"
    assert row[2] == 1 and row[3] == 2
    assert len(row) == len(nl.localization.CSV_HEADER)
    with pytest.raises(nl.ZeroOperator):
        nl.localization_report(
            nl.BandedOperator(c60, 1, np.zeros((60, 60))), 1
        )


def test_localization_report_json_fields(c6):
    rep = nl.localization_report(nl.adjacency(c6), 1)
    doc = rep.to_json()
    assert doc["space"] == "cycle_6"
    assert abs(doc["sigma_sq"] - math.sqrt(2) / 2) < 1e-12
    assert abs(doc["sigma_col"] - math.sqrt(3) / 2) < 1e-12


@settings(max_examples=25, deadline=None)
@given(
    st.integers(min_value=0, max_value=2**32 - 1),
    st.sampled_from([1, 2, 5]),
)
def test_chain_inequalities_hold_on_random_operators(seed, radius):
    c20 = nl.generate_family("cycle", {"n": 20})
    a = nl.random_banded(c20, 1, seed=seed)
    rep = nl.localization_report(a, radius)
    assert rep.chain_ok, rep.chain_slack


def test_power_witness_guarantees(c60):
    for seed in (0, 5, 17):
        a = nl.random_banded(c60, 1, seed=seed)
        for power in (1, 2, 3):
            w = nl.power_trick_witness(a, 5, power)
            assert w.measured_ratio >= w.threshold - 1e-10
            assert abs(np.linalg.norm(w.vector) - 1) < 1e-12
            # ratios telescope to the localized contraction of the power
            assert abs(np.prod(w.ratios) - w.contraction) < 1e-9
            assert 0 <= w.stage < power
            assert w.within_proved_bound


def test_power_witness_support_inclusion(c60):
    # the witness support provably sits in a ball around the seed center
    a = nl.random_banded(c60, 1, seed=23)
    w = nl.power_trick_witness(a, 5, 4)
    dist_to_center = c60.dist[w.center, list(w.support_points)]
    assert (dist_to_center <= w.support_radius_bound).all()
    assert w.support_diameter <= w.diameter_bound_proved


def test_power_witness_errors(c6):
    z = nl.BandedOperator(c6, 1, np.zeros((6, 6)))
    with pytest.raises(nl.ZeroOperator):
        nl.power_trick_witness(z, 1, 1)
    with pytest.raises(nl.InvalidParams):
        nl.power_trick_witness(nl.adjacency(c6), 1, 0)


def test_amplification_reduction_preserves_top_pair(c6):
    a = nl.random_banded(c6, 1, seed=6, m=3)
    red = nl.vector_amplification_reduction(a)
    assert red.compressed.m == 1
    assert abs(red.input_norm - dense_norm(a.to_dense())) < 1e-12
    assert red.achieved_fraction >= 1 - 1e-10
    assert red.compressed_norm <= red.input_norm + 1e-10
    # fibers are unit vectors
    assert np.abs(np.linalg.norm(red.v_fibers, axis=1) - 1).max() < 1e-12
    assert np.abs(np.linalg.norm(red.w_fibers, axis=1) - 1).max() < 1e-12


def test_amplification_reduction_shrinks_compressions(c6):
    a = nl.random_banded(c6, 1, seed=15, m=2)
    red = nl.vector_amplification_reduction(a)
    for radius in (1, 2):
        assert (
            nl.compress(red.compressed, radius).norm()
            <= nl.compress(a, radius).norm() + 1e-10
        )


def test_amplification_reduction_scalar_input(c6):
    a = nl.random_banded(c6, 1, seed=2)
    red = nl.vector_amplification_reduction(a)
    assert abs(red.compressed_norm - red.input_norm) < 1e-10
    with pytest.raises(nl.ZeroOperator):
        nl.vector_amplification_reduction(
            nl.BandedOperator(c6, 1, np.zeros((6, 6)))
        )


def test_weighted_reduction_norm_invariance(c6):
    a = nl.random_banded(c6, 1, seed=9)
    flat = nl.weighted_reduction(a, np.ones(6))
    assert abs(nl.operator_norm(flat) - nl.operator_norm(a)) < 1e-12
    assert flat.space.n == 6


def test_weighted_reduction_drops_zero_mass(c6):
    a = nl.random_banded(c6, 1, seed=9)
    weights = np.array([1.0, 2.0, 0.0, 1.0, 0.5, 0.0])
    flat = nl.weighted_reduction(a, weights)
    assert flat.space.n == 4
    # conjugation by the square-root weights on the kept points
    keep = np.flatnonzero(weights > 0)
    s = np.sqrt(weights[keep])
    expected = (s[:, None] * a.to_dense()[np.ix_(keep, keep)]) / s[None, :]
    assert np.abs(flat.to_dense() - expected).max() < 1e-14


def test_weighted_reduction_errors(c6):
    a = nl.adjacency(c6)
    with pytest.raises(nl.AllWeightsZero):
        nl.weighted_reduction(a, np.zeros(6))
    with pytest.raises(nl.InvalidParams):
        nl.weighted_reduction(a, -np.ones(6))
    with pytest.raises(nl.InvalidParams):
        nl.weighted_reduction(a, np.ones(5))


def test_onl_profile_deterministic(c6):
    kwargs = dict(samples=6, seed=42, search_budget=30)
    p1 = nl.onl_profile(c6, 1, 2, **kwargs)
    p2 = nl.onl_profile(c6, 1, 2, **kwargs)
    assert p1.to_json() == p2.to_json()
    assert p1.worst_ratio <= min(r.sigma_sq for r in p1.sample_reports)


def test_onl_profile_radii_validation(c6):
    with pytest.raises(nl.InvalidRadii):
        nl.onl_profile(c6, 2, 1, samples=2, seed=0)
    with pytest.raises(nl.InvalidRadii):
        nl.onl_profile(c6, 0, 1, samples=2, seed=0)


def test_onl_profile_with_certificate_floor(c6):
    cert = nl.subset_to_vector(nl.ball_certificate(c6, 2))
    prof = nl.onl_profile(
        c6, 1, 2, samples=5, seed=3, search_budget=20, certificate=cert
    )
    assert prof.certified_lower_bound is not None
    assert prof.consistent
    assert prof.worst_ratio + 1e-9 >= prof.certified_lower_bound
    wrong = nl.subset_to_vector(nl.ball_certificate(c6, 1))
    with pytest.raises(nl.InvalidParams):
        nl.onl_profile(c6, 1, 2, samples=2, seed=0, certificate=wrong)


def test_onl_profile_probes(c6):
    prof = nl.onl_profile(
        c6,
        1,
        2,
        samples=3,
        seed=1,
        search_budget=0,
        probes=(("adjacency", nl.adjacency(c6)),),
    )
    assert prof.probe_reports[0][0] == "adjacency"
    assert abs(prof.probe_reports[0][1].sigma_sq - math.sqrt(3) / 2) < 1e-12
