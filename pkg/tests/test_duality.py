import math
from fractions import Fraction

import numpy as np
import pytest

import normloc as nl
from helpers import dense_norm


def _ball_cp(space, radius):
    cert = nl.subset_to_vector(nl.ball_certificate(space, radius))
    return cert, nl.SchurCPMap(cert)


def test_phi_agrees_with_schur_multiplication(c60):
    # two independent routes to the same operator: blockwise weighting of
    # the compression vs a direct entrywise product with the Gram table
    cert, cp = _ball_cp(c60, 5)
    a = nl.random_banded(c60, 1, seed=4)
    comp = nl.compress(a, 5)
    routed = nl.phi_apply(cp, comp)
    direct = nl.schur_multiply(a, cert.gram())
    assert np.array_equal(routed.to_dense(), direct.to_dense())
    # and compressing the output recovers the Gram-weighted blocks
    out_comp = nl.compress(routed, 5)
    for x in range(0, 60, 7):
        points = nl.ball(c60, x, 5)
        weighted = cert.gram()[np.ix_(points, points)] * comp.block(x)
        assert np.array_equal(out_comp.block(x), weighted)


def test_phi_fixes_identity_exactly(c60):
    _, cp = _ball_cp(c60, 5)
    one = nl.compress(nl.identity(c60), 5)
    out = nl.phi_apply(cp, one)
    assert np.array_equal(out.to_dense(), nl.identity(c60).to_dense())


def test_phi_radius_mismatch(c60):
    _, cp = _ball_cp(c60, 5)
    comp = nl.compress(nl.adjacency(c60), 4)
    with pytest.raises(nl.RadiusMismatch):
        nl.phi_apply(cp, comp)


def test_phi_multislot(c6):
    cert, cp = _ball_cp(c6, 2)
    a = nl.random_banded(c6, 1, seed=11, m=2)
    routed = nl.phi_apply(cp, nl.compress(a, 2))
    direct = nl.schur_multiply(a, cert.gram())
    assert routed.m == 2
    assert np.array_equal(routed.to_dense(), direct.to_dense())


def test_schur_test_kappa_values(c60, grid8):
    assert nl.schur_test_kappa(c60, 1) == 3
    assert nl.schur_test_kappa(c60, 2) == 5
    assert nl.schur_test_kappa(grid8, 1) == 5
    assert nl.schur_test_kappa(grid8, 0) == 1


def test_schur_norm_bound_sound(c60, grid8):
    for space in (c60, grid8):
        for seed in range(10):
            a = nl.random_banded(space, 2, seed=seed)
            bound = nl.schur_norm_bound(a)
            assert nl.operator_norm(a) <= bound * (1 + 1e-12)


def test_onl_bound_vacuous_on_small_cycle(c6):
    cert = nl.subset_to_vector(nl.ball_certificate(c6, 1))
    bound = nl.a_implies_onl_bound(cert, 1)
    assert bound.kappa == 3
    assert bound.epsilon_exact == Fraction(1, 1)
    assert bound.vacuous


def test_onl_bound_exact_epsilon(c60):
    cert = nl.subset_to_vector(nl.ball_certificate(c60, 10))
    bound = nl.a_implies_onl_bound(cert, 1, samples=25, seed=0)
    assert bound.kappa == 3
    assert bound.gram_deficit_exact == Fraction(1, 21)
    assert bound.epsilon_exact == Fraction(1, 7)
    assert bound.epsilon == float(Fraction(1, 7))
    assert not bound.vacuous
    assert bound.all_verified
    assert len(bound.sample_checks) == 25
    for check in bound.sample_checks:
        assert check["multiplier_ok"] and check["lower_bound_ok"]
    doc = bound.to_json()
    assert doc["epsilon_exact"] == "1/7"
    assert doc["gram_deficit_exact"] == "1/21"


def test_onl_bound_inequalities_by_hand(c60):
    # spell out both certified conclusions on fresh operators
    cert = nl.subset_to_vector(nl.ball_certificate(c60, 10))
    cp = nl.SchurCPMap(cert)
    bound = nl.a_implies_onl_bound(cert, 1)
    eps = bound.epsilon
    for seed in (101, 202):
        a = nl.random_banded(c60, 1, seed=seed)
        norm_a = nl.operator_norm(a)
        moved = nl.phi_apply(cp, nl.compress(a, 10))
        moved_norm = nl.operator_norm(moved)
        diff = dense_norm(moved.to_dense() - a.to_dense())
        assert diff <= eps * norm_a + 1e-9
        assert moved_norm >= (1 - eps) * norm_a - 1e-9
        # the multiplier factors through compression, which cannot gain norm
        assert nl.compress(a, 10).norm() >= moved_norm - 1e-9


def test_onl_bound_spot_constant(c60):
    # the compression of the cycle adjacency at radius 10 is a path on 21
    # vertices, so its norm 2 cos(pi/22) must clear the certified floor 12/7
    comp = nl.compress(nl.adjacency(c60), 10)
    assert abs(comp.norm() - 2 * math.cos(math.pi / 22)) < 1e-12
    assert comp.norm() >= 12 / 7


def test_kernel_extraction_matches_gram(c60):
    cert, cp = _ball_cp(c60, 10)
    kernel = nl.kernel_from_cp_map(cp)
    gram = cert.gram()
    overlap = cp.overlap
    assert np.array_equal(kernel.table[overlap], gram[overlap])
    assert not kernel.table[~overlap].any()
    assert kernel.radius == 20
    report = nl.kernel_checks(kernel)
    assert report["diagonal_error"] == 0.0
    assert report["hermitian_error"] == 0.0
    assert report["psd_ok"]
    assert report["measured_propagation"] <= 20


def test_kernel_deviation_matches_bound_deficit(c60):
    cert, cp = _ball_cp(c60, 10)
    bound = nl.a_implies_onl_bound(cert, 1)
    kernel = nl.kernel_from_cp_map(cp)
    # same float pipeline on both sides, so equality is exact
    assert nl.kernel_deviation(kernel, 1) == bound.gram_deficit


def test_cb_norm_check_consistent(c6):
    rep = nl.sampled_cb_norm_check(c6, 1, 2, amplification=2, samples=20, seed=0)
    assert rep.consistent
    assert rep.amplified_ratio <= rep.scalar_ratio_estimate + rep.tolerance
    assert rep.min_reduction_fraction >= 0.95
    assert len(rep.amplified_ratios) == 20
    assert len(rep.reduction_ratios) == 20
    rerun = nl.sampled_cb_norm_check(c6, 1, 2, amplification=2, samples=20, seed=0)
    assert rep.to_json() == rerun.to_json()


def test_cb_norm_check_radii_validation(c6):
    with pytest.raises(nl.InvalidRadii):
        nl.sampled_cb_norm_check(c6, 3, 2, amplification=2, samples=2)
    with pytest.raises(nl.InvalidRadii):
        nl.sampled_cb_norm_check(c6, 0, 2, amplification=2, samples=2)
    with pytest.raises(nl.InvalidParams):
        nl.sampled_cb_norm_check(c6, 1, 2, amplification=0, samples=2)


def test_equivalence_experiment_ball(c60):
    rep = nl.equivalence_experiment(
        c60, 1, 10, certificate="ball", samples=10, seed=0,
        profile_samples=5, search_budget=20,
    )
    assert rep.bound.epsilon_exact == Fraction(1, 7)
    assert rep.bound.all_verified
    assert rep.kernel_matches_gram
    assert rep.deviation_matches_deficit
    assert rep.kernel_report["psd_ok"]
    assert rep.profile is not None and rep.profile.consistent
    assert rep.warnings == ()
    doc = rep.to_json()
    for key in (
        "space", "parameters", "certificate", "epsilon",
        "certified_bound_checks", "kernel_checks", "onl_profile",
        "warnings", "note",
    ):
        assert key in doc
    assert doc["epsilon"]["epsilon_exact"] == "1/7"
    row = rep.csv_row()
    assert len(row) == len(nl.duality.EQUIV_CSV_HEADER)
    assert row[0] == "cycle_60" and row[4] == 3


def test_equivalence_experiment_vacuous_still_completes(c6):
    rep = nl.equivalence_experiment(
        c6, 1, 1, certificate="ball", samples=5, seed=0,
        profile_samples=3, search_budget=10,
    )
    assert rep.bound.vacuous
    assert any("vacuous" in w for w in rep.warnings)
    assert rep.kernel_matches_gram


def test_equivalence_experiment_tree_ray(btree6):
    rep = nl.equivalence_experiment(
        btree6, 1, 4, certificate="tree_ray", samples=5, seed=1,
        profile_samples=3, search_budget=10,
    )
    assert rep.certificate_summary["origin"] == "tree_ray"
    assert rep.kernel_matches_gram
    assert rep.deviation_matches_deficit
    assert rep.kernel_report["psd_ok"]


def test_equivalence_experiment_custom_certificate(c6):
    cert = nl.subset_to_vector(nl.ball_certificate(c6, 2))
    rep = nl.equivalence_experiment(
        c6, 1, 2, certificate=cert, samples=5, seed=0,
        profile_samples=3, search_budget=10,
    )
    assert rep.certificate_summary["origin"] == "custom"
    assert rep.kernel_matches_gram


def test_equivalence_experiment_zero_loc_radius_warns(c6):
    rep = nl.equivalence_experiment(
        c6, 1, 0, certificate="ball", samples=3, seed=0,
        profile_samples=3, search_budget=10,
    )
    assert rep.profile is None
    assert len(rep.warnings) >= 1
