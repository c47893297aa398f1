import math

import numpy as np
import pytest

from gossipgap.generators import (ConstantProcess, Digraph, PushSumConfig,
                                  PushSumProcess, ring, ring_with_chords)
from gossipgap.spectrum import (GapEstimate, check_det_identity,
                                estimate_gap_birkhoff, estimate_gap_wedge,
                                estimate_spectrum_qr, estimate_sum_top2_wedge,
                                rank1_residual)

A2 = np.array([[0.5, 0.25], [0.5, 0.75]])


def lossy5(seed=2024):
    g = ring_with_chords(5)
    ne = len(g.edges)
    loss = tuple(0.1 if k % 2 == 0 else 0.3 for k in range(ne))
    return PushSumProcess(PushSumConfig.uniform(g, 0.5, loss), seed)


def two_node(loss, seed=77):
    g = Digraph(2, ((0, 1), (1, 0)))
    return PushSumProcess(PushSumConfig.uniform(g, 0.5, loss), seed)


# -- qr estimator -------------------------------------------------------------


def test_constant_matrix_eigen_oracle():
    est = estimate_spectrum_qr(ConstantProcess(A2, seed=0), 2, 10_000, replicates=4)
    oracle = np.log(np.sort(np.abs(np.linalg.eigvals(A2)))[::-1])
    assert abs(est.lambdas[0] - oracle[0]) < 1e-6
    assert abs(est.lambdas[1] - oracle[1]) < 1e-3
    assert est.gap == pytest.approx(math.log(4), abs=1e-3)


def test_identity_all_zero():
    est = estimate_spectrum_qr(ConstantProcess(np.eye(3), seed=0), 3, 200, replicates=2)
    np.testing.assert_allclose(est.lambdas, 0.0, atol=1e-14)
    np.testing.assert_allclose(est.stderr, 0.0, atol=1e-14)


def test_no_loss_top_exponent_zero():
    proc = PushSumProcess(PushSumConfig.uniform(ring(4), 0.5, 0.0), seed=3)
    est = estimate_spectrum_qr(proc, 1, 20_000, replicates=4)
    # column-stochastic products are bounded, so the accumulated log growth
    # is O(1) and the estimate is 0 up to an O(1/n) remainder
    assert abs(est.lambdas[0]) < 2e-4


def test_lambda_ordering_and_samples_shape():
    est = estimate_spectrum_qr(lossy5(), 2, 5_000, replicates=6)
    assert est.samples.shape == (6, 2)
    assert est.lambdas[0] >= est.lambdas[1] - 3 * (est.stderr[0] + est.stderr[1])
    assert est.gap > 0


def test_qr_parameter_validation():
    proc = ConstantProcess(np.eye(2), seed=0)
    with pytest.raises(ValueError, match="k must"):
        estimate_spectrum_qr(proc, 3, 1000)
    with pytest.raises(ValueError, match="n too small"):
        estimate_spectrum_qr(proc, 2, 50, reorth_period=10)
    with pytest.raises(ValueError, match="reorth"):
        estimate_spectrum_qr(proc, 2, 1000, reorth_period=0)


def test_reorth_period_consistency():
    # longer re-orthonormalization periods must not change the estimates
    proc = lossy5(7)
    e1 = estimate_spectrum_qr(proc, 2, 4_000, reorth_period=1, replicates=4)
    e5 = estimate_spectrum_qr(proc, 2, 4_000, reorth_period=5, replicates=4)
    np.testing.assert_allclose(e1.lambdas, e5.lambdas, atol=1e-6)


def test_degenerate_frame_warns_and_reports_minus_inf():
    proc = ConstantProcess(np.diag([2.0, 0.0]), seed=0)
    with pytest.warns(UserWarning, match="rank collapsed"):
        est = estimate_spectrum_qr(proc, 2, 500, replicates=2, burn_in=0)
    assert est.lambdas[0] == pytest.approx(math.log(2), abs=1e-10)
    assert est.lambdas[1] == -math.inf


def test_deterministic_per_seed():
    a = estimate_spectrum_qr(lossy5(5), 2, 2_000, replicates=3)
    b = estimate_spectrum_qr(lossy5(5), 2, 2_000, replicates=3)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_top_exponent_monotone_in_loss():
    # entrywise domination under coupled seeds: more loss, smaller lambda_1
    g = ring_with_chords(5)
    low = PushSumProcess(PushSumConfig.uniform(g, 0.5, 0.1), seed=2024)
    high = PushSumProcess(PushSumConfig.uniform(g, 0.5, 0.4), seed=2024)
    e_low = estimate_spectrum_qr(low, 1, 20_000, replicates=4)
    e_high = estimate_spectrum_qr(high, 1, 20_000, replicates=4)
    se = 3 * math.sqrt(e_low.stderr[0] ** 2 + e_high.stderr[0] ** 2)
    assert e_low.lambdas[0] >= e_high.lambdas[0] - se


# -- wedge --------------------------------------------------------------------


def test_wedge_diagonal_exact():
    proc = ConstantProcess(np.diag([2.0, 3.0]), seed=0)
    s = estimate_sum_top2_wedge(proc, np.array([1.0, 0.0]), np.array([0.0, 1.0]), 2_000)
    assert s == pytest.approx(math.log(6), abs=1e-12)


def test_wedge_identity_zero():
    proc = ConstantProcess(np.eye(3), seed=0)
    s = estimate_sum_top2_wedge(proc, np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), 1_000)
    assert s == pytest.approx(0.0, abs=1e-12)


def test_wedge_collinear_rejected():
    proc = ConstantProcess(np.eye(2), seed=0)
    with pytest.raises(ValueError, match="collinear"):
        estimate_sum_top2_wedge(proc, np.array([1.0, 2.0]), np.array([2.0, 4.0]), 100)


def test_wedge_rank_one_collapse_rejected():
    # rank-1 update matrix kills the wedge in one step
    proc = ConstantProcess(np.outer([1.0, 2.0], [1.0, 1.0]), seed=0)
    with pytest.raises(ValueError, match="collapsed"):
        estimate_sum_top2_wedge(proc, np.array([1.0, 0.0]), np.array([0.0, 1.0]), 100)


def test_wedge_agrees_with_qr_sum():
    proc = lossy5()
    est = estimate_spectrum_qr(proc, 2, 30_000, replicates=8)
    qr_sums = est.samples[:, 0] + est.samples[:, 1]
    x = np.array([1.0, 0.4, 0.7, 0.2, 0.9])
    w = np.array([0.3, 1.0, 0.5, 0.8, 0.6])
    wedge = np.array([estimate_sum_top2_wedge(proc, x, w, 30_000, stream=r)
                      for r in range(8)])
    se = math.sqrt(qr_sums.std(ddof=1) ** 2 / 8 + wedge.std(ddof=1) ** 2 / 8)
    assert abs(qr_sums.mean() - wedge.mean()) <= 3 * se


def test_gap_wedge_method():
    g = estimate_gap_wedge(two_node(0.5), np.array([1.0, 0.2]),
                           np.array([0.4, 1.0]), 20_000, replicates=4)
    assert g.method == "wedge_minus_top"
    assert g.value > 0


# -- birkhoff gap ---------------------------------------------------------------


def test_birkhoff_constant_tight():
    # eigenvalues 3 and 1: gap log 3; single-factor bound is already tight
    proc = ConstantProcess(np.array([[2.0, 1.0], [1.0, 2.0]]), seed=0)
    g = estimate_gap_birkhoff(proc, 1, 8)
    assert g.value == pytest.approx(math.log(3), abs=1e-12)
    assert g.stderr == 0.0
    assert g.diagnostics["tau_one_fraction"] == 0.0


def test_birkhoff_constant_bound_below_gap():
    proc = ConstantProcess(A2, seed=0)
    g = estimate_gap_birkhoff(proc, 1, 4)
    assert g.value == pytest.approx(-math.log(2.0 - math.sqrt(3.0)), abs=1e-12)
    assert g.value <= math.log(4)


def test_birkhoff_all_tau_one_flag():
    proc = lossy5()
    with pytest.warns(UserWarning, match="increase m"):
        g = estimate_gap_birkhoff(proc, 1, 16)  # single factors all have zeros
    assert g.value == 0.0
    assert g.diagnostics["flag"] == "increase m"
    assert g.diagnostics["tau_one_fraction"] == 1.0


def test_birkhoff_below_qr_gap():
    proc = lossy5()
    est = estimate_spectrum_qr(proc, 2, 30_000, replicates=8)
    g = estimate_gap_birkhoff(proc, 128, 64)
    assert g.value <= est.gap + 3 * math.sqrt(g.stderr ** 2 + est.gap_stderr ** 2)


def test_birkhoff_factored_matches_entrywise_phi():
    # the factored evaluation must agree with the direct entrywise scan
    # wherever the latter is well-conditioned
    from gossipgap.core import birkhoff_phi
    from gossipgap.spectrum import _phi_from_factors
    rng = np.random.default_rng(0)
    for _ in range(500):
        p = int(rng.integers(2, 7))
        m = np.exp(rng.uniform(-3, 3, (p, p)))
        u, s, vh = np.linalg.svd(m)
        with np.errstate(divide="ignore"):
            ln = np.log(s) - np.log(s[0])
        assert _phi_from_factors(u, ln, vh) == pytest.approx(
            birkhoff_phi(m), abs=1e-10)


def test_birkhoff_resolves_deep_contraction():
    # 512 * gap ~ 42 nats: far beyond entrywise double precision, easily
    # resolved by the factored representation
    proc = PushSumProcess(PushSumConfig.uniform(ring_with_chords(5), 0.5, 0.0),
                          seed=2024)
    g = estimate_gap_birkhoff(proc, 512, 64)
    assert g.diagnostics["tau_zero_fraction"] == 0.0
    assert 0.05 < g.value < 0.10  # near the ~0.082 gap, biased low by O(1/m)


def test_birkhoff_saturation_flag():
    # ~900 nats of contraction underflows even the factored second direction
    proc = two_node(0.5)
    with pytest.warns(UserWarning, match="reduce m"):
        g = estimate_gap_birkhoff(proc, 2400, 4)
    assert math.isnan(g.value)
    assert g.diagnostics["flag"] == "reduce m"
    assert g.diagnostics["tau_zero_fraction"] == 1.0


def test_gap_estimate_clamps_negative():
    from gossipgap.spectrum import SpectrumEstimate
    fake = SpectrumEstimate(np.array([0.0, 1e-4]), np.zeros(2), -1e-4, 1e-5,
                            100, 1, np.array([[0.0, 1e-4]]))
    with pytest.warns(UserWarning, match="clamping"):
        g = GapEstimate.from_qr(fake)
    assert g.value == 0.0
    assert g.diagnostics["raw"] == -1e-4


# -- determinant identity ---------------------------------------------------------


def test_det_identity_push_sum_exact():
    lhs, rhs = check_det_identity(lossy5(), 2_000, qr_n=2_000, replicates=4)
    assert lhs == pytest.approx(-math.log(2), abs=1e-14)
    assert rhs == pytest.approx(-math.log(2), abs=0.02)


def test_det_identity_diagonal():
    proc = ConstantProcess(np.diag([2.0, 3.0]), seed=0)
    lhs, rhs = check_det_identity(proc, 100, qr_n=1000, replicates=2)
    assert lhs == pytest.approx(math.log(6), abs=1e-12)
    assert rhs == pytest.approx(math.log(2) + math.log(3), abs=1e-10)


def test_det_identity_singular():
    proc = ConstantProcess(np.outer([1.0, 1.0], [1.0, 2.0]), seed=0)
    lhs, rhs = check_det_identity(proc, 100, qr_n=1000, replicates=2)
    assert lhs == -math.inf
    # float QR leaves a dirty ~1e-16 residual in the dead direction, so the
    # estimator reports a large negative exponent rather than exact -inf
    assert rhs < -30.0


# -- rank-1 residual ---------------------------------------------------------------


def test_rank1_residual_constant_slope():
    proc = ConstantProcess(A2, seed=0)
    res = rank1_residual(proc, [500, 1000, 2000])
    slopes = res.log_ratio / res.ns
    assert slopes[-1] == pytest.approx(-math.log(4), abs=5e-3)


def test_rank1_residual_identity():
    proc = ConstantProcess(np.eye(2), seed=0)
    res = rank1_residual(proc, [10, 100, 1000])
    np.testing.assert_allclose(res.ratio, 1.0, atol=1e-12)


def test_rank1_residual_matches_qr_gap():
    proc = two_node(0.5)
    est = estimate_spectrum_qr(proc, 2, 100_000, replicates=4)
    res = rank1_residual(proc, [50_000, 100_000])
    slope = (res.log_ratio[1] - res.log_ratio[0]) / (res.ns[1] - res.ns[0])
    assert abs(-slope - est.gap) / est.gap < 0.10


def test_rank1_residual_validation():
    proc = ConstantProcess(np.eye(2), seed=0)
    with pytest.raises(ValueError, match="increasing"):
        rank1_residual(proc, [100, 50])
    with pytest.raises(ValueError, match="checkpoint"):
        rank1_residual(proc, [])
