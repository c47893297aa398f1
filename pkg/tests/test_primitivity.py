import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gossipgap.generators import (ConstantProcess, MarkovFamilyProcess,
                                  PushSumConfig, PushSumProcess,
                                  push_sum_matrix, ring, ring_with_chords)
from gossipgap.primitivity import (BoolPattern, bool_product, is_family_primitive,
                                   ks_critical_distance, ks_distance,
                                   pattern_of, replay_word,
                                   sample_backward_index,
                                   sample_backward_indices,
                                   sample_forward_index,
                                   sample_forward_indices,
                                   survival_loglinear_fit)

FIB = BoolPattern([[True, True], [True, False]])
SWAP = BoolPattern([[False, True], [True, False]])


def test_pattern_of():
    assert pattern_of([[0.5, 0.0], [0.2, 1.0]]) == BoolPattern([[1, 0], [1, 1]])
    assert not pattern_of(np.zeros((2, 2))).bits.any()
    assert pattern_of(np.ones((3, 3))).all_true


def test_bool_product_identity():
    ident = pattern_of(np.eye(2))
    assert bool_product(FIB, ident) == FIB
    assert bool_product(ident, FIB) == FIB


def test_fibonacci_square_all_true():
    assert bool_product(FIB, FIB).all_true


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2 ** 31 - 1))
def test_pattern_homomorphism(p, seed):
    rng = np.random.default_rng(seed)
    a = rng.random((p, p)) * (rng.random((p, p)) < 0.5)
    b = rng.random((p, p)) * (rng.random((p, p)) < 0.5)
    assert pattern_of(a @ b) == bool_product(pattern_of(a), pattern_of(b))


def test_family_primitive_fibonacci():
    rep = is_family_primitive([FIB])
    assert rep.family_primitive and not rep.capped
    assert len(rep.witness_word) == 2
    assert replay_word([FIB], rep.witness_word).all_true


def test_family_swap_not_primitive():
    rep = is_family_primitive([SWAP])
    assert not rep.family_primitive and not rep.capped
    assert rep.states_explored == 2
    assert rep.witness_word is None


def test_family_push_sum_strongly_connected():
    g = ring_with_chords(5)
    pats = [pattern_of(push_sum_matrix(5, e, 0.5)) for e in g.edges]
    rep = is_family_primitive(pats)
    assert rep.family_primitive
    assert replay_word(pats, rep.witness_word).all_true


def test_family_primitivity_magnitude_invariant():
    # decision depends only on patterns, not on the positive magnitudes
    g = ring(4)
    rng = np.random.default_rng(3)
    base = [push_sum_matrix(4, e, 0.5).a for e in g.edges]
    ref = is_family_primitive([pattern_of(a) for a in base])
    jittered = [a * np.exp(rng.uniform(-2, 2, a.shape)) for a in base]
    rep = is_family_primitive([pattern_of(a) for a in jittered])
    assert rep.family_primitive == ref.family_primitive
    assert rep.witness_word == ref.witness_word


def test_family_empty_rejected():
    with pytest.raises(ValueError, match="empty"):
        is_family_primitive([])


def test_family_state_cap():
    g = ring_with_chords(5)
    pats = [pattern_of(push_sum_matrix(5, e, 0.5)) for e in g.edges]
    rep = is_family_primitive(pats, state_cap=3)
    assert rep.capped and not rep.family_primitive


# -- index sampling -----------------------------------------------------------


def test_forward_index_constant_positive():
    proc = ConstantProcess(np.ones((3, 3)), seed=0)
    assert sample_forward_index(proc) == 1


def test_forward_index_fibonacci():
    proc = ConstantProcess(FIB.bits.astype(float), seed=0)
    assert sample_forward_index(proc) == 2


def test_forward_index_cap_error():
    proc = ConstantProcess(SWAP.bits.astype(float), seed=0)
    with pytest.raises(RuntimeError, match="cap"):
        sample_forward_index(proc, cap=50)


def test_backward_index_constant():
    proc = ConstantProcess(np.ones((3, 3)), seed=0)
    proc.enable_history(100)
    assert sample_backward_index(proc, end=5) == 1


def test_backward_index_fibonacci():
    proc = ConstantProcess(FIB.bits.astype(float), seed=0)
    proc.enable_history(100)
    assert sample_backward_index(proc, end=10) == 2


def test_backward_index_history_exhausted():
    proc = ConstantProcess(SWAP.bits.astype(float), seed=0)
    proc.enable_history(8)
    with pytest.raises(RuntimeError, match="history|cap"):
        sample_backward_index(proc, end=30)


def test_backward_index_requires_history():
    proc = ConstantProcess(np.ones((2, 2)), seed=0)
    with pytest.raises(RuntimeError, match="history"):
        sample_backward_index(proc, end=3)


def test_forward_start_in_the_past_rejected():
    proc = ConstantProcess(np.ones((2, 2)), seed=0)
    proc.next_matrix()
    with pytest.raises(ValueError, match="already"):
        sample_forward_index(proc, start=1)


def lossy_proc(seed):
    g = ring_with_chords(5)
    ne = len(g.edges)
    loss = tuple(0.1 if k % 2 == 0 else 0.3 for k in range(ne))
    return PushSumProcess(PushSumConfig.uniform(g, 0.5, loss), seed)


def test_forward_backward_same_distribution_small():
    psi = sample_forward_indices(lossy_proc(11).spawn((50, 0)), 2000)
    rho = sample_backward_indices(lossy_proc(11).spawn((50, 1)), 2000)
    d = ks_distance(psi, rho)
    assert d <= ks_critical_distance(2000, 2000, alpha=0.01)


def test_backward_ring_buffer_markov():
    fam = [push_sum_matrix(3, (0, 1), 0.5).a,
           push_sum_matrix(3, (1, 2), 0.5).a,
           push_sum_matrix(3, (2, 0), 0.5).a]
    P = np.array([[0.2, 0.5, 0.3], [0.4, 0.2, 0.4], [0.5, 0.3, 0.2]])
    proc = MarkovFamilyProcess(fam, P, seed=3)
    samples = sample_backward_indices(proc, 50, spacing=40)
    assert np.all(samples >= 1)


# -- statistics ---------------------------------------------------------------


def test_ks_distance_basics():
    a = np.array([1, 2, 3, 4])
    assert ks_distance(a, a) == 0.0
    assert ks_distance([1, 1, 1], [10, 10, 10]) == 1.0
    # F_a jumps to 1 at 2, F_b is 0 until 3: distance 1/2 at x=2
    assert ks_distance([1, 2], [3, 4]) == 1.0


def test_ks_critical_value():
    assert ks_critical_distance(10_000, 10_000, 0.01) == pytest.approx(0.02302, abs=2e-4)


def test_survival_fit_geometric():
    rng = np.random.default_rng(0)
    q = 0.88
    samples = rng.geometric(1 - q, size=20_000)
    slope, _, corr = survival_loglinear_fit(samples)
    assert corr <= -0.99
    assert slope == pytest.approx(np.log(q), rel=0.05)


def test_survival_fit_needs_samples():
    with pytest.raises(ValueError):
        survival_loglinear_fit([1, 2, 3])
