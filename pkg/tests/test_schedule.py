import numpy as np
import pytest

from irs2pce.schedule import (TrainingSchedule, index_sets, phase1_schedule, phase2_schedule_mgeN,
                              phase2_schedule_mltN_orthogonal, phase2_schedule_mltN_shared,
                              phase3_pairs_3pce, regime_constants, schedule_2pce, schedule_3pce,
                              training_overhead)


def test_phase1_small():
    V, tau = phase1_schedule(1)
    assert tau == 2 and np.allclose(V, [[1, 1], [1, -1]])
    V, tau = phase1_schedule(3)
    assert tau == 4 and np.all(V[0] == 1)


@pytest.mark.parametrize("N", [1, 4, 9, 32])
def test_phase1_orthogonal(N):
    V, _ = phase1_schedule(N)
    assert np.allclose(V @ V.conj().T, (N + 1) * np.eye(N + 1))


def test_phase2_mgeN_small():
    s = phase2_schedule_mgeN(4, 2, 2)
    assert s.tau == 2
    assert np.allclose(s.pilots[1], [1, 1]) and np.allclose(s.pilots[0], 0)
    assert np.allclose(s.patterns[:, 0], 1) and np.allclose(s.patterns[:, 1], -1)
    s = phase2_schedule_mgeN(4, 2, 3)
    assert s.tau == 4
    assert np.allclose(s.pilots[1:, :2], [[1, 1], [1, -1]])
    assert np.allclose(s.pilots[1:, 2:], s.pilots[1:, :2])


def test_phase2_mgeN_pilot_orthogonality():
    K = 5
    A = phase2_schedule_mgeN(8, 4, K).pilots[1:, :K - 1]
    assert np.allclose(A.conj() @ A.T, (K - 1) * np.eye(K - 1))


def test_phase2_mgeN_guard():
    with pytest.raises(ValueError):
        phase2_schedule_mgeN(3, 4, 2)


def test_regime_constants():
    assert regime_constants(2, 3) == (2, 1)
    assert regime_constants(3, 7) == (3, 1)
    assert regime_constants(32, 95) == (3, 31)
    for M in range(1, 12):
        for N in range(M + 1, 40):
            g, d = regime_constants(M, N)
            assert g >= 2 and 0 <= d <= M


def test_shared_small_example():
    sched, sets = phase2_schedule_mltN_shared(2, 3, 2)
    assert (sets.gamma, sets.delta) == (2, 1)
    assert sets.chi_B == ((0,),) and sets.chi_A == ((1, 2),)
    assert sched.tau == 3 and sched.phase_boundaries == [0, 2]


def test_shared_set_cover():
    sched, sets = phase2_schedule_mltN_shared(3, 7, 3)
    assert (sets.gamma, sets.delta) == (3, 1) and sched.tau == 7
    for A, B in zip(sets.chi_A, sets.chi_B):
        assert sorted(A + B) == list(range(7)) and not set(A) & set(B)


def test_shared_requires_mltN():
    with pytest.raises(ValueError):
        index_sets(4, 4, 2)


def test_orthogonal_small_example():
    s = phase2_schedule_mltN_orthogonal(2, 3, 2)
    assert s.tau == 3
    assert np.allclose(s.pilots[1], 1)
    assert np.allclose(s.patterns[:, 0], [1, 1, 0])
    assert np.allclose(s.patterns[:, 1], [0, 0, 1])
    assert np.allclose(s.patterns[:, 2], -1)


@pytest.mark.parametrize("M,N", [(2, 3), (3, 10), (5, 17), (4, 8)])
def test_orthogonal_offsets_partition(M, N):
    g, _ = regime_constants(M, N)
    s = phase2_schedule_mltN_orthogonal(M, N, 2)
    on = (s.patterns[:, :g] == 1).sum(axis=1)
    assert np.all(on == 1)


def test_orthogonal_design_full_rank(rng):
    from irs2pce.estimator import orthogonal_design_matrix
    M, N = 3, 10
    s = phase2_schedule_mltN_orthogonal(M, N, 2)
    H1 = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
    Q = orthogonal_design_matrix(H1, s.patterns)
    assert np.linalg.matrix_rank(Q) == N + M


def test_overhead_examples():
    assert training_overhead(40, 32, 4, "2PCE") == 39
    assert training_overhead(40, 32, 4, "3PCE") == 39
    assert training_overhead(10, 5, 1, "2PCE") == 6
    assert training_overhead(3, 7, 3, "2PCE") == 15
    with pytest.raises(ValueError):
        training_overhead(4, 4, 2, "4PCE")


@pytest.mark.parametrize("M,N,K", [(40, 32, 4), (3, 7, 3), (2, 3, 2), (8, 8, 1), (5, 23, 4)])
def test_generated_lengths(M, N, K):
    assert schedule_2pce(M, N, K).tau == training_overhead(M, N, K, "2PCE")
    assert schedule_3pce(M, N, K).tau == training_overhead(M, N, K, "3PCE")


def test_orthogonal_overhead():
    M, N, K = 4, 10, 3
    g, _ = regime_constants(M, N)
    assert schedule_2pce(M, N, K, "orthogonal").tau == N + 1 + (K - 1) * (g + 1)


def test_phase3_pairs_cover_everything():
    M, N, K = 3, 7, 3
    pairs = [p for slot in phase3_pairs_3pce(M, N, K) for p in slot]
    assert sorted(pairs) == [(u, e) for u in range(1, K) for e in range(N)]
    assert all(len(slot) <= M for slot in phase3_pairs_3pce(M, N, K))


def test_unit_modulus_entries():
    for s in (schedule_2pce(3, 7, 3), schedule_2pce(4, 10, 2, "orthogonal"), schedule_3pce(6, 4, 3)):
        for X in (s.pilots, s.patterns):
            mod = np.abs(X)
            assert np.all(np.isclose(mod, 0) | np.isclose(mod, 1))


def test_schedule_rejects_bad_modulus():
    with pytest.raises(ValueError):
        TrainingSchedule(np.full((1, 2), 2.0), np.ones((1, 2)), [0], "MgeN")


def test_schedule_json_round_trip():
    s = schedule_2pce(3, 7, 3)
    t = TrainingSchedule.from_json(s.to_json())
    assert np.array_equal(s.pilots, t.pilots) and np.array_equal(s.patterns, t.patterns)
    assert t.phase_boundaries == s.phase_boundaries and t.regime == s.regime


def test_unknown_regime():
    with pytest.raises(ValueError):
        schedule_2pce(3, 7, 2, "diagonal")
