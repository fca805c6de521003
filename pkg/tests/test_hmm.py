from __future__ import annotations

import numpy as np
import pytest

from hitrateopt import (
    CapacityError,
    HmmSpec,
    ValidationError,
    backward_smooth,
    baum_welch,
    emit_labels,
    flatten_factorial,
    forward,
    predict_next_state_probs,
    sample_state_path,
    viterbi,
)
from hitrateopt.simulate import BASELINE_EMISSION, BASELINE_TRANSITION
from oracles import brute_likelihood, brute_smoothed, brute_viterbi, random_spec, \
    stationary_distribution


def benchmark_spec() -> HmmSpec:
    return HmmSpec(initial=np.full(3, 1 / 3), transition=np.asarray(BASELINE_TRANSITION),
                   emission=np.asarray(BASELINE_EMISSION))


def test_spec_validation():
    with pytest.raises(ValidationError):
        HmmSpec(initial=[0.5, 0.6], transition=np.eye(2), emission=np.eye(2))
    with pytest.raises(ValidationError):
        HmmSpec(initial=[1.0, 0.0], transition=[[0.9, 0.2], [0.5, 0.5]],
                emission=np.eye(2))
    spec = HmmSpec(initial=[1.0, 0.0], transition=np.eye(2), emission=np.eye(2))
    assert not spec.transition.flags.writeable


def test_sample_absorbing_identity_chain():
    spec = HmmSpec(initial=[0.0, 1.0, 0.0], transition=np.eye(3), emission=np.eye(3))
    path = sample_state_path(spec, 5, seed=0)
    assert path.tolist() == [1, 1, 1, 1, 1]


def test_sample_matches_stationary_frequency():
    spec = benchmark_spec()
    stationary = stationary_distribution(spec.transition)
    assert stationary == pytest.approx([3 / 17, 11 / 17, 3 / 17])
    path = sample_state_path(spec, 1000, seed=42)
    freq = np.bincount(path, minlength=3) / 1000
    assert abs(freq[1] - 11 / 17) <= 0.05


def test_sampling_deterministic_per_seed():
    spec = benchmark_spec()
    a = sample_state_path(spec, 200, seed=9)
    b = sample_state_path(spec, 200, seed=9)
    assert np.array_equal(a, b)
    labels_a = emit_labels(spec, a, seed=10)
    labels_b = emit_labels(spec, a, seed=10)
    assert np.array_equal(labels_a, labels_b)


def test_emit_identity_emission():
    spec = HmmSpec(initial=[0.5, 0.5], transition=np.full((2, 2), 0.5),
                   emission=np.eye(2))
    path = sample_state_path(spec, 50, seed=1)
    assert np.array_equal(emit_labels(spec, path, seed=2), path)


def test_emit_empty_path():
    spec = benchmark_spec()
    assert emit_labels(spec, [], seed=0).size == 0


def test_emit_label_counts_near_expectation():
    spec = benchmark_spec()
    # stationary hidden distribution through the emission columns
    expected = stationary_distribution(spec.transition) @ spec.emission
    assert expected == pytest.approx([0.235, 0.594, 0.171], abs=5e-3)
    path = sample_state_path(spec, 1000, seed=3)
    labels = emit_labels(spec, path, seed=4)
    counts = np.bincount(labels, minlength=3)
    assert np.all(np.abs(counts - 1000 * expected) < 60)


def test_emit_rejects_bad_indices():
    spec = benchmark_spec()
    with pytest.raises(ValidationError):
        emit_labels(spec, [0, 3], seed=0)


def test_forward_two_state_example():
    spec = HmmSpec(initial=[0.5, 0.5], transition=[[0.9, 0.1], [0.1, 0.9]],
                   emission=[[0.8, 0.2], [0.2, 0.8]])
    post = forward(spec, [0, 0])
    expected = brute_likelihood(spec, [0, 0])
    assert expected == pytest.approx(0.322)
    assert np.exp(post.log_likelihood) == pytest.approx(expected, abs=1e-12)


def test_forward_single_state_product():
    spec = HmmSpec(initial=[1.0], transition=[[1.0]], emission=[[0.3, 0.7]])
    obs = [0, 1, 1, 0]
    post = forward(spec, obs)
    assert np.exp(post.log_likelihood) == pytest.approx(0.3 * 0.7 * 0.7 * 0.3)


def test_forward_impossible_observation():
    spec = HmmSpec(initial=[1.0, 0.0], transition=np.eye(2), emission=np.eye(2))
    post = forward(spec, [1])
    assert post.log_likelihood == -np.inf
    assert post.filtered.sum(axis=1) == pytest.approx([1.0])


def test_forward_validation():
    spec = benchmark_spec()
    with pytest.raises(ValidationError):
        forward(spec, [])
    with pytest.raises(ValidationError):
        forward(spec, [0, 5])


def test_smoothed_single_step_equals_filtered():
    spec = benchmark_spec()
    post = backward_smooth(spec, [1])
    manual = spec.initial * spec.emission[:, 1]
    manual /= manual.sum()
    assert post.smoothed[0] == pytest.approx(manual)
    assert post.filtered[0] == pytest.approx(manual)


def test_smoothed_matches_enumeration():
    rng = np.random.default_rng(21)
    for _ in range(10):
        spec = random_spec(rng, 2, 2)
        obs = rng.integers(0, 2, size=3)
        post = backward_smooth(spec, obs)
        assert post.smoothed == pytest.approx(brute_smoothed(spec, obs), abs=1e-12)


def test_smoothed_identity_transition_concentrated():
    spec = HmmSpec(initial=[0.0, 1.0], transition=np.eye(2),
                   emission=[[0.5, 0.5], [0.5, 0.5]])
    post = backward_smooth(spec, [0, 1, 0])
    assert post.smoothed[:, 1] == pytest.approx([1.0, 1.0, 1.0])


def test_viterbi_identity_emission():
    spec = HmmSpec(initial=[0.5, 0.5], transition=np.full((2, 2), 0.5),
                   emission=np.eye(2))
    obs = [0, 1, 1, 0]
    assert viterbi(spec, obs).tolist() == obs


def test_viterbi_uniform_ties_go_low():
    spec = HmmSpec(initial=np.full(3, 1 / 3), transition=np.full((3, 3), 1 / 3),
                   emission=np.full((3, 2), 0.5))
    assert viterbi(spec, [0, 1, 0]).tolist() == [0, 0, 0]


def test_viterbi_matches_enumeration():
    rng = np.random.default_rng(33)
    for _ in range(10):
        spec = random_spec(rng, 2, 3)
        obs = rng.integers(0, 3, size=3)
        assert np.array_equal(viterbi(spec, obs), brute_viterbi(spec, obs))


def test_filtered_rows_normalized():
    rng = np.random.default_rng(55)
    spec = random_spec(rng, 3, 3)
    obs = rng.integers(0, 3, size=40)
    post = backward_smooth(spec, obs)
    assert np.max(np.abs(post.filtered.sum(axis=1) - 1.0)) <= 1e-10
    assert np.max(np.abs(post.smoothed.sum(axis=1) - 1.0)) <= 1e-10


def test_baum_welch_single_state_closed_form():
    obs = np.array([0, 1, 1, 2, 1, 0, 1, 1])
    result = baum_welch(obs, n_hidden=1, n_observed=3, restarts=2, seed=0)
    freq = np.bincount(obs, minlength=3) / obs.size
    assert result.spec.emission[0] == pytest.approx(freq, abs=1e-9)
    assert result.spec.transition == pytest.approx([[1.0]])


def test_baum_welch_beats_uniform_start():
    spec = HmmSpec(initial=[0.5, 0.5], transition=[[0.95, 0.05], [0.05, 0.95]],
                   emission=[[0.9, 0.1], [0.1, 0.9]])
    path = sample_state_path(spec, 300, seed=5)
    obs = emit_labels(spec, path, seed=6)
    result = baum_welch(obs, n_hidden=2, n_observed=2, restarts=4, max_iter=80, seed=7)
    uniform = HmmSpec(initial=[0.5, 0.5], transition=np.full((2, 2), 0.5),
                      emission=np.full((2, 2), 0.5))
    assert result.log_likelihood >= forward(uniform, obs).log_likelihood


def test_baum_welch_traces_monotone():
    spec = benchmark_spec()
    path = sample_state_path(spec, 200, seed=11)
    obs = emit_labels(spec, path, seed=12)
    result = baum_welch(obs, n_hidden=3, n_observed=3, restarts=3, max_iter=60, seed=13)
    for trace in result.traces:
        assert np.all(np.diff(trace) >= -1e-10)
    assert result.trace[-1] == result.log_likelihood


def test_baum_welch_recovers_stationary_proportions():
    spec = benchmark_spec()
    path = sample_state_path(spec, 500, seed=17)
    result = baum_welch(path, n_hidden=3, n_observed=3, restarts=5, max_iter=120,
                        seed=18)
    fitted = np.sort(stationary_distribution(result.spec.transition))
    target = np.sort([3 / 17, 11 / 17, 3 / 17])
    assert np.max(np.abs(fitted - target)) <= 0.1


def test_baum_welch_validation():
    with pytest.raises(ValidationError):
        baum_welch([0], n_hidden=2)
    with pytest.raises(ValidationError):
        baum_welch([0, 1], n_hidden=0)


def test_flatten_single_chain_identity():
    spec = benchmark_spec()
    assert flatten_factorial([spec]) is spec


def test_flatten_two_chains_kronecker():
    a = HmmSpec(initial=[0.3, 0.7], transition=[[0.9, 0.1], [0.2, 0.8]],
                emission=[[0.6, 0.4], [0.1, 0.9]])
    b = HmmSpec(initial=[0.5, 0.5], transition=[[0.7, 0.3], [0.4, 0.6]],
                emission=[[0.8, 0.2], [0.3, 0.7]])
    flat = flatten_factorial([a, b])
    assert flat.n_hidden == 4 and flat.n_observed == 4
    # spot-check entries of the product transition by hand
    assert flat.transition[0, 0] == pytest.approx(0.9 * 0.7)
    assert flat.transition[0, 3] == pytest.approx(0.1 * 0.3)
    assert flat.transition[2, 1] == pytest.approx(0.2 * 0.3)
    assert flat.initial == pytest.approx(np.kron(a.initial, b.initial))


def test_flatten_identity_transitions():
    a = HmmSpec(initial=[0.5, 0.5], transition=np.eye(2), emission=np.eye(2))
    flat = flatten_factorial([a, a])
    assert np.array_equal(flat.transition, np.eye(4))


def test_flatten_capacity_limit():
    chain = HmmSpec(initial=np.full(8, 1 / 8), transition=np.full((8, 8), 1 / 8),
                    emission=np.eye(8))
    with pytest.raises(CapacityError):
        flatten_factorial([chain] * 5)


def test_flatten_forward_factorizes():
    rng = np.random.default_rng(71)
    a = random_spec(rng, 2, 2)
    b = random_spec(rng, 2, 3)
    flat = flatten_factorial([a, b])
    obs_a = rng.integers(0, 2, size=5)
    obs_b = rng.integers(0, 3, size=5)
    joint_obs = obs_a * 3 + obs_b  # mixed-radix joint symbol
    joint = forward(flat, joint_obs).log_likelihood
    separate = forward(a, obs_a).log_likelihood + forward(b, obs_b).log_likelihood
    assert joint == pytest.approx(separate, abs=1e-10)


def test_predict_next_state_probs():
    spec = benchmark_spec()
    assert predict_next_state_probs(spec, [1.0, 0.0, 0.0]) == pytest.approx(
        [0.4, 0.55, 0.05])
    identity = HmmSpec(initial=[0.2, 0.8], transition=np.eye(2), emission=np.eye(2))
    assert predict_next_state_probs(identity, [0.2, 0.8]) == pytest.approx([0.2, 0.8])
    doubly = HmmSpec(initial=[0.5, 0.5], transition=[[0.3, 0.7], [0.7, 0.3]],
                     emission=np.eye(2))
    assert predict_next_state_probs(doubly, [0.5, 0.5]) == pytest.approx([0.5, 0.5])
    with pytest.raises(ValidationError):
        predict_next_state_probs(spec, [0.5, 0.2, 0.2])
