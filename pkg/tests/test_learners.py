import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arkl.ar_core import (
    PolicyClass,
    SeqPolicy,
    StepPolicy,
    class_members,
    point_mass_policy,
    random_seq_policy,
    random_step_policy,
    sample_dataset,
    uniform_policy,
)
from arkl.errors import CapExceeded, InvalidParam, ZeroProbability
from arkl.learners import (
    LEARNERS,
    Dataset,
    bayes_mode,
    bayes_posterior,
    empirical_log_loss,
    erm,
    erm_index,
    fit,
    mixability_check,
    mixability_gaps,
    posterior_weights,
    stepwise_erm,
    stepwise_erm_indices,
)

BERN = [StepPolicy.context_free([0.75, 0.25]), StepPolicy.context_free([0.25, 0.75])]


def _base(k, d, H, seed, context_free=False):
    rng = np.random.default_rng(seed)
    return [random_step_policy(d, rng, H - 1, context_free, floor=0.01) for _ in range(k)]


def test_dataset_validation():
    with pytest.raises(InvalidParam):
        Dataset(np.array([[0, 2]]), 2)
    with pytest.raises(InvalidParam):
        Dataset(np.array([0, 1]), 2)
    data = Dataset(np.array([[0, 1], [1, 1]]), 2)
    assert data.n == 2 and data.horizon == 2
    assert data.trajectories() == [(0, 1), (1, 1)]
    assert Dataset.empty(3, 2).n == 0


# empirical log loss


def test_log_loss_point_mass():
    data = Dataset(np.array([[1, 0, 1]] * 4), 2)
    assert empirical_log_loss(point_mass_policy((1, 0, 1), 2), data) == 0.0


def test_log_loss_uniform():
    data = Dataset(sample_dataset(random_seq_policy(2, 3, np.random.default_rng(0)), 17, np.random.default_rng(1)), 2)
    assert empirical_log_loss(uniform_policy(2, 3), data) == pytest.approx(3 * math.log(2), abs=1e-14)
    assert 3 * math.log(2) == pytest.approx(2.0794415416798357)


def test_log_loss_hand_lookup():
    s1 = StepPolicy.tabular([np.array([[0.2, 0.8]])])
    s2 = StepPolicy.tabular([np.array([[0.5, 0.5]]), np.array([[0.6, 0.4], [0.3, 0.7]])])
    data = Dataset(np.array([[0, 1], [1, 1]]), 2)
    hand = -(math.log(0.2) + math.log(0.4) + math.log(0.8) + math.log(0.7)) / 2
    assert empirical_log_loss(SeqPolicy((s1, s2)), data) == pytest.approx(hand, abs=1e-15)


def test_log_loss_zero_probability():
    with pytest.raises(ZeroProbability):
        empirical_log_loss(point_mass_policy((0,), 2), Dataset(np.array([[1]]), 2))


# ERM


def test_erm_single_sample_picks_likelier():
    cls = PolicyClass.decomposable(BERN, 1)
    assert erm(cls, Dataset(np.array([[1]]), 2)).steps[0] is BERN[1]


def test_erm_ties_go_to_lowest_index():
    cls = PolicyClass.decomposable(BERN, 1)
    data = Dataset(np.array([[0], [1]]), 2)
    assert erm_index(cls, data) == [0]
    shared = PolicyClass.fully_shared(BERN[::-1], 2)
    assert erm_index(shared, Dataset(np.array([[0, 1]]), 2)) == 0
    assert erm_index(shared, Dataset.empty(2, 2)) == 0


def test_erm_realizable_fully_shared_consistency():
    base = _base(3, 2, 2, seed=4)
    cls = PolicyClass.fully_shared(base, 2)
    truth = SeqPolicy.shared(base[1], 2)
    hits = 0
    for seed in range(100):
        data = Dataset(sample_dataset(truth, 10_000, np.random.default_rng(seed)), 2)
        hits += erm_index(cls, data) == 1
    assert hits / 100 >= 0.99


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.sampled_from(["decomposable", "fully_shared", "dependent"]))
def test_erm_optimal_over_enumerated_members(seed, H, regime):
    rng = np.random.default_rng(seed)
    base = _base(3, 2, H, seed)
    if regime == "dependent":
        picks = {tuple(int(i) for i in rng.integers(0, 3, size=H)) for _ in range(4)}
        members = [SeqPolicy(tuple(base[i] for i in idx)) for idx in sorted(picks)]
        cls = PolicyClass.dependent(members)
    else:
        cls = PolicyClass(regime, H, base=tuple(base))
    truth = random_seq_policy(2, H, rng)
    data = Dataset(sample_dataset(truth, 30, rng), 2)
    best = empirical_log_loss(erm(cls, data), data)
    for m in class_members(cls):
        assert best <= empirical_log_loss(m, data) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_decomposable_erm_is_stepwise(seed, H):
    rng = np.random.default_rng(seed)
    base = _base(4, 3, H, seed)
    data = Dataset(sample_dataset(random_seq_policy(3, H, rng), 25, rng), 3)
    cls = PolicyClass.decomposable(base, H)
    assert erm_index(cls, data) == stepwise_erm_indices(base, data, H)
    assert erm(cls, data).steps == stepwise_erm(base, data, H).steps


def test_stepwise_erm_h1_equals_erm():
    base = _base(3, 3, 1, seed=2)
    data = Dataset(sample_dataset(SeqPolicy((base[2],)), 50, np.random.default_rng(0)), 3)
    assert stepwise_erm(base, data, 1).steps == erm(PolicyClass.decomposable(base, 1), data).steps


def test_stepwise_erm_on_dependent_class_shared_first_step():
    base = _base(3, 2, 2, seed=6)
    members = [SeqPolicy((base[0], base[1])), SeqPolicy((base[0], base[2])), SeqPolicy((base[0], base[0]))]
    cls = PolicyClass.dependent(members)
    data = Dataset(sample_dataset(members[1], 5000, np.random.default_rng(3)), 2)
    out = fit("stepwise_erm", cls, data)
    assert out.steps[0] is base[0]


def test_erm_dependent_above_cap():
    base = _base(2, 2, 1, seed=0)
    cls = PolicyClass.dependent([SeqPolicy((a,)) for a in base])
    with pytest.raises(CapExceeded):
        erm(cls, Dataset(np.array([[0]]), 2), cap=1)


# Bayes posterior


def test_bayes_no_data_is_prior_mixture():
    base = _base(3, 2, 2, seed=1)
    prior = np.array([0.5, 0.3, 0.2])
    pred, post = bayes_posterior(base, Dataset.empty(2, 2), 2, prior)
    np.testing.assert_allclose(post.weights, np.tile(prior, (2, 1)), atol=1e-15)
    for h in range(2):
        expect = sum(w * b.rows_for_length(h) for w, b in zip(prior, base))
        np.testing.assert_allclose(pred.steps[h].rows_for_length(h), expect, atol=1e-15)


def test_bayes_single_member_is_that_member():
    base = _base(1, 3, 2, seed=1)
    data = Dataset(sample_dataset(SeqPolicy.shared(base[0], 2), 20, np.random.default_rng(0)), 3)
    pred, post = bayes_posterior(base, data, 2)
    assert all(s is base[0] for s in pred.steps)
    assert np.all(post.weights == 1.0)


def test_bayes_hand_update():
    pred, post = bayes_posterior(BERN, Dataset(np.array([[1]]), 2), 1)
    np.testing.assert_allclose(post.weights[0], [0.25, 0.75], atol=1e-15)
    np.testing.assert_allclose(pred.steps[0].row(()), [0.375, 0.625], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 200))
def test_posterior_rows_normalized(seed, H, n):
    rng = np.random.default_rng(seed)
    base = _base(4, 3, H, seed)
    data = Dataset(sample_dataset(random_seq_policy(3, H, rng), n, rng), 3)
    W = posterior_weights(base, data, H).weights
    assert np.all(W >= 0)
    assert np.all(np.abs(W.sum(axis=1) - 1) <= 1e-12)


def test_posterior_handles_huge_likelihood_gaps():
    base = [StepPolicy.context_free([0.999, 0.001]), StepPolicy.context_free([0.001, 0.999])]
    data = Dataset(np.ones((5000, 1), dtype=int), 2)
    W = posterior_weights(base, data, 1).weights
    assert W[0, 1] == 1.0 and np.isfinite(W).all()


def test_posterior_weight_grows_with_n():
    base = _base(4, 2, 2, seed=11, context_free=True)
    truth = SeqPolicy.shared(base[2], 2)
    cls = PolicyClass.fully_shared(base, 2)
    small, large = [], []
    for seed in range(100):
        rng = np.random.default_rng(seed)
        for n, acc in ((10, small), (1000, large)):
            data = Dataset(sample_dataset(truth, n, rng), 2)
            acc.append(posterior_weights(cls.base, data, 2).weights[:, 2].mean())
    assert np.mean(large) > np.mean(small)


def test_posterior_csv():
    _, post = bayes_posterior(BERN, Dataset(np.array([[1]]), 2), 1)
    lines = post.to_csv().splitlines()
    assert lines[0] == "step,member_index,weight"
    rows = [line.split(",") for line in lines[1:]]
    assert [r[:2] for r in rows] == [["0", "0"], ["0", "1"]]
    assert [float(r[2]) for r in rows] == [w for _, w in post.step(0)]
    assert post.step(0)[1][1] == pytest.approx(0.75, abs=1e-15)


def test_prior_validation():
    with pytest.raises(InvalidParam):
        posterior_weights(BERN, Dataset(np.array([[1]]), 2), 1, prior=[1.0, 0.0])


# Bayes mode


def test_bayes_mode_uniform_prior_matches_erm():
    base = _base(3, 2, 3, seed=9)
    rng = np.random.default_rng(1)
    data = Dataset(sample_dataset(random_seq_policy(2, 3, rng), 40, rng), 2)
    for regime in ("decomposable", "fully_shared"):
        cls = PolicyClass(regime, 3, base=tuple(base))
        assert bayes_mode(cls, data).steps == erm(cls, data).steps


def test_bayes_mode_prior_can_flip_choice():
    cls = PolicyClass.fully_shared(BERN, 1)
    data = Dataset(np.array([[1]]), 2)
    assert bayes_mode(cls, data).steps[0] is BERN[1]
    assert bayes_mode(cls, data, prior=[0.9, 0.1]).steps[0] is BERN[0]


# mixability


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 100))
def test_mixability_random(seed, H, n):
    rng = np.random.default_rng(seed)
    base = _base(int(rng.integers(1, 6)), 3, H, seed)
    data = Dataset(sample_dataset(random_seq_policy(3, H, rng), n, rng), 3)
    assert mixability_check(base, data, H)


def test_mixability_single_member_equality():
    base = _base(1, 2, 2, seed=0)
    data = Dataset(sample_dataset(SeqPolicy.shared(base[0], 2), 30, np.random.default_rng(0)), 2)
    gaps = mixability_gaps(base, data, 2)
    np.testing.assert_allclose(gaps, 0.0, atol=1e-10)
    assert mixability_check(base, data, 2)


def test_mixability_prior_offset_is_log_k():
    base = _base(8, 2, 1, seed=3, context_free=True)
    gaps_empty = mixability_gaps(base, Dataset.empty(1, 2), 1)
    # with no data both losses vanish and only the log(1/prior) term remains
    np.testing.assert_allclose(gaps_empty, math.log(8), atol=1e-15)


# dispatch


def test_fit_dispatch():
    base = _base(3, 2, 2, seed=5)
    cls = PolicyClass.decomposable(base, 2)
    data = Dataset(sample_dataset(SeqPolicy((base[0], base[1])), 100, np.random.default_rng(0)), 2)
    for name in LEARNERS:
        out = fit(name, cls, data)
        assert out.horizon == 2
    with pytest.raises(InvalidParam):
        fit("nope", cls, data)
