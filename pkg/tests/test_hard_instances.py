import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arkl.ar_core import (
    PolicyClass,
    SeqPolicy,
    class_members,
    joint_log_law,
    log_ratio_bound,
    random_step_policy,
)
from arkl.divergences import joint_kl, joint_kl_exact, kl_rows, total_variation_exact
from arkl.errors import InvalidParam
from arkl.hard_instances import (
    fano_eps,
    hadamard_columns,
    kl_to_uniform_closed_form,
    make_bernoulli_instance,
    make_dependent_instance,
    make_fano_instance,
    make_hadamard_family,
    make_misspecified_instance,
    min_class_kl,
    pairwise_kl_closed_form,
    stepwise_expected_kls,
    sylvester,
)


def _kl1(a, b):
    return joint_kl_exact(SeqPolicy((a,)), SeqPolicy((b,))).value


# Hadamard


def test_sylvester_is_orthogonal():
    for order in (1, 2, 4, 8, 16):
        S = sylvester(order)
        np.testing.assert_array_equal(S @ S.T, order * np.eye(order))
    with pytest.raises(InvalidParam):
        sylvester(6)


@pytest.mark.parametrize("m,d", [(2, 4), (3, 4), (4, 8), (7, 8), (8, 16), (16, 32)])
def test_hadamard_columns_balanced_and_orthogonal(m, d):
    cols = hadamard_columns(m)
    assert cols.shape == (d, m)
    assert set(np.unique(cols)) <= {-1.0, 1.0}
    np.testing.assert_array_equal(cols.sum(axis=0), 0)
    np.testing.assert_array_equal(cols.T @ cols, d * np.eye(m))


@pytest.mark.parametrize("m", [2, 4, 8, 16])
@pytest.mark.parametrize("eps", [0.1, 0.5, 1.0])
def test_hadamard_closed_forms_by_enumeration(m, eps):
    fam = make_hadamard_family(m, eps)
    for i, j in itertools.permutations(range(m), 2):
        assert abs(_kl1(fam.members[i], fam.members[j]) - eps * math.tanh(eps)) <= 1e-12
    for i in range(m):
        assert abs(_kl1(fam.members[i], fam.uniform) - (eps * math.tanh(eps) - math.log(math.cosh(eps)))) <= 1e-12


def test_hadamard_rows_match_formula():
    fam = make_hadamard_family(8, 0.5)
    for j, mem in enumerate(fam.members):
        expect = np.exp(0.5 * fam.columns[:, j]) / (fam.d * math.cosh(0.5))
        np.testing.assert_allclose(mem.context_free_row, expect, rtol=1e-15)


def test_hadamard_eps_zero_collapses():
    fam = make_hadamard_family(2, 0.0)
    assert _kl1(fam.members[0], fam.members[1]) == 0.0
    np.testing.assert_array_equal(fam.members[0].context_free_row, np.full(fam.d, 1 / fam.d))


def test_hadamard_numeric_values():
    assert pairwise_kl_closed_form(0.5) == pytest.approx(0.2310585786300049, abs=1e-15)
    assert math.log(math.cosh(0.5)) == pytest.approx(0.12011450695827752, abs=1e-15)
    assert kl_to_uniform_closed_form(0.5) == pytest.approx(0.11094407167172738, abs=1e-15)


def test_hadamard_rejects_bad_params():
    with pytest.raises(InvalidParam):
        make_hadamard_family(1, 0.5)
    with pytest.raises(InvalidParam):
        make_hadamard_family(4, 1.5)


def test_quadratic_bound_chain_on_grid():
    for eps in np.linspace(0.01, 1.0, 100):
        assert pairwise_kl_closed_form(eps) >= eps**2 / 2
        assert kl_to_uniform_closed_form(eps) <= eps**2 / 2


def test_hadamard_manifest():
    man = make_hadamard_family(8, 0.5).manifest()
    assert man["construction"] == "hadamard_family" and man["d"] == 16
    assert man["oracle"]["pairwise_kl"] == pairwise_kl_closed_form(0.5)


# Fano product instance


def test_fano_eps_rule():
    assert fano_eps(1.0, 8, 200) == pytest.approx(0.25 * math.sqrt(math.log(8) / 200))
    assert fano_eps(1.0, 8, 1) == pytest.approx(0.25 * math.sqrt(math.log(8)))
    assert fano_eps(1.0, 2, 1) == pytest.approx(0.25 * math.sqrt(math.log(2)))
    assert fano_eps(1.5, 10**6, 1) == 0.75
    assert fano_eps(4.0, 8, 1) == 1.0


def test_fano_hamming_additivity_exhaustive():
    for H in (1, 2, 3, 4):
        m = 4 if H <= 2 else 2
        inst = make_fano_instance(H, m, eps=0.4, truth_index=[0] * H)
        thetas = list(itertools.product(range(m), repeat=H))
        for a, b in itertools.product(thetas, repeat=2):
            ham = sum(x != y for x, y in zip(a, b))
            kl = joint_kl_exact(inst.policy_at(a), inst.policy_at(b)).value
            assert abs(kl - ham * 0.4 * math.tanh(0.4)) <= 1e-12
            assert kl >= ham * 0.4**2 / 2 - 1e-15
            assert inst.kl_closed_form(a, b) == pytest.approx(kl, abs=1e-12)


def test_fano_instance_h4_m4_pairs():
    rng = np.random.default_rng(0)
    inst = make_fano_instance(4, 4, eps=0.7, rng=rng)
    for _ in range(30):
        a, b = rng.integers(0, 4, size=4), rng.integers(0, 4, size=4)
        kl = joint_kl_exact(inst.policy_at(a), inst.policy_at(b)).value
        assert abs(kl - np.sum(a != b) * 0.7 * math.tanh(0.7)) <= 1e-12


def test_fano_defaults_and_h1():
    inst = make_fano_instance(1, 8, G=1.0, n=200, truth_index=[3])
    assert inst.family.eps == fano_eps(1.0, 8, 200)
    assert inst.truth.steps[0] is inst.family.members[3]
    assert inst.policy_class.size == 8
    assert joint_kl(inst.truth, inst.truth).value == 0.0


def test_fano_rejects_bad_truth():
    with pytest.raises(InvalidParam):
        make_fano_instance(2, 4, eps=0.3, truth_index=[0, 4])
    with pytest.raises(InvalidParam):
        make_fano_instance(2, 4)


# Bernoulli


@pytest.mark.parametrize("n", [1, 100, 400, 10_000])
@pytest.mark.parametrize("sign", [+1, -1])
def test_bernoulli_gap(n, sign):
    inst = make_bernoulli_instance(n, 1, sign)
    b = 1 / (10 * math.sqrt(n))
    assert inst.b == b and inst.a == 0.25
    kls = [_kl1(inst.truth.steps[0], m) for m in inst.base]
    right, wrong = kls[inst.best_index], kls[1 - inst.best_index]
    assert abs((wrong - right) - 2 * b * math.log(3)) <= 1e-12
    assert inst.gap_per_step == pytest.approx(2 * b * math.log(3), abs=1e-15)


def test_bernoulli_n100_values():
    inst = make_bernoulli_instance(100)
    assert inst.b == pytest.approx(0.01)
    assert inst.gap_per_step == pytest.approx(0.02 * math.log(3), abs=1e-15)
    assert inst.gap_per_step == pytest.approx(0.021972245773362195, abs=1e-15)


def test_bernoulli_le_cam():
    n = 100
    plus, minus = make_bernoulli_instance(n, 1, +1), make_bernoulli_instance(n, 1, -1)
    kl = _kl1(plus.truth.steps[0], minus.truth.steps[0])
    assert math.sqrt(n / 2 * kl) <= plus.le_cam_tv_bound() == pytest.approx(math.sqrt(8) / 10)
    assert math.sqrt(8) / 10 < 1 / 3
    # one-step TV between the signed truths is 2b
    assert total_variation_exact(plus.truth, minus.truth).value == pytest.approx(2 * plus.b, abs=1e-15)


@pytest.mark.parametrize("H", [1, 3, 5])
def test_bernoulli_horizon_additive(H):
    inst = make_bernoulli_instance(400, H, -1, "decomposable")
    wrong = SeqPolicy.shared(inst.base[1 - inst.best_index], H)
    right = SeqPolicy.shared(inst.base[inst.best_index], H)
    gap = joint_kl(inst.truth, wrong).value - joint_kl(inst.truth, right).value
    assert gap == pytest.approx(H * inst.gap_per_step, abs=1e-12)
    assert inst.min_class_kl() == pytest.approx(joint_kl(inst.truth, right).value, abs=1e-12)


def test_bernoulli_misspecified_and_bounded():
    for n in (1, 7, 100, 10**6):
        for s in (+1, -1):
            inst = make_bernoulli_instance(n, 2, s)
            assert inst.min_class_kl() > 0
            assert math.isfinite(log_ratio_bound(inst.truth, inst.policy_class))
    assert make_bernoulli_instance(4, 1, "-").sign == -1
    with pytest.raises(InvalidParam):
        make_bernoulli_instance(0)


# dependent instance


def test_dependent_instance_values():
    inst = make_dependent_instance(3, 8, 1.0, 100, eps=0.3)
    assert inst.pairwise_kl == pytest.approx(0.3 * math.tanh(0.3), abs=1e-15)
    assert inst.pairwise_kl == pytest.approx(0.08739378373547727, abs=1e-15)
    mem = inst.policy_class.members
    for a, b in itertools.permutations(mem, 2):
        assert abs(joint_kl_exact(a, b).value - 0.3 * math.tanh(0.3)) <= 1e-12
    rows = np.array([m.steps[0].context_free_row for m in mem])
    ratios = np.log(rows[:, None, :] / rows[None, :, :])
    assert ratios.max() == pytest.approx(2 * 0.3, abs=1e-14)
    assert 2 * inst.eps <= inst.H * inst.G


def test_dependent_eps_rule_and_collapse():
    inst = make_dependent_instance(2, 4, 1.0, 100)
    assert inst.eps == pytest.approx(min(2 / 4 * math.sqrt(math.log(4) / 100), 1.0, 1.0))
    flat = make_dependent_instance(2, 4, 1.0, 100, eps=1e-6)
    m = flat.policy_class.members
    assert joint_kl_exact(m[0], m[1]).value <= 1e-11
    for mem in m:
        np.testing.assert_allclose(mem.steps[0].context_free_row, 1 / flat.d, rtol=1e-5)
    with pytest.raises(InvalidParam):
        make_dependent_instance(2, 4, 1.0, 100, eps=0.0)
    with pytest.raises(InvalidParam):
        make_dependent_instance(2, 3, 1.0, 100)


# misspecified instances


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.sampled_from(["decomposable", "fully_shared"]), st.booleans())
def test_min_class_kl_matches_enumeration(seed, H, regime, cf):
    inst = make_misspecified_instance(H, 3, 3, 0.5, np.random.default_rng(seed), regime=regime, context_free=cf)
    brute = min(joint_kl_exact(inst.truth, m).value for m in class_members(inst.policy_class))
    assert inst.min_class_kl == pytest.approx(brute, abs=1e-12)
    assert inst.min_class_kl > 0


def test_realizable_edge_case():
    rng = np.random.default_rng(1)
    inst = make_misspecified_instance(2, 3, 4, 0.0, rng)
    assert inst.min_class_kl == pytest.approx(0.0, abs=1e-15)


def test_min_kl_doubles_with_horizon():
    rng = np.random.default_rng(5)
    base = [random_step_policy(3, rng, None, True, floor=0.05) for _ in range(3)]
    truth_step = random_step_policy(3, rng, None, True, floor=0.05)
    v2, _ = min_class_kl(SeqPolicy.shared(truth_step, 2), PolicyClass.decomposable(base, 2))
    v4, _ = min_class_kl(SeqPolicy.shared(truth_step, 4), PolicyClass.decomposable(base, 4))
    assert v4 == pytest.approx(2 * v2, rel=1e-12)


def test_stepwise_expected_kls_sum_to_joint():
    rng = np.random.default_rng(3)
    inst = make_misspecified_instance(3, 2, 3, 0.4, rng)
    E = stepwise_expected_kls(inst.truth, inst.policy_class.base)
    idx = inst.argmin
    member = SeqPolicy(tuple(inst.policy_class.base[j] for j in idx))
    assert E[np.arange(3), idx].sum() == pytest.approx(joint_kl_exact(inst.truth, member).value, abs=1e-12)


def test_misspecified_manifest_and_validation():
    inst = make_misspecified_instance(2, 3, 3, 0.5, np.random.default_rng(0), seed=0)
    man = inst.manifest()
    assert man["construction"] == "random_misspecified" and man["seed"] == 0
    assert man["oracle"]["min_class_kl"] == inst.min_class_kl
    with pytest.raises(InvalidParam):
        make_misspecified_instance(2, 3, 1, 0.5, np.random.default_rng(0))
    with pytest.raises(InvalidParam):
        make_misspecified_instance(2, 3, 3, 1.5, np.random.default_rng(0))


def test_truth_has_full_support():
    inst = make_misspecified_instance(3, 3, 3, 0.3, np.random.default_rng(2))
    assert np.all(np.isfinite(joint_log_law(inst.truth)))
    rows = kl_rows(np.array([[0.5, 0.5]]), np.array([[0.5, 0.5]]))
    assert rows[0] == 0.0
