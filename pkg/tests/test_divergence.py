import math

import numpy as np
import pytest

from grasp.divergence import (
    KL,
    TV,
    HELLINGER,
    BernoulliPair,
    bernoulli_divergence,
    bernoulli_divergence_many,
    custom_divergence,
    discrete_divergence_to_uniform,
    f_conjugate,
    f_eval,
    f_subgrad_inverse,
    get_divergence,
)

ALL = [KL, TV, HELLINGER]


def conjugate_grid_oracle(div, s, t_hi=50.0, num=400_000):
    # sup_{t>=0} (s t - f(t)) on a fine grid; t = 1 added for kinked f
    t = np.unique(np.concatenate([np.linspace(0.0, t_hi, num), [1.0]]))
    return float(np.max(s * t - div.f(t)))


def test_f_eval_examples():
    assert f_eval(KL, 1.0) == 0.0
    assert f_eval(TV, 3.0) == 1.0
    assert f_eval(HELLINGER, 4.0) == 1.0


def test_f_eval_boundary_extensions():
    assert f_eval(KL, 0.0) == 0.0
    assert f_eval(TV, 0.0) == 0.5
    assert f_eval(HELLINGER, 0.0) == 1.0


def test_f_eval_rejects_negative():
    with pytest.raises(ValueError):
        f_eval(KL, -0.1)


def test_conjugate_examples_match_grid_oracle():
    assert f_conjugate(KL, 1.0) == pytest.approx(conjugate_grid_oracle(KL, 1.0), abs=1e-6)
    assert f_conjugate(KL, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert f_conjugate(TV, 0.0) == pytest.approx(conjugate_grid_oracle(TV, 0.0), abs=1e-6)
    assert f_conjugate(TV, 0.0) == 0.0
    assert f_conjugate(HELLINGER, 0.5) == pytest.approx(
        conjugate_grid_oracle(HELLINGER, 0.5, t_hi=20.0), abs=1e-6
    )
    assert f_conjugate(HELLINGER, 0.5) == pytest.approx(1.0, abs=1e-12)


def test_conjugate_effective_domains():
    assert f_conjugate(TV, 0.5) == 0.5
    assert f_conjugate(TV, 0.51) == math.inf
    assert f_conjugate(TV, -3.0) == -0.5
    assert f_conjugate(HELLINGER, 1.0) == math.inf
    assert np.isfinite(f_conjugate(KL, 40.0))


def test_conjugate_consistency_biconjugate():
    # f(t) = sup_s (s t - f*(s)) within 1e-8 on t in [0.01, 10]
    ts = np.linspace(0.01, 10.0, 97)
    grids = {
        "kl": np.linspace(-40.0, 5.0, 1_500_000),
        "tv": np.unique(np.concatenate([np.linspace(-3.0, 0.5, 700_000), [-0.5, 0.5]])),
        "hellinger": np.linspace(-40.0, 1.0 - 1e-9, 1_500_000),
    }
    for div in ALL:
        s = grids[div.kind]
        fstar = div.f_conj(s)
        finite = np.isfinite(fstar)
        s, fstar = s[finite], fstar[finite]
        recon = np.max(s[None, :] * ts[:, None] - fstar[None, :], axis=1)
        assert np.max(np.abs(recon - div.f(ts))) < 1e-8, div.kind


def test_subgrad_inverse_examples():
    assert f_subgrad_inverse(KL, 1.0) == pytest.approx(1.0, abs=1e-12)
    assert f_subgrad_inverse(HELLINGER, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert f_subgrad_inverse(TV, 0.25) == 1.0


def test_subgrad_inverse_root_find_oracle():
    # root of f'(q) = v found by bisection agrees with the closed forms
    rng = np.random.default_rng(3)
    for div, deriv, v_lo, v_hi in [
        (KL, lambda t: np.log(t) + 1.0, -3.0, 3.0),
        (HELLINGER, lambda t: 1.0 - 1.0 / np.sqrt(t), -3.0, 0.9),
    ]:
        for v in rng.uniform(v_lo, v_hi, size=25):
            lo, hi = 1e-12, 1e6
            for _ in range(200):
                mid = math.sqrt(lo * hi)
                if deriv(mid) < v:
                    lo = mid
                else:
                    hi = mid
            assert f_subgrad_inverse(div, v) == pytest.approx(lo, rel=1e-6)


def test_subgradient_inequality_property():
    rng = np.random.default_rng(11)
    ss = rng.uniform(0.0, 12.0, size=100)
    for div, v_range in [(KL, (-3, 3)), (TV, (-0.5, 0.5)), (HELLINGER, (-3, 0.95))]:
        for v in rng.uniform(*v_range, size=20):
            q = f_subgrad_inverse(div, v)
            lhs = div.f(ss) - div.f(np.asarray(q))
            assert np.all(lhs >= v * (ss - q) - 1e-9), (div.kind, v)


def test_bernoulli_examples():
    assert bernoulli_divergence(TV, BernoulliPair(0.8, 0.3)) == pytest.approx(0.5)
    assert bernoulli_divergence(KL, BernoulliPair(0.37, 0.37)) == 0.0
    assert bernoulli_divergence(KL, BernoulliPair(0.9, 0.1)) == pytest.approx(
        0.8 * math.log(9.0), abs=1e-12
    )


def test_bernoulli_nonnegative_and_zero_at_equal():
    rng = np.random.default_rng(5)
    a = rng.uniform(0, 1, 200)
    b = rng.uniform(0, 1, 200)
    for div in ALL:
        vals = bernoulli_divergence_many(div, a, b)
        assert np.all(vals >= 0)
        assert np.all(bernoulli_divergence_many(div, a, a) == 0.0)


def test_bernoulli_degenerate_edges():
    assert bernoulli_divergence(KL, BernoulliPair(0.5, 0.0)) == math.inf
    assert bernoulli_divergence(KL, BernoulliPair(0.0, 0.0)) == 0.0
    assert bernoulli_divergence(TV, BernoulliPair(1.0, 0.0)) == 1.0
    assert bernoulli_divergence(HELLINGER, BernoulliPair(1.0, 0.0)) == pytest.approx(2.0)


def test_kl_equals_cross_entropy_excess():
    rng = np.random.default_rng(7)
    a = rng.uniform(0.02, 0.98, 300)
    b = rng.uniform(0.02, 0.98, 300)

    def ce(model, truth):
        return -np.mean(truth * np.log(model) + (1 - truth) * np.log(1 - model))

    excess = ce(b, a) - ce(a, a)
    assert np.mean(bernoulli_divergence_many(KL, a, b)) == pytest.approx(excess, abs=1e-10)


def test_hellinger_closed_form_identity():
    rng = np.random.default_rng(9)
    a = rng.uniform(0, 1, 300)
    b = rng.uniform(0, 1, 300)
    expected = (np.sqrt(a) - np.sqrt(b)) ** 2 + (np.sqrt(1 - a) - np.sqrt(1 - b)) ** 2
    assert np.array_equal(bernoulli_divergence_many(HELLINGER, a, b), expected)


def test_discrete_divergence_examples():
    for div in ALL:
        assert discrete_divergence_to_uniform(div, np.full(8, 0.125)) == pytest.approx(0.0)
    assert discrete_divergence_to_uniform(KL, [1.0, 0.0]) == pytest.approx(math.log(2.0))
    assert discrete_divergence_to_uniform(TV, [0.5, 0.5, 0.0, 0.0]) == pytest.approx(0.5)


def test_discrete_divergence_rejects_non_simplex():
    with pytest.raises(ValueError):
        discrete_divergence_to_uniform(KL, [0.5, 0.6])
    with pytest.raises(ValueError):
        discrete_divergence_to_uniform(KL, [-0.1, 1.1])


def test_builtin_generators_validate():
    for div in ALL:
        div.validate()


def test_get_divergence_tokens():
    assert get_divergence("KL") is KL
    assert get_divergence("tv") is TV
    assert get_divergence("hellinger") is HELLINGER
    with pytest.raises(ValueError, match="kl"):
        get_divergence("chi2")


def test_custom_divergence_roundtrip():
    clone = custom_divergence(
        f=KL.f,
        f_conj=KL.f_conj,
        f_subgrad_inv=KL.f_subgrad_inv,
        conj_sup=np.inf,
        recession_slope=math.inf,
    )
    pair = BernoulliPair(0.9, 0.2)
    assert bernoulli_divergence(clone, pair) == pytest.approx(
        bernoulli_divergence(KL, pair), rel=1e-12
    )


def test_custom_divergence_rejects_nonconvex():
    with pytest.raises(ValueError):
        custom_divergence(
            f=lambda t: -np.abs(np.asarray(t) - 1.0),
            f_conj=KL.f_conj,
            f_subgrad_inv=KL.f_subgrad_inv,
        )
