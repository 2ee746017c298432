import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from tlgamp.channel import MarkovPrior
from tlgamp.messages import (
    gamma_posterior,
    markov_forward_backward,
    pi_in_compute,
    pi_out_compute,
    spike_slab_posterior,
    visibility_belief,
    x_feedback,
)

seeds = st.integers(0, 2**32 - 1)


def _complex(rng, scale=1.0):
    return complex(*(scale * rng.normal(size=2)))


def test_gamma_posterior_examples():
    assert gamma_posterior(1.0, 0.5, 1.0, 0.5) == pytest.approx(1.0)
    assert gamma_posterior(0.0, 0.0, 0.1, 1e-9) == pytest.approx(1.1e9)


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_gamma_posterior_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    c, v = _complex(rng), rng.uniform(1e-3, 2)
    xi, eta = rng.uniform(1e-3, 3), rng.uniform(1e-6, 1)
    got = gamma_posterior(c, v, xi, eta)
    ref = oracles.gamma_belief_mean(c, v, xi, eta)
    assert abs(got - ref) <= 1e-8 * abs(ref)


def test_pi_out_examples():
    assert pi_out_compute(0.7 + 0.1j, 0.3, 0.0, 0.0) == pytest.approx(0.5)
    # t_ext far from zero and matching x: only s = 1 explains it
    assert pi_out_compute(3.0, 1e-4, 3.0, 1.0) > 1 - 1e-12


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_pi_out_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    tm, xm = _complex(rng), _complex(rng)
    tv, xv = rng.uniform(0.05, 2), rng.uniform(0.05, 2)
    assert abs(pi_out_compute(tm, tv, xm, xv) - oracles.pi_out_quadrature(tm, tv, xm, xv)) <= 1e-8


def test_pi_out_clamped():
    p = pi_out_compute(np.array([0.0, 50.0]), np.array([1e-6, 1e-6]), np.array([50.0, 50.0]), 1e-3, prob_clamp=1e-12)
    assert p.min() >= 1e-12 and p.max() <= 1 - 1e-12


@given(seeds, st.floats(0.05, 0.9), st.floats(0.02, 0.5))
@settings(max_examples=15, deadline=None)
def test_chain_matches_enumeration(seed, phi, p10):
    prior = MarkovPrior(phi, min(p10, 0.95 * (1 - phi) / phi))
    rng = np.random.default_rng(seed)
    pi = rng.uniform(0.01, 0.99, 12)
    psi0 = rng.uniform(0.05, 0.95)
    f, b = markov_forward_backward(pi, prior, psi0)
    belief, mean = visibility_belief(f, b, pi)
    ref_belief, ref_pi_in = oracles.chain_marginals(pi, prior.p01, prior.p10, psi0)
    assert np.max(np.abs(belief - ref_belief)) <= 1e-10
    assert np.max(np.abs(pi_in_compute(f, b) - ref_pi_in)) <= 1e-10
    assert mean == pytest.approx(belief.mean())


def test_chain_uninformative_likelihoods_follow_prior():
    prior = MarkovPrior(0.3, 0.1)
    f, _ = markov_forward_backward(np.full(20, 0.5), prior, 0.3)
    np.testing.assert_allclose(f, 0.3, atol=1e-12)
    f, _ = markov_forward_backward(np.full(20, 0.5), prior, 0.9)
    # starting off the stationary point, the prediction relaxes toward phi
    pred = 0.9
    for n in range(1, 20):
        pred = pred * prior.p11 + (1 - pred) * prior.p01
        assert f[n] == pytest.approx(pred, abs=1e-12)


def test_symmetric_chain_reversal():
    prior = MarkovPrior(0.5, 0.2)
    assert prior.p01 == pytest.approx(0.2)
    pi = np.random.default_rng(0).uniform(0.05, 0.95, 15)
    f, b = markov_forward_backward(pi, prior, 0.5)
    fr, br = markov_forward_backward(pi[::-1], prior, 0.5)
    np.testing.assert_allclose(fr[::-1], b, atol=1e-12)
    np.testing.assert_allclose(br[::-1], f, atol=1e-12)


def test_belief_examples():
    b, _ = visibility_belief(np.array([0.5]), np.array([0.5]), np.array([0.5]))
    assert b[0] == pytest.approx(0.5)
    b, _ = visibility_belief(np.array([0.1]), np.array([0.2]), np.array([1 - 1e-12]), prob_clamp=1e-12)
    assert b[0] > 1 - 1e-9


def test_spike_slab_examples():
    t, v, w = spike_slab_posterior(0.0, 0.3, 1.0, 1.0, 1.0)
    assert t == 0 and v == 0 and w == 0
    t, v, w = spike_slab_posterior(1.0, 0.0, 1.0, 2.0, 1.0)
    assert w == pytest.approx(1.0)
    assert t == pytest.approx(1.0) and v == pytest.approx(0.5)


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_spike_slab_matches_quadrature(seed):
    rng = np.random.default_rng(seed)
    pi = rng.uniform(0.02, 0.98)
    xm, tm = _complex(rng), _complex(rng)
    xv, tv = rng.uniform(0.05, 2), rng.uniform(0.05, 2)
    t, v, w = spike_slab_posterior(pi, xm, xv, tm, tv)
    rt, rv, rw = oracles.spike_slab_moments(pi, xm, xv, tm, tv)
    assert abs(t - rt) <= 1e-8 * max(abs(rt), 1e-12)
    assert abs(v - rv) <= 1e-8 * rv
    assert abs(w - rw) <= 1e-8 * rw


@given(seeds)
@settings(max_examples=30, deadline=None)
def test_x_feedback_reproduces_mixture_moments(seed):
    # prior times the feedback message equals the moment-matched belief of x
    rng = np.random.default_rng(seed)
    pi = rng.uniform(0.05, 0.95)
    xm, tm = _complex(rng), _complex(rng)
    xv, tv = rng.uniform(0.1, 2), rng.uniform(0.1, 2)
    m, v = x_feedback(pi, xm, xv, tm, tv)
    assert v > 0
    post_v = 1 / (1 / v + 1 / xv)
    post_m = post_v * (m / v + xm / xv)
    _, _, w = spike_slab_posterior(pi, xm, xv, tm, tv)
    vt = tv * xv / (tv + xv)
    mt = vt * (tm / tv + xm / xv)
    mean = w * mt + (1 - w) * xm
    var = w * (vt + abs(mt) ** 2) + (1 - w) * (xv + abs(xm) ** 2) - abs(mean) ** 2
    if 1 / var - 1 / xv > 1e-10:
        assert post_m == pytest.approx(mean, rel=1e-9, abs=1e-12)
        assert post_v == pytest.approx(var, rel=1e-9)
