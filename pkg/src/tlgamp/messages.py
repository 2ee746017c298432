"""Scalar message computations shared by both update modes.

Complex Gaussian densities use ``CN(x; m, v) = exp(-|x - m|^2 / v) / (pi v)``.
Probability ratios are evaluated in the log domain.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from .channel import MarkovPrior


def log_cn(x, mean, var):
    """Log-density of a circular complex Gaussian."""
    return -np.abs(x - mean) ** 2 / var - np.log(np.pi * var)


def gamma_posterior(c_hat, c_var, xi, eta, var_floor=1e-14):
    """Posterior mean of the angular-coefficient precision.

    The belief is Gamma with shape ``xi + 1`` and rate
    ``eta + |c_hat|^2 + c_var``.
    """
    denom = np.maximum(eta + np.abs(c_hat) ** 2 + c_var, var_floor)
    return (xi + 1) / denom


def pi_out_compute(t_ext_mean, t_ext_var, x_out_mean, x_out_var, var_floor=1e-14, prob_clamp=0.0):
    """Visibility evidence from the layer-3 likelihood and the layer-1 prior.

    Compares ``s_n = 0`` (``t_n = 0``, evidence ``CN(0; t_ext, v_t)``) with
    ``s_n = 1`` (``t_n = x_n``, evidence ``CN(t_ext; x_out, v_t + v_x)``).
    """
    v_t = np.maximum(t_ext_var, var_floor)
    v_s = np.maximum(t_ext_var + x_out_var, var_floor)
    log_off = log_cn(0.0, t_ext_mean, v_t)
    log_on = log_cn(t_ext_mean, x_out_mean, v_s)
    p = expit(log_on - log_off)
    if prob_clamp:
        p = np.clip(p, prob_clamp, 1 - prob_clamp)
    return p


def markov_forward_backward(pi_out, prior: MarkovPrior, psi_f0, psi_b_end=0.5, prob_clamp=0.0):
    """Forward and backward messages along the visibility chain.

    ``psi_f[n]`` is the probability that ``s_n = 1`` given the evidence at
    indices ``< n``; ``psi_b[n]`` likewise for indices ``> n``. The first
    forward message is ``psi_f0`` and the last backward message is
    ``psi_b_end``.
    """
    pi = np.asarray(pi_out, dtype=float)
    n = pi.size
    p01, p11, p10, p00 = prior.p01, prior.p11, prior.p10, prior.p00
    p0 = p10 + p00
    p1 = p11 + p01
    psi_f = np.empty(n)
    psi_b = np.empty(n)
    # plain float loop: the recursions are sequential and short
    pil = pi.tolist()
    f = float(psi_f0)
    psi_f[0] = f
    for i in range(1, n):
        off = (1 - f) * (1 - pil[i - 1])
        on = f * pil[i - 1]
        f = (p01 * off + p11 * on) / (off + on)
        if prob_clamp:
            f = min(max(f, prob_clamp), 1 - prob_clamp)
        psi_f[i] = f
    b = float(psi_b_end)
    psi_b[n - 1] = b
    for i in range(n - 2, -1, -1):
        off = (1 - b) * (1 - pil[i + 1])
        on = b * pil[i + 1]
        b = (p10 * off + p11 * on) / (p0 * off + p1 * on)
        if prob_clamp:
            b = min(max(b, prob_clamp), 1 - prob_clamp)
        psi_b[i] = b
    return psi_f, psi_b


def pi_in_compute(psi_f, psi_b, prob_clamp=0.0):
    """Chain prior on ``s_n`` from all other indices."""
    on = psi_f * psi_b
    p = on / (on + (1 - psi_f) * (1 - psi_b))
    if prob_clamp:
        p = np.clip(p, prob_clamp, 1 - prob_clamp)
    return p


def visibility_belief(psi_f, psi_b, pi_out, prob_clamp=0.0):
    """Marginal belief of ``s_n = 1``; also returns its mean (the next ``psi_f0``)."""
    on = psi_f * psi_b * pi_out
    off = (1 - psi_f) * (1 - psi_b) * (1 - pi_out)
    b = on / (on + off)
    if prob_clamp:
        b = np.clip(b, prob_clamp, 1 - prob_clamp)
    return b, float(np.mean(b))


def spike_slab_posterior(pi_in, x_mean, x_var, t_mean, t_var, var_floor=0.0):
    """Posterior moments of ``t_n`` under a spike-and-slab prior.

    Prior: ``(1 - pi_in) delta(t) + pi_in CN(t; x_mean, x_var)``;
    likelihood: ``CN(t; t_mean, t_var)``. Returns ``(t_hat, t_var_post, omega)``
    where ``omega`` is the posterior slab probability.
    """
    pi_in = np.asarray(pi_in, dtype=float)
    x_var = np.maximum(x_var, var_floor) if var_floor else np.asarray(x_var, dtype=float)
    t_var = np.maximum(t_var, var_floor) if var_floor else np.asarray(t_var, dtype=float)

    log_slab = log_cn(t_mean, x_mean, t_var + x_var)
    log_spike = log_cn(0.0, t_mean, t_var)
    with np.errstate(divide="ignore"):
        logit = np.log(pi_in) - np.log1p(-pi_in) + log_slab - log_spike
    omega = expit(logit)

    v_tmp = t_var * x_var / (t_var + x_var)
    t_tmp = v_tmp * (t_mean / t_var + x_mean / x_var)
    t_hat = omega * t_tmp
    t_post_var = omega * ((1 - omega) * np.abs(t_tmp) ** 2 + v_tmp)
    return t_hat, t_post_var, omega


def x_feedback(pi_in, x_mean, x_var, t_mean, t_var, var_floor=1e-14):
    """Gaussian message into ``x_n`` from the product factor ``t_n = s_n x_n``.

    The belief of ``x_n`` is a two-component mixture: tied to the layer-3
    evidence when ``s_n = 1`` and equal to its own prior otherwise. The
    mixture is moment-matched to a Gaussian and the prior ``(x_mean, x_var)``
    divided out. Entries with no net information get a very wide message.
    """
    x_var = np.maximum(x_var, var_floor)
    t_var = np.maximum(t_var, var_floor)
    _, _, omega = spike_slab_posterior(pi_in, x_mean, x_var, t_mean, t_var)
    v_tmp = t_var * x_var / (t_var + x_var)
    t_tmp = v_tmp * (t_mean / t_var + x_mean / x_var)
    mean = omega * t_tmp + (1 - omega) * x_mean
    second = omega * (v_tmp + np.abs(t_tmp) ** 2) + (1 - omega) * (x_var + np.abs(x_mean) ** 2)
    var = np.maximum(second - np.abs(mean) ** 2, var_floor)
    prec = np.maximum(1 / var - 1 / x_var, 1e-12 / x_var)
    in_var = 1 / prec
    in_mean = in_var * (mean / var - x_mean / x_var)
    return in_mean, in_var
