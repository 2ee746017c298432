"""Three-layer GAMP for a single spatially non-stationary subchannel.

Model (after whitening and the unitary rotation)::

    r = A t + n,   t = s * x,   x = D c,   n ~ CN(0, I / beta)

* layer 1: ``c_q ~ CN(0, 1/gamma_q)`` with ``gamma_q ~ Gamma(xi, eta)``,
  linked to ``x`` through the dictionary ``D``;
* layer 2: the visibility indicators ``s_n`` form a stationary Markov chain;
* layer 3: linear mixing ``z = A t`` observed in white noise of unknown
  precision ``beta``.

Two update modes share the same scalar rules. ``vectorized_approx`` keeps
one message per node and adds the Onsager memory terms (AMP-style, cost
``O(N_R Q + M N_R)`` per iteration); ``edge_exact`` keeps every edge message
of the dense factor nodes and is meant for checking the approximation on
small problems.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import MarkovPrior, steer_tx
from .messages import (
    gamma_posterior,
    markov_forward_backward,
    pi_in_compute,
    pi_out_compute,
    spike_slab_posterior,
    visibility_belief,
    x_feedback,
)

MODES = ("vectorized_approx", "edge_exact")
X_FEEDBACK = ("extrinsic", "projected")
NOISE_UPDATES = ("t_residual", "z_posterior")


class NonFiniteMessage(FloatingPointError):
    """A message became NaN/inf; ``layer`` names where."""

    def __init__(self, layer: str):
        super().__init__(f"non-finite message in {layer}")
        self.layer = layer


@dataclass
class GampConfig:
    # Gamma shape: the precision update is (1 + xi) / (|c|^2 + var), so xi
    # sets how fast noise-level coefficients are pruned; near zero they creep
    # back and the NMSE drifts up at low SNR, xi = 1 prunes real paths too
    xi: float = 0.1
    eta: float = 1e-6
    p10: float = 0.05
    phi_init: float = 0.5
    max_iter: int = 20
    tol: float = 1e-5
    prob_clamp: float = 1e-12
    var_floor: float = 1e-14
    mode: str = "vectorized_approx"
    damping: float = 0.7
    onsager: bool = True
    # None: scale the initial variances to the observed energy
    init_var: float | None = None
    # starting noise precision; None: M / ||r||^2
    beta_init: float | None = None
    # False keeps beta at beta_init (noise level known after whitening)
    learn_noise: bool = True
    # residual for the beta update: r - A t_hat (plus A2 t_var), or the
    # z posterior, which lets beta run away once the fit absorbs the noise
    noise_update: str = "t_residual"
    # message into x: the layer-3 extrinsic on t, or the moment-matched
    # spike-and-slab projection (see messages.x_feedback)
    x_feedback: str = "projected"

    def validate(self):
        if not 0 < self.p10 < 1:
            raise ValueError(f"gamp.p10 must lie in (0, 1), got {self.p10}")
        if not 0 < self.phi_init < 1:
            raise ValueError(f"gamp.phi_init must lie in (0, 1), got {self.phi_init}")
        if self.prob_clamp <= 0 or self.var_floor <= 0:
            raise ValueError("gamp.prob_clamp and gamp.var_floor must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError(f"gamp.damping must lie in (0, 1], got {self.damping}")
        if self.mode not in MODES:
            raise ValueError(f"gamp.mode must be one of {MODES}, got {self.mode!r}")
        if self.max_iter < 1:
            raise ValueError("gamp.max_iter must be >= 1")
        if self.x_feedback not in X_FEEDBACK:
            raise ValueError(f"gamp.x_feedback must be one of {X_FEEDBACK}, got {self.x_feedback!r}")
        if self.noise_update not in NOISE_UPDATES:
            raise ValueError(f"gamp.noise_update must be one of {NOISE_UPDATES}, got {self.noise_update!r}")
        if self.beta_init is not None and self.beta_init <= 0:
            raise ValueError("gamp.beta_init must be positive")
        if self.xi <= 0 or self.eta <= 0:
            raise ValueError("gamp.xi and gamp.eta must be positive")

    def markov_prior(self) -> MarkovPrior:
        return MarkovPrior(self.phi_init, self.p10)


@dataclass
class Operators:
    """Dense operators of one observation, with elementwise squared magnitudes."""

    A: np.ndarray
    D: np.ndarray
    AH: np.ndarray = field(init=False)
    DH: np.ndarray = field(init=False)
    A2: np.ndarray = field(init=False)
    D2: np.ndarray = field(init=False)

    def __post_init__(self):
        self.AH = self.A.conj().T
        self.DH = self.D.conj().T
        self.A2 = np.abs(self.A) ** 2
        self.D2 = np.abs(self.D) ** 2

    @property
    def shape(self):
        return self.A.shape[0], self.A.shape[1], self.D.shape[1]


@dataclass
class Layer1State:
    c_hat: np.ndarray
    c_var: np.ndarray
    gamma_hat: np.ndarray
    c_ext_mean: np.ndarray
    c_ext_var: np.ndarray
    x_out_mean: np.ndarray
    x_out_var: np.ndarray
    # Onsager memory: scaled residual of the previous iteration
    s_x: np.ndarray
    # edge mode: precision and precision-weighted mean of every f_x -> c message (N x Q)
    edge_prec: np.ndarray | None = None
    edge_wmean: np.ndarray | None = None


@dataclass
class Layer2State:
    pi_out: np.ndarray
    pi_in: np.ndarray
    psi_f: np.ndarray
    psi_b: np.ndarray
    s_belief: np.ndarray
    psi_f0: float
    x_in_mean: np.ndarray
    x_in_var: np.ndarray


@dataclass
class Layer3State:
    t_hat: np.ndarray
    t_var: np.ndarray
    t_ext_mean: np.ndarray
    t_ext_var: np.ndarray
    z_ext_mean: np.ndarray
    z_ext_var: np.ndarray
    z_hat: np.ndarray
    z_var: np.ndarray
    beta_hat: float
    omega: np.ndarray
    s_z: np.ndarray
    edge_prec: np.ndarray | None = None
    edge_wmean: np.ndarray | None = None


@dataclass
class GampState:
    layer1: Layer1State
    layer2: Layer2State
    layer3: Layer3State
    iteration: int = 0


@dataclass
class SubchannelEstimate:
    t_hat: np.ndarray
    s_belief: np.ndarray
    c_hat: np.ndarray
    trace: list[float]
    iters_run: int
    converged: bool
    diverged: bool = False
    beta_hat: float = float("nan")
    t_var: np.ndarray | None = None
    history: list[np.ndarray] | None = None
    diagnostics: list[dict] = field(default_factory=list)
    seconds: float = 0.0


def _damp(new, old, rho):
    if rho >= 1:
        return new
    return rho * new + (1 - rho) * old


def init_state(ops: Operators, r: np.ndarray, config: GampConfig) -> GampState:
    """Initial messages: zero means, variances at a common scale ``v0``.

    ``v0`` defaults to the per-entry energy ``||r||^2 / ||A||_F^2``; the
    angular variances are rescaled by ``N_R / Q`` so that ``D c`` starts with
    the same per-entry variance as ``t``.
    """
    M, N, Q = ops.shape
    if config.init_var is None:
        v0 = float(np.vdot(r, r).real / max(ops.A2.sum(), config.var_floor))
        v0 = max(v0, config.var_floor)
    else:
        v0 = float(config.init_var)
    vc = v0 * N / Q
    zc = np.zeros(Q, dtype=complex)
    zn = np.zeros(N, dtype=complex)
    zm = np.zeros(M, dtype=complex)

    l1 = Layer1State(
        c_hat=zc.copy(),
        c_var=np.full(Q, vc),
        gamma_hat=np.full(Q, 1 / vc),
        c_ext_mean=zc.copy(),
        # no data has reached the coefficients yet
        c_ext_var=np.full(Q, 1e6 * vc),
        x_out_mean=zn.copy(),
        x_out_var=ops.D2 @ np.full(Q, vc),
        s_x=zn.copy(),
    )
    # seed the t-side extrinsic message with one linear pass from t_hat = 0 so
    # that the first layer-1/layer-2 updates see the data
    if config.beta_init is None:
        beta0 = float(M / max(np.vdot(r, r).real, config.var_floor))
    else:
        beta0 = float(config.beta_init)
    z_var0 = np.maximum(ops.A2 @ np.full(N, v0), config.var_floor)
    denom0 = 1 / beta0 + z_var0
    t_ext_var0 = 1 / np.maximum(ops.A2.T @ (1 / denom0), config.var_floor)
    t_ext_mean0 = t_ext_var0 * (ops.AH @ (r / denom0))

    l2 = Layer2State(
        pi_out=np.full(N, 0.5),
        pi_in=np.full(N, config.phi_init),
        psi_f=np.full(N, config.phi_init),
        psi_b=np.full(N, 0.5),
        s_belief=np.full(N, config.phi_init),
        psi_f0=config.phi_init,
        x_in_mean=t_ext_mean0.copy(),
        x_in_var=t_ext_var0.copy(),
    )
    l3 = Layer3State(
        t_hat=zn.copy(),
        t_var=np.full(N, v0),
        t_ext_mean=t_ext_mean0,
        t_ext_var=t_ext_var0,
        z_ext_mean=zm.copy(),
        z_ext_var=z_var0,
        z_hat=zm.copy(),
        z_var=np.zeros(M),
        beta_hat=beta0,
        omega=np.full(N, config.phi_init),
        s_z=r / denom0,
    )
    if config.mode == "edge_exact":
        # spread each combined message evenly across its N (resp. M) edges
        l1.edge_prec = np.full((N, Q), 1 / (N * vc))
        l1.edge_wmean = np.zeros((N, Q), dtype=complex)
        l3.edge_prec = np.full((M, N), 1 / (M * v0))
        l3.edge_wmean = np.zeros((M, N), dtype=complex)
    return GampState(l1, l2, l3)


def _check(layer, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteMessage(layer)


def layer1_update(l1: Layer1State, x_in_mean, x_in_var, ops: Operators, config: GampConfig) -> Layer1State:
    """Angular-domain layer: Gamma-precision update, coefficient posterior, and
    the messages to ``x`` (output) and back into ``c`` (extrinsic input).

    ``x_in_mean / x_in_var`` is the layer-2 message into ``x``, which equals
    the layer-3 extrinsic message on ``t``.
    """
    floor = config.var_floor
    rho = config.damping
    gamma = gamma_posterior(l1.c_hat, l1.c_var, config.xi, config.eta, floor)
    c_var = np.maximum(l1.c_ext_var / (1 + l1.c_ext_var * gamma), floor)
    c_hat = l1.c_ext_mean / (1 + gamma * l1.c_ext_var)

    # damping acts on the posterior mean and the scaled residual (both modes);
    # damping the variances too delays the precision updates and makes the
    # NMSE oscillate
    c_hat = _damp(c_hat, l1.c_hat, rho)
    if config.mode == "edge_exact":
        return _layer1_edge(l1, gamma, c_hat, c_var, x_in_mean, x_in_var, ops, config)

    x_var = np.maximum(ops.D2 @ c_var, floor)
    x_mean = ops.D @ c_hat
    if config.onsager:
        x_mean = x_mean - x_var * l1.s_x

    denom = np.maximum(x_in_var + x_var, floor)
    s_x = _damp((x_in_mean - x_mean) / denom, l1.s_x, rho)
    c_ext_var = 1 / np.maximum(ops.D2.T @ (1 / denom), floor)
    c_ext_mean = c_hat + c_ext_var * (ops.DH @ s_x)
    _check("layer1", c_hat, x_mean, c_ext_mean, c_ext_var)
    return Layer1State(c_hat, c_var, gamma, c_ext_mean, c_ext_var, x_mean, x_var, s_x)


def _edge_out(post_mean, post_var, edge_prec, edge_wmean, floor):
    """Extrinsic edge messages ``b / m_in`` in (mean, var) form, shape like edge_prec.

    Posterior quantities broadcast along axis 0 of the edge matrices.
    """
    # a posterior wider than an incoming edge message (possible for the
    # spike-and-slab belief) would give a negative variance
    prec = np.maximum(1 / post_var[None, :] - edge_prec, 1e-12 / post_var[None, :])
    var = 1 / prec
    mean = var * (post_mean[None, :] / post_var[None, :] - edge_wmean)
    return mean, var


def _layer1_edge(l1, gamma, c_hat, c_var, x_in_mean, x_in_var, ops, config):
    floor = config.var_floor
    rho = config.damping
    D, D2 = ops.D, ops.D2
    # messages c_q -> f_x_n, stored as (N, Q)
    cq_mean, cq_var = _edge_out(c_hat, c_var, l1.edge_prec, l1.edge_wmean, floor)
    x_mean = np.sum(D * cq_mean, axis=1)
    x_var = np.maximum(np.sum(D2 * cq_var, axis=1), floor)
    # messages f_x_n -> c_q in precision form
    cav_var = (x_in_var + x_var)[:, None] - D2 * cq_var
    cav_var = np.maximum(cav_var, floor)
    # the row residual is damped exactly as s_x is in the vectorized mode
    denom = np.maximum(x_in_var + x_var, floor)
    s_x = _damp((x_in_mean - x_mean) / denom, l1.s_x, rho)
    resid = (s_x * denom)[:, None] + D * cq_mean
    edge_prec = D2 / cav_var
    edge_wmean = D.conj() * resid / cav_var
    c_ext_var = 1 / np.maximum(edge_prec.sum(axis=0), floor)
    c_ext_mean = c_ext_var * edge_wmean.sum(axis=0)
    _check("layer1", c_hat, x_mean, c_ext_mean, c_ext_var)
    return Layer1State(c_hat, c_var, gamma, c_ext_mean, c_ext_var, x_mean, x_var, s_x, edge_prec, edge_wmean)


def layer2_update(
    l2: Layer2State,
    l1: Layer1State,
    l3: Layer3State,
    prior: MarkovPrior,
    config: GampConfig,
    fixed_pi_in: np.ndarray | None = None,
) -> Layer2State:
    """Visibility layer: chain messages, beliefs, and the Gaussian pass-through
    ``x_in = t_ext`` to layer 1.

    ``fixed_pi_in`` freezes the chain output (oracle masks or ablations); the
    beliefs then follow the frozen prior and the local evidence.
    """
    eps = config.prob_clamp
    pi_out = pi_out_compute(l3.t_ext_mean, l3.t_ext_var, l1.x_out_mean, l1.x_out_var, config.var_floor, eps)
    if fixed_pi_in is not None:
        pi_in = np.clip(fixed_pi_in, eps, 1 - eps)
        on = pi_in * pi_out
        belief = np.clip(on / (on + (1 - pi_in) * (1 - pi_out)), eps, 1 - eps)
        return Layer2State(pi_out, pi_in, l2.psi_f, l2.psi_b, belief, l2.psi_f0,
                           l3.t_ext_mean.copy(), l3.t_ext_var.copy())
    psi_f, psi_b = markov_forward_backward(pi_out, prior, l2.psi_f0, 0.5, eps)
    pi_in = pi_in_compute(psi_f, psi_b, eps)
    belief, psi_f0 = visibility_belief(psi_f, psi_b, pi_out, eps)
    psi_f0 = min(max(psi_f0, eps), 1 - eps)
    return Layer2State(pi_out, pi_in, psi_f, psi_b, belief, psi_f0, l3.t_ext_mean.copy(), l3.t_ext_var.copy())


def layer3_update(l3: Layer3State, l1: Layer1State, l2: Layer2State, r, ops: Operators, config: GampConfig) -> Layer3State:
    """Linear-mixing layer: noise precision, ``z`` posterior, extrinsic message
    on ``t``, and the spike-and-slab posterior of ``t``."""
    floor = config.var_floor
    rho = config.damping
    M = r.size

    if config.mode == "edge_exact":
        tm = _edge_out(l3.t_hat, l3.t_var, l3.edge_prec, l3.edge_wmean, floor)
        z_mean = np.sum(ops.A * tm[0], axis=1)
        z_var_ext = np.maximum(np.sum(ops.A2 * tm[1], axis=1), floor)
    else:
        z_var_ext = np.maximum(ops.A2 @ l3.t_var, floor)
        z_mean = ops.A @ l3.t_hat
        if config.onsager:
            z_mean = z_mean - z_var_ext * l3.s_z

    if not config.learn_noise:
        beta = l3.beta_hat
    else:
        if config.noise_update == "t_residual":
            resid_energy = np.sum(np.abs(r - ops.A @ l3.t_hat) ** 2 + ops.A2 @ l3.t_var)
        else:
            resid_energy = np.sum(np.abs(r - l3.z_hat) ** 2 + l3.z_var)
        beta = float(M / max(resid_energy, floor))
    z_var = z_var_ext / (1 + beta * z_var_ext)
    z_hat = z_var * (r * beta + z_mean / z_var_ext)

    if config.mode == "edge_exact":
        t_ext_mean, t_ext_var, s_z, edge_prec, edge_wmean = _layer3_edge_in(l3, tm, r, z_mean, z_var_ext, beta,
                                                                            ops, config)
    else:
        denom = 1 / beta + z_var_ext
        s_z = _damp((r - z_mean) / denom, l3.s_z, rho)
        t_ext_var = 1 / np.maximum(ops.A2.T @ (1 / denom), floor)
        t_ext_mean = l3.t_hat + t_ext_var * (ops.AH @ s_z)
        edge_prec = edge_wmean = None

    t_hat, t_var, omega = spike_slab_posterior(
        l2.pi_in, l1.x_out_mean, l1.x_out_var, t_ext_mean, t_ext_var, floor
    )
    t_hat = _damp(t_hat, l3.t_hat, rho)
    t_var = np.maximum(t_var, floor)
    _check("layer3", z_hat, t_ext_mean, t_ext_var, t_hat, t_var)
    return Layer3State(t_hat, t_var, t_ext_mean, t_ext_var, z_mean, z_var_ext, z_hat, z_var, beta, omega, s_z,
                       edge_prec, edge_wmean)


def _layer3_edge_in(l3, tm, r, z_mean, z_var, beta, ops, config):
    # tm: messages t_n -> f_z_m as (mean, var), each (M, N)
    floor = config.var_floor
    rho = config.damping
    tm_mean, tm_var = tm
    cav_var = np.maximum((1 / beta + z_var)[:, None] - ops.A2 * tm_var, floor)
    denom = 1 / beta + z_var
    s_z = _damp((r - z_mean) / denom, l3.s_z, rho)
    resid = (s_z * denom)[:, None] + ops.A * tm_mean
    edge_prec = ops.A2 / cav_var
    edge_wmean = ops.A.conj() * resid / cav_var
    t_ext_var = 1 / np.maximum(edge_prec.sum(axis=0), floor)
    t_ext_mean = t_ext_var * edge_wmean.sum(axis=0)
    return t_ext_mean, t_ext_var, s_z, edge_prec, edge_wmean


def gamp_iteration(state: GampState, r, ops: Operators, prior: MarkovPrior, config: GampConfig,
                   fixed_pi_in=None) -> GampState:
    """One pass over the three layers in the order 1 -> 2 -> 3."""
    if state.iteration == 0:
        # nothing computed yet to blend with
        config = replace(config, damping=1.0)
    l1 = layer1_update(state.layer1, state.layer2.x_in_mean, state.layer2.x_in_var, ops, config)
    l2 = layer2_update(state.layer2, l1, state.layer3, prior, config, fixed_pi_in)
    l3 = layer3_update(state.layer3, l1, l2, r, ops, config)
    # layer 1 of the next pass reads the freshest extrinsic message on t
    if config.x_feedback == "projected":
        xm, xv = x_feedback(l2.pi_in, l1.x_out_mean, l1.x_out_var, l3.t_ext_mean, l3.t_ext_var, config.var_floor)
    else:
        xm, xv = l3.t_ext_mean, l3.t_ext_var
    if state.iteration > 0:
        # damp in natural parameters: the projected message can be very wide
        prev_m, prev_v = state.layer2.x_in_mean, state.layer2.x_in_var
        prec = _damp(1 / xv, 1 / prev_v, config.damping)
        xm = _damp(xm / xv, prev_m / prev_v, config.damping) / prec
        xv = 1 / prec
    l2 = replace(l2, x_in_mean=xm, x_in_var=xv)
    return GampState(l1, l2, l3, state.iteration + 1)


def _nmse(est, truth):
    return float(np.sum(np.abs(est - truth) ** 2) / np.sum(np.abs(truth) ** 2))


def run_subchannel_estimation(
    obs,
    config: GampConfig | None = None,
    truth: np.ndarray | None = None,
    fixed_pi_in: np.ndarray | None = None,
    keep_history: bool = False,
) -> SubchannelEstimate:
    """Estimate one subchannel ``t`` (and its visibility beliefs) from ``obs``.

    ``obs`` provides ``r``, ``a_matrix`` and ``dictionary`` (see
    :class:`tlgamp.frontend.WhitenedObservation`). Iterates until the relative
    change of ``t_hat`` drops below ``config.tol`` or ``config.max_iter``
    passes. When ``truth`` is given, ``trace[k]`` is the NMSE of ``t_hat``
    after pass ``k + 1``.

    A non-finite message stops the run, as does an NMSE more than ten times
    the zero-estimate NMSE when the estimate also carries more than ten times
    the energy the observation supports (``||r||^2 N / ||A||_F^2``); the
    second condition keeps a noise-level estimate of a nearly empty
    subchannel from counting as a blow-up. The last accepted iterate is
    returned with ``diverged=True``.
    """
    config = config or GampConfig()
    config.validate()
    tic = time.perf_counter()
    r = np.asarray(obs.r, dtype=complex)
    ops = obs if isinstance(obs, Operators) else Operators(np.asarray(obs.a_matrix), np.asarray(obs.dictionary))
    prior = config.markov_prior()
    state = init_state(ops, r, config)

    trace: list[float] = []
    history: list[np.ndarray] | None = [] if keep_history else None
    diagnostics: list[dict] = []
    converged = diverged = False
    has_truth = truth is not None and np.any(truth)
    M, N, _ = ops.shape
    energy_cap = 10 * np.vdot(r, r).real * N / max(ops.A2.sum(), config.var_floor)
    for _ in range(config.max_iter):
        prev_t = state.layer3.t_hat
        try:
            new = gamp_iteration(state, r, ops, prior, config, fixed_pi_in)
        except NonFiniteMessage as exc:
            diverged = True
            diagnostics.append({"iteration": state.iteration + 1, "error": str(exc)})
            break
        if has_truth:
            err = _nmse(new.layer3.t_hat, truth)
            if err > 10.0 and np.vdot(new.layer3.t_hat, new.layer3.t_hat).real > energy_cap:
                diverged = True
                diagnostics.append({"iteration": new.iteration, "error": "nmse blow-up", "nmse": err})
                break
            trace.append(err)
        state = new
        if keep_history:
            history.append(state.layer3.t_hat.copy())
        diagnostics.append(
            {
                "iteration": state.iteration,
                "beta": state.layer3.beta_hat,
                "mean_belief": float(np.mean(state.layer2.s_belief)),
            }
        )
        change = np.linalg.norm(state.layer3.t_hat - prev_t)
        ref = np.linalg.norm(prev_t)
        if ref > 0 and change / ref < config.tol:
            converged = True
            break
        if ref == 0 and change == 0 and state.iteration > 1:
            converged = True
            break

    return SubchannelEstimate(
        t_hat=state.layer3.t_hat,
        s_belief=state.layer2.s_belief,
        c_hat=state.layer1.c_hat,
        trace=trace,
        iters_run=state.iteration,
        converged=converged,
        diverged=diverged,
        beta_hat=state.layer3.beta_hat,
        t_var=state.layer3.t_var,
        history=history,
        diagnostics=diagnostics,
        seconds=time.perf_counter() - tic,
    )


def assemble_full_channel(estimates, aods, geometry) -> np.ndarray:
    """``H_hat = sum_l t_hat_l a_T(psi_l)^H``."""
    estimates = list(estimates)
    aods = list(aods)
    if len(estimates) != len(aods):
        raise ValueError(f"{len(estimates)} estimates but {len(aods)} AoDs")
    H = np.zeros((geometry.n_rx, geometry.n_tx), dtype=complex)
    for est, psi in zip(estimates, aods):
        t = est.t_hat if isinstance(est, SubchannelEstimate) else np.asarray(est)
        H += np.outer(t, steer_tx(psi, geometry).conj())
    return H


def write_trace_csv(estimate: SubchannelEstimate, path):
    """Per-iteration dump: iteration, NMSE (dB, empty without truth), beta, mean belief."""
    rows = [d for d in estimate.diagnostics if "beta" in d]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "nmse_db", "beta_hat", "mean_belief"])
        for i, d in enumerate(rows):
            nmse_db = f"{10 * np.log10(max(estimate.trace[i], 1e-10)):.4f}" if i < len(estimate.trace) else ""
            w.writerow([d["iteration"], nmse_db, f"{d['beta']:.6g}", f"{d['mean_belief']:.6f}"])
