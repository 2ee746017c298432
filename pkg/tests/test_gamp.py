from dataclasses import replace

import numpy as np
import pytest

from synthetic import nmse_db, subchannel_problem
from tlgamp.baselines import oracle_vr_run
from tlgamp.channel import ArrayGeometry, steer_tx
from tlgamp.gamp import (
    GampConfig,
    Operators,
    assemble_full_channel,
    gamp_iteration,
    init_state,
    layer1_update,
    layer3_update,
    run_subchannel_estimation,
    write_trace_csv,
)


def test_config_validation():
    GampConfig().validate()
    for bad in (dict(p10=0.0), dict(damping=0.0), dict(damping=1.5), dict(mode="exact"), dict(prob_clamp=0.0),
                dict(max_iter=0), dict(xi=0.0), dict(beta_init=-1.0), dict(x_feedback="x"), dict(noise_update="z")):
        with pytest.raises(ValueError):
            GampConfig(**bad).validate()


def test_infinite_precision_kills_coefficients():
    obs, h, *_ = subchannel_problem(seed=1)
    ops = Operators(obs.a_matrix, obs.dictionary)
    cfg = GampConfig(damping=1.0, eta=1e-300, var_floor=1e-300)
    l1 = init_state(ops, obs.r, cfg).layer1
    rng = np.random.default_rng(0)
    l1 = replace(l1, c_hat=np.zeros(128, complex), c_var=np.full(128, 1e-280),
                 c_ext_mean=rng.normal(size=128) + 1j * rng.normal(size=128), c_ext_var=np.ones(128))
    out = layer1_update(l1, h, np.ones(64), ops, cfg)
    assert np.max(np.abs(out.c_hat)) < 1e-200


def test_layer1_masked_subchannel_is_fixed_point():
    # unitary dictionary, noiseless input: D c = h must reproduce itself
    obs, h, *_ = subchannel_problem(n_rx=64, q_size=64, seed=2)
    ops = Operators(obs.a_matrix, obs.dictionary)
    cfg = GampConfig()
    c = ops.DH @ h
    v = np.full(64, 1e-12)
    l1 = replace(init_state(ops, obs.r, cfg).layer1, c_hat=c, c_var=v, c_ext_mean=c, c_ext_var=v,
                 s_x=np.zeros(64, complex))
    for _ in range(50):
        l1 = layer1_update(l1, h, np.full(64, 1e-12), ops, cfg)
    assert np.linalg.norm(ops.D @ l1.c_hat - h) / np.linalg.norm(h) <= 1e-6


def _state_after(obs, cfg, n):
    ops = Operators(obs.a_matrix, obs.dictionary)
    prior = cfg.markov_prior()
    state = init_state(ops, obs.r, cfg)
    for _ in range(n):
        state = gamp_iteration(state, obs.r, ops, prior, cfg)
    return state, ops


def test_noise_precision_from_z_posterior():
    obs, *_ = subchannel_problem(seed=3)
    cfg = GampConfig(noise_update="z_posterior")
    state, ops = _state_after(obs, cfg, 2)
    r = obs.r[:10]
    sub = Operators(ops.A[:10], ops.D)
    l3 = replace(state.layer3, z_hat=r.copy(), z_var=np.full(10, 0.1), z_ext_var=state.layer3.z_ext_var[:10],
                 s_z=state.layer3.s_z[:10])
    out = layer3_update(l3, state.layer1, state.layer2, r, sub, cfg)
    assert out.beta_hat == pytest.approx(10.0)


def test_layer3_noiseless_known_t():
    rng = np.random.default_rng(0)
    A = np.linalg.qr(rng.normal(size=(64, 16)) + 1j * rng.normal(size=(64, 16)))[0].T.conj()
    t = rng.normal(size=64) + 1j * rng.normal(size=64)
    r = A @ t
    D = np.eye(64, dtype=complex)
    ops = Operators(A, D)
    cfg = GampConfig(learn_noise=False, beta_init=1e12, damping=1.0)
    state = init_state(ops, r, cfg)
    l3 = replace(state.layer3, t_hat=t, t_var=np.full(64, 1e-14), s_z=np.zeros(16, complex))
    out = layer3_update(l3, state.layer1, state.layer2, r, ops, cfg)
    np.testing.assert_allclose(out.z_hat, A @ t, atol=1e-9)
    assert np.linalg.norm(r - out.z_hat) < 1e-9


def test_zero_observation_gives_zero_estimate():
    obs, *_ = subchannel_problem(seed=4)
    est = run_subchannel_estimation(replace(obs, r=np.zeros_like(obs.r)), GampConfig())
    assert not est.diverged
    assert np.max(np.abs(est.t_hat)) < 1e-12


def test_noiseless_on_grid_far_field():
    obs, h, *_ = subchannel_problem(n_rx=256, n_slots=16, q_size=512, snr_db=40.0, phi=1.0, seed=1,
                                    on_grid=True, noiseless=True)
    est = run_subchannel_estimation(obs, GampConfig(), truth=h)
    assert nmse_db(est.t_hat, h) < -40
    assert est.iters_run <= 20 and len(est.trace) == est.iters_run


@pytest.mark.parametrize("mode", ["vectorized_approx", "edge_exact"])
def test_message_invariants(mode):
    obs, h, *_ = subchannel_problem(seed=5)
    cfg = GampConfig(mode=mode)
    ops = Operators(obs.a_matrix, obs.dictionary)
    prior = cfg.markov_prior()
    state = init_state(ops, obs.r, cfg)
    eps = cfg.prob_clamp
    for _ in range(15):
        prev = state
        state = gamp_iteration(state, obs.r, ops, prior, cfg)
        l1, l2, l3 = state.layer1, state.layer2, state.layer3
        # Gaussian products only contract
        assert np.all(l1.c_var <= prev.layer1.c_ext_var * (1 + 1e-12))
        assert np.all(l3.z_var <= l3.z_ext_var * (1 + 1e-12))
        for p in (l2.pi_out, l2.pi_in, l2.s_belief):
            assert p.min() >= eps and p.max() <= 1 - eps
        for v in (l1.c_var, l1.x_out_var, l3.t_var, l3.t_ext_var, l3.z_ext_var):
            assert v.min() >= cfg.var_floor
        assert l3.beta_hat > 0
        for a in (l1.c_hat, l3.t_hat, l2.x_in_mean):
            assert np.all(np.isfinite(a))


def test_permutation_equivariance_with_oracle_visibility():
    obs, h, mask, *_ = subchannel_problem(seed=6)
    perm = np.random.default_rng(0).permutation(64)
    a = oracle_vr_run(obs, GampConfig(), mask)
    moved = replace(obs, a_matrix=obs.a_matrix[:, perm], dictionary=obs.dictionary[perm])
    b = oracle_vr_run(moved, GampConfig(), mask[perm])
    np.testing.assert_allclose(b.s_belief, a.s_belief[perm], atol=1e-9)
    np.testing.assert_allclose(b.t_hat, a.t_hat[perm], atol=1e-9 * np.abs(a.t_hat).max())


def test_onsager_correction_helps():
    with_c, without = [], []
    for s in range(50):
        obs, h, *_ = subchannel_problem(seed=100 + s)
        with_c.append(nmse_db(run_subchannel_estimation(obs, GampConfig()).t_hat, h))
        without.append(nmse_db(run_subchannel_estimation(obs, GampConfig(onsager=False)).t_hat, h))
    assert np.median(with_c) <= np.median(without)


@pytest.mark.filterwarnings("ignore:invalid value:RuntimeWarning")
def test_non_finite_input_flags_divergence():
    obs, h, *_ = subchannel_problem(seed=7)
    bad = obs.r.copy()
    bad[0] = np.nan
    est = run_subchannel_estimation(replace(obs, r=bad), GampConfig(), truth=h)
    assert est.diverged and est.iters_run == 0
    assert "non-finite" in est.diagnostics[-1]["error"]


def test_history_and_trace_csv(tmp_path):
    obs, h, *_ = subchannel_problem(seed=8)
    est = run_subchannel_estimation(obs, GampConfig(max_iter=5, tol=0), truth=h, keep_history=True)
    assert len(est.history) == 5 == est.iters_run and not est.converged
    np.testing.assert_array_equal(est.history[-1], est.t_hat)
    p = tmp_path / "trace.csv"
    write_trace_csv(est, p)
    lines = p.read_text().splitlines()
    assert lines[0] == "iteration,nmse_db,beta_hat,mean_belief" and len(lines) == 6


def test_edge_mode_runs_and_tracks_vectorized():
    obs, h, *_ = subchannel_problem(seed=9)
    a = run_subchannel_estimation(obs, GampConfig(), truth=h)
    b = run_subchannel_estimation(obs, GampConfig(mode="edge_exact"), truth=h)
    assert not b.diverged
    assert abs(nmse_db(a.t_hat, h) - nmse_db(b.t_hat, h)) < 1.0


def test_assemble_full_channel():
    g = ArrayGeometry.from_carrier(64, 16, 30e9)
    rng = np.random.default_rng(0)
    h = rng.normal(size=64) + 1j * rng.normal(size=64)
    H = np.outer(h, steer_tx(0.3, g).conj())
    np.testing.assert_array_equal(assemble_full_channel([h], [0.3], g), H)
    assert not np.any(assemble_full_channel([np.zeros(64)] * 2, [0.1, 0.2], g))
    with pytest.raises(ValueError):
        assemble_full_channel([h], [0.1, 0.2], g)


def test_full_channel_error_is_power_weighted_path_error():
    # orthogonal AoDs: spatial frequencies on the N_T-point grid
    g = ArrayGeometry.from_carrier(64, 16, 30e9)
    aods = np.arcsin(np.array([-0.75, -0.25, 0.125, 0.5]))
    rng = np.random.default_rng(1)
    full, weighted = [], []
    for _ in range(20):
        hs = [rng.normal(scale=s, size=64) + 1j * rng.normal(scale=s, size=64) for s in (1.0, 0.5, 2.0, 0.3)]
        errs = []
        for h in hs:
            e = rng.normal(size=64) + 1j * rng.normal(size=64)
            errs.append(e * np.sqrt(0.01) * np.linalg.norm(h) / np.linalg.norm(e))
        H = assemble_full_channel(hs, aods, g)
        Hh = assemble_full_channel([h + e for h, e in zip(hs, errs)], aods, g)
        full.append(np.sum(np.abs(Hh - H) ** 2) / np.sum(np.abs(H) ** 2))
        weighted.append(sum(np.sum(np.abs(e) ** 2) for e in errs) / sum(np.sum(np.abs(h) ** 2) for h in hs))
    assert abs(10 * np.log10(np.mean(full) / np.mean(weighted))) < 1.0
