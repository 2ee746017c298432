"""Seeded Monte Carlo trials and parameter sweeps.

A trial draws one channel, runs both pilot phases, applies every requested
estimator to the same observations and scores the full-channel estimates.
Trial ``i`` of a run with ``base_seed`` always uses the same seed, whatever
the sweep point, so sweep curves share channel and noise draws across points
and across estimators.
"""

from __future__ import annotations

import csv
import io
import json
import os
import platform
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy
from scipy.optimize import linear_sum_assignment

from .baselines import BASELINE_KINDS, frozen_vr_run, ls_estimate, oracle_vr_run
from .channel import ScenarioConfig, make_scenario
from .frontend import (
    UnitaryTransform,
    beam_align_observe,
    build_dictionary,
    cached_svd_transform,
    calibrate_noise_variance,
    estimate_aods_grid,
    gen_combiners,
    measurement_matrix,
    noise_model,
    phase1_beams,
    phase2_beams,
    sample_combined_noise,
    svd_transform,
    unitary_transform,
    whiten,
    wrap_frequency,
)
from .gamp import GampConfig, assemble_full_channel, run_subchannel_estimation

NMSE_FLOOR_DB = -100.0
SWEEP_AXES = ("snr", "vr", "pilot", "distance", "iterations")
BEAM_MODES = ("aligned", "decoupled")
AOD_MODES = ("estimated", "oracle")
CSV_COLUMNS = ("axis_value", "estimator", "median_db", "p10_db", "p90_db", "n", "mean_db", "n_diverged")


@dataclass
class ProtocolConfig:
    n_slots: int = 16
    n_rf: int = 8
    # optional declared pilot length M; must equal n_slots * n_rf when given
    pilot_length: int | None = None
    # Phase-I subframes; None gives 3 per path
    p0: int | None = None
    snr_db: float = 10.0
    beam_mode: str = "decoupled"
    # diagonal loading of the decoupling beams (relative to ||a_T||^2 = 1)
    beam_loading: float = 0.05
    aod_mode: str = "estimated"
    # dictionary size; None gives 2 * n_rx
    q_size: int | None = None
    aod_grid: int | None = None
    svd_cache: str | None = None

    @property
    def n_meas(self) -> int:
        return self.n_slots * self.n_rf

    def validate(self, scenario: ScenarioConfig):
        if self.n_slots < 1 or self.n_rf < 1:
            raise ValueError("protocol.n_slots and protocol.n_rf must be >= 1")
        if self.pilot_length is not None and self.pilot_length != self.n_meas:
            raise ValueError(
                f"protocol.pilot_length = {self.pilot_length} must equal n_slots * n_rf = "
                f"{self.n_slots} * {self.n_rf} = {self.n_meas}"
            )
        if self.n_meas > scenario.n_rx:
            raise ValueError(f"M = K * N_RF = {self.n_meas} exceeds n_rx = {scenario.n_rx}")
        if self.p0 is not None and self.p0 < scenario.n_paths:
            raise ValueError(f"protocol.p0 = {self.p0} is below the number of paths {scenario.n_paths}")
        if self.beam_mode not in BEAM_MODES:
            raise ValueError(f"protocol.beam_mode must be one of {BEAM_MODES}, got {self.beam_mode!r}")
        if self.aod_mode not in AOD_MODES:
            raise ValueError(f"protocol.aod_mode must be one of {AOD_MODES}, got {self.aod_mode!r}")
        if self.beam_loading < 0:
            raise ValueError("protocol.beam_loading must be non-negative")
        if self.q_size is not None and self.q_size < scenario.n_rx:
            raise ValueError(f"protocol.q_size must be at least n_rx = {scenario.n_rx}")


@dataclass
class HarnessConfig:
    n_trials: int = 100
    base_seed: int = 0
    baselines: list[str] = field(default_factory=lambda: ["ls", "oracle_vr"])
    # worker processes; None uses every logical core
    workers: int | None = None
    vr_threshold: float = 0.5

    def validate(self):
        if self.n_trials < 1:
            raise ValueError("harness.n_trials must be >= 1")
        bad = [b for b in self.baselines if b not in BASELINE_KINDS]
        if bad:
            raise ValueError(f"unknown baseline(s) {bad}; expected a subset of {BASELINE_KINDS}")
        if self.workers is not None and self.workers < 1:
            raise ValueError("harness.workers must be >= 1")
        if not 0 < self.vr_threshold < 1:
            raise ValueError("harness.vr_threshold must lie in (0, 1)")


@dataclass
class SweepConfig:
    snr: list[float] = field(default_factory=lambda: [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0])
    vr: list[float] = field(default_factory=lambda: [0.2, 0.4, 0.6, 0.8, 1.0])
    pilot: list[int] = field(default_factory=lambda: [48, 64, 96, 128, 160, 192])
    distance: list[float] = field(default_factory=lambda: [2.0, 4.0, 6.0, 8.0, 10.0])
    # fixed operating point of the distance sweep
    distance_pilot: int = 96
    distance_snr: float = 10.0

    def values(self, axis: str, gamp: GampConfig) -> list:
        if axis == "iterations":
            return list(range(1, gamp.max_iter + 1))
        return list(getattr(self, axis))

    def validate(self):
        for axis in ("snr", "vr", "pilot", "distance"):
            if not getattr(self, axis):
                raise ValueError(f"sweep.{axis} must not be empty")
        if any(not 0 < v <= 1 for v in self.vr):
            raise ValueError("sweep.vr values must lie in (0, 1]")
        if any(d <= 0 for d in self.distance):
            raise ValueError("sweep.distance values must be positive")


@dataclass
class ExperimentConfig:
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    protocol: ProtocolConfig = field(default_factory=ProtocolConfig)
    gamp: GampConfig = field(default_factory=GampConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validate(self):
        self.scenario.validate()
        self.protocol.validate(self.scenario)
        self.gamp.validate()
        self.harness.validate()
        self.sweep.validate()
        if self.protocol.n_meas % self.protocol.n_rf:
            raise ValueError("M must equal K * N_RF")
        return self

    def validate_axis(self, axis: str):
        """Checks that only matter when sweeping ``axis``."""
        if axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
        lengths = {"pilot": self.sweep.pilot, "distance": [self.sweep.distance_pilot]}.get(axis, [])
        for m in lengths:
            if m % self.protocol.n_rf:
                raise ValueError(f"pilot length {m} is not a multiple of N_RF = {self.protocol.n_rf}")
            if m > self.scenario.n_rx:
                raise ValueError(f"pilot length {m} exceeds n_rx = {self.scenario.n_rx}")

    @property
    def estimators(self) -> list[str]:
        return ["tl_gamp"] + [b for b in self.harness.baselines if b != "tl_gamp"]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrialResult:
    seed: int
    nmse_db: dict[str, float]
    diverged: dict[str, bool]
    vr_accuracy: list[float]
    vr_precision: list[float]
    vr_recall: list[float]
    # full-channel NMSE (dB) of TL-GAMP after each pass, padded to max_iter
    trace_db: list[float]
    iterations: list[int]
    n_missing_aods: int
    noise_variance: float
    wall_time: float
    # per-path estimates of the TL-GAMP run (kept for dumps, not for sweeps)
    details: dict | None = None


@dataclass
class SweepResult:
    axis: str
    values: list
    estimators: list[str]
    rows: list[dict]
    seeds: list[int]
    wall_time: float = 0.0
    trials: dict | None = None

    def row(self, value, estimator) -> dict:
        for r in self.rows:
            if r["axis_value"] == value and r["estimator"] == estimator:
                return r
        raise KeyError((value, estimator))

    def median_db(self, value, estimator="tl_gamp") -> float:
        return self.row(value, estimator)["median_db"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([
                _fmt_axis(r["axis_value"]), r["estimator"], _fmt_db(r["median_db"]), _fmt_db(r["p10_db"]),
                _fmt_db(r["p90_db"]), r["n"], _fmt_db(r["mean_db"]), r["n_diverged"],
            ])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(self.to_csv())


def _fmt_axis(v) -> str:
    return f"{v:g}" if isinstance(v, float) else str(v)


def _fmt_db(x: float) -> str:
    return f"{x:.4f}"


def nmse(H_hat, H) -> float:
    """``||H_hat - H||_F^2 / ||H||_F^2`` (linear)."""
    H_hat = np.asarray(H_hat)
    H = np.asarray(H)
    if H_hat.shape != H.shape:
        raise ValueError(f"shape mismatch {H_hat.shape} vs {H.shape}")
    ref = np.sum(np.abs(H) ** 2)
    if ref == 0:
        raise ValueError("NMSE undefined for an all-zero reference")
    return float(np.sum(np.abs(H_hat - H) ** 2) / ref)


def to_db(x: float) -> float:
    if x <= 0:
        return NMSE_FLOOR_DB
    return max(10 * np.log10(x), NMSE_FLOOR_DB)


def vr_metrics(s_belief, true_mask, threshold: float = 0.5):
    """Accuracy, precision and recall of ``s_belief > threshold`` against the mask.

    Precision is 1 when nothing is declared visible; recall is 1 when nothing
    is visible.
    """
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    pred = np.asarray(s_belief) > threshold
    mask = np.asarray(true_mask).astype(bool)
    tp = np.count_nonzero(pred & mask)
    acc = float(np.mean(pred == mask))
    prec = tp / pred.sum() if pred.any() else 1.0
    rec = tp / mask.sum() if mask.any() else 1.0
    return acc, float(prec), float(rec)


def trial_seed(base_seed: int, index: int) -> int:
    """Seed of trial ``index``; independent of the sweep point by design."""
    return int(np.random.SeedSequence([base_seed, index]).generate_state(1, np.uint64)[0])


def _match_paths(est_aods, true_aods):
    """Pair each estimated AoD with a distinct true path (by spatial frequency)."""
    cost = np.abs(wrap_frequency(np.sin(np.asarray(est_aods))[:, None] - np.sin(np.asarray(true_aods))[None, :]))
    rows, cols = linear_sum_assignment(cost)
    order = np.empty(len(est_aods), dtype=int)
    order[rows] = cols
    return order


def _observations(H, aods, combiners, geometry, noise2, noise, transform, D, pc):
    ys = beam_align_observe(H, aods, combiners, geometry, noise2[:, : len(aods)], pc.beam_mode, pc.beam_loading)
    obs = [unitary_transform(whiten(y, noise), None, D, transform) for y in ys]
    return ys, obs


def _gamp_channel(obs, aods, geometry, config, truths, fixed=None, keep_history=False):
    ests = []
    for l, o in enumerate(obs):
        kw = dict(truth=truths[l], keep_history=keep_history)
        if fixed is None:
            ests.append(run_subchannel_estimation(o, config, **kw))
        else:
            ests.append(fixed(o, l, kw))
    return ests, assemble_full_channel(ests, aods, geometry)


def _history_trace(ests, aods, geometry, H, max_iter):
    trace = []
    for k in range(max_iter):
        ts = [e.history[min(k, len(e.history) - 1)] if e.history else e.t_hat for e in ests]
        trace.append(to_db(nmse(assemble_full_channel(ts, aods, geometry), H)))
    return trace


def run_trial(config: ExperimentConfig, seed: int, keep_details: bool = False) -> TrialResult:
    """One Monte Carlo trial; deterministic in ``(config, seed)``."""
    tic = time.perf_counter()
    sc, pc, gc = config.scenario, config.protocol, config.gamp
    ss_chan, ss_comb, ss_beam, ss_n1, ss_n2 = np.random.SeedSequence(seed).spawn(5)
    ch = make_scenario(sc, ss_chan)
    geometry = sc.geometry()
    H = ch.matrix
    true_aods = ch.aods
    L = ch.n_paths
    combiners = gen_combiners(pc.n_slots, geometry, pc.n_rf, ss_comb)
    W = combiners.stacked
    M = combiners.n_meas

    # noise level from the receive SNR of the Phase-II subframes on the true AoDs
    F_true, scale_true = phase2_beams(true_aods, geometry, pc.beam_mode, pc.beam_loading)
    signal = float(np.mean(np.sum(np.abs(W.conj().T @ H @ F_true) ** 2, axis=0)))
    sigma2 = calibrate_noise_variance(signal, M, pc.snr_db)
    noise = noise_model(combiners, sigma2)
    noise2 = sample_combined_noise(combiners, sigma2, ss_n2, n=L)

    n_missing = 0
    if pc.aod_mode == "oracle":
        aods = true_aods.copy()
    else:
        p0 = pc.p0 if pc.p0 is not None else 3 * L
        F0 = phase1_beams(sc.n_tx, p0, ss_beam)
        Y0 = W.conj().T @ H @ F0 + sample_combined_noise(combiners, sigma2, ss_n1, n=p0)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            aods, n_missing = estimate_aods_grid(Y0, F0, L, sc.n_tx, pc.aod_grid)
    match = _match_paths(aods, true_aods)

    q = pc.q_size if pc.q_size is not None else 2 * sc.n_rx
    D = build_dictionary(sc.n_rx, q)
    P = measurement_matrix(combiners, noise)
    if pc.svd_cache:
        # P scales as 1/sigma, so cache the unit-variance factorization
        unit = cached_svd_transform(P * np.sqrt(sigma2), pc.svd_cache, f"{seed}_{pc.n_slots}_{sc.n_rx}_{pc.n_rf}")
        transform = UnitaryTransform(unit.U, unit.s / np.sqrt(sigma2), unit.Vh, unit.rank_deficient)
    else:
        transform = svd_transform(P)

    ys, obs = _observations(H, aods, combiners, geometry, noise2, noise, transform, D, pc)
    # what each Phase-II observation carries without noise (h_l itself for
    # decoupled beams on exact AoDs)
    F_est, scale_est = phase2_beams(aods, geometry, pc.beam_mode, pc.beam_loading)
    truths = list((H @ F_est * scale_est[None, :]).T)
    masks = [ch.paths[j].visibility.mask for j in match]

    nmse_db: dict[str, float] = {}
    diverged: dict[str, bool] = {}

    ests, H_tl = _gamp_channel(obs, aods, geometry, gc, truths, keep_history=True)
    nmse_db["tl_gamp"] = to_db(nmse(H_tl, H))
    diverged["tl_gamp"] = any(e.diverged for e in ests)
    trace = _history_trace(ests, aods, geometry, H, gc.max_iter)
    vr = [vr_metrics(e.s_belief, m, config.harness.vr_threshold) for e, m in zip(ests, masks)]

    oracle_obs = None
    for kind in config.harness.baselines:
        if kind == "ls":
            hs = [ls_estimate(y, combiners) for y in ys]
            nmse_db[kind] = to_db(nmse(assemble_full_channel(hs, aods, geometry), H))
            diverged[kind] = False
            continue
        if kind in ("oracle_aod", "oracle_both"):
            if oracle_obs is None:
                _, oracle_obs = _observations(H, true_aods, combiners, geometry, noise2, noise, transform, D, pc)
            use_obs, use_aods = oracle_obs, true_aods
            use_truths = list((H @ F_true * scale_true[None, :]).T)
            use_masks = ch.masks()
        else:
            use_obs, use_aods, use_truths, use_masks = obs, aods, truths, masks
        if kind in ("oracle_vr", "oracle_both"):
            def fixed(o, l, kw, m=use_masks):
                return oracle_vr_run(o, gc, m[l], **kw)
        elif kind == "frozen_vr":
            def fixed(o, l, kw):
                return frozen_vr_run(o, gc, min(sc.phi, 1.0), **kw)
        else:
            fixed = None
        e2, H2 = _gamp_channel(use_obs, use_aods, geometry, gc, use_truths, fixed)
        nmse_db[kind] = to_db(nmse(H2, H))
        diverged[kind] = any(e.diverged for e in e2)

    details = None
    if keep_details:
        details = {
            "estimates": ests,
            "aods": np.asarray(aods),
            "truths": truths,
            "masks": masks,
            "H": H,
            "H_hat": H_tl,
        }
    return TrialResult(
        seed=int(seed),
        nmse_db=nmse_db,
        diverged=diverged,
        vr_accuracy=[v[0] for v in vr],
        vr_precision=[v[1] for v in vr],
        vr_recall=[v[2] for v in vr],
        trace_db=trace,
        iterations=[e.iters_run for e in ests],
        n_missing_aods=int(n_missing),
        noise_variance=float(sigma2),
        wall_time=time.perf_counter() - tic,
        details=details,
    )


def point_config(config: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    """The configuration of one sweep point."""
    sc, pc = config.scenario, config.protocol
    if axis == "snr":
        pc = replace(pc, snr_db=float(value))
    elif axis == "vr":
        sc = replace(sc, phi=float(value), phi_range=None)
    elif axis == "pilot":
        pc = replace(pc, n_slots=int(value) // pc.n_rf, pilot_length=None)
    elif axis == "distance":
        sc = replace(sc, distance_min=float(value), distance_max=float(value))
        pc = replace(pc, n_slots=config.sweep.distance_pilot // pc.n_rf, pilot_length=None,
                     snr_db=config.sweep.distance_snr)
    elif axis == "iterations":
        pass
    else:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    return replace(config, scenario=sc, protocol=pc)


def _run_item(item):
    cfg, seed = item
    return run_trial(cfg, seed)


def run_trials(config: ExperimentConfig, seeds, workers: int = 1) -> list[TrialResult]:
    """Run ``config`` once per seed, in seed order (parallel when ``workers > 1``)."""
    items = [(config, s) for s in seeds]
    if workers <= 1 or len(items) < 2:
        return [_run_item(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map preserves input order, so the reduction below is order-stable
        return list(pool.map(_run_item, items, chunksize=max(1, len(items) // (4 * workers))))


def _summary(values_db, n_div):
    arr = np.asarray(values_db, dtype=float)
    lin = 10 ** (arr / 10)
    return {
        "median_db": float(np.median(arr)),
        "p10_db": float(np.percentile(arr, 10)),
        "p90_db": float(np.percentile(arr, 90)),
        "n": int(arr.size),
        "mean_db": to_db(float(np.mean(lin))),
        "n_diverged": int(n_div),
    }


def sweep(config: ExperimentConfig, axis: str, workers: int | None = None, keep_trials: bool = False) -> SweepResult:
    """Aggregate ``n_trials`` trials at every point of ``axis``.

    The ``iterations`` axis runs the base point once and reports the TL-GAMP
    full-channel NMSE after each pass.
    """
    config.validate()
    config.validate_axis(axis)
    tic = time.perf_counter()
    workers = config.harness.workers if workers is None else workers
    if workers is None:
        workers = os.cpu_count() or 1
    seeds = [trial_seed(config.harness.base_seed, i) for i in range(config.harness.n_trials)]
    values = config.sweep.values(axis, config.gamp)
    rows: list[dict] = []
    kept = {} if keep_trials else None

    if axis == "iterations":
        trials = run_trials(config, seeds, workers)
        estimators = ["tl_gamp"]
        for k in values:
            vals = [t.trace_db[k - 1] for t in trials]
            rows.append({"axis_value": k, "estimator": "tl_gamp",
                         **_summary(vals, sum(t.diverged["tl_gamp"] for t in trials))})
        if keep_trials:
            kept["base"] = trials
    else:
        estimators = config.estimators
        for v in values:
            trials = run_trials(point_config(config, axis, v), seeds, workers)
            if keep_trials:
                kept[v] = trials
            for est in estimators:
                rows.append({"axis_value": v, "estimator": est,
                             **_summary([t.nmse_db[est] for t in trials],
                                        sum(t.diverged[est] for t in trials))})
    return SweepResult(axis, values, estimators, rows, seeds, time.perf_counter() - tic, kept)


def run_manifest(config: ExperimentConfig, result: SweepResult | None = None, outputs=None, extra=None) -> dict:
    """JSON-serializable record of a run: config echo, seeds, versions, timing."""
    from . import __version__
    from .config import format_config

    m = {
        "artifact_version": __version__,
        "config": format_config(config),
        "base_seed": config.harness.base_seed,
        "versions": {"python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__},
        "created_unix": time.time(),
    }
    if result is not None:
        m.update({"axis": result.axis, "axis_values": list(result.values), "estimators": result.estimators,
                  "trial_seeds": result.seeds, "wall_time_s": result.wall_time})
    if outputs:
        m["outputs"] = {k: str(v) for k, v in outputs.items()}
    if extra:
        m.update(extra)
    return m


def write_manifest(path, manifest: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
