"""How the visible fraction of the array changes the estimate.

With a frozen visibility prior the estimator cannot localize the visible
block; the learned Markov chain can. At large fractions the channel is
spread over many angular bins (near-field curvature) and every angular
sparse prior loses accuracy, so the TL-GAMP curve is not flat here.

Run: python demos/visibility_size.py [n_trials]
"""

import sys

from tlgamp import ExperimentConfig, sweep

n_trials = int(sys.argv[1]) if len(sys.argv) > 1 else 20

cfg = ExperimentConfig().validate()
cfg.harness.n_trials = n_trials
cfg.protocol.aod_mode = "oracle"
cfg.harness.baselines = ["oracle_vr", "frozen_vr"]
res = sweep(cfg, "vr")
print(f"median NMSE (dB) at {cfg.protocol.snr_db:g} dB SNR, {n_trials} trials, known AoDs")
print(f"{'phi':>5s} " + " ".join(f"{e:>10s}" for e in res.estimators))
for v in res.values:
    print(f"{v:5g} " + " ".join(f"{res.median_db(v, e):10.2f}" for e in res.estimators))
