"""Reference estimators that bracket TL-GAMP.

* ``ls``: minimum-norm least squares per subchannel;
* ``oracle_vr``: TL-GAMP with the chain output frozen at the true mask;
* ``oracle_aod``: the standard pipeline fed with the true AoDs;
* ``oracle_both``: both of the above;
* ``frozen_vr``: ablation with the chain output frozen at a constant
  visible fraction (no spatial structure learned).
"""

from __future__ import annotations

import warnings

import numpy as np

from .gamp import GampConfig, SubchannelEstimate, run_subchannel_estimation

BASELINE_KINDS = ("ls", "oracle_vr", "oracle_aod", "oracle_both", "frozen_vr")


def ls_estimate(y, combiners, ridge: float = 1e-10):
    """Least-squares subchannel estimate from ``y = W^H h + n``.

    For ``M >= N_R`` this is ``(W W^H)^{-1} W y``; for ``M < N_R`` the Gram
    matrix is singular and the minimum-norm solution ``W (W^H W)^{-1} y`` is
    returned. A numerically singular Gram matrix gets a ``ridge`` and a
    warning.
    """
    W = combiners.stacked if hasattr(combiners, "stacked") else np.asarray(combiners)
    y = np.asarray(y)
    n_rx, M = W.shape
    if y.shape[0] != M:
        raise ValueError(f"y has {y.shape[0]} rows, combiners give M={M}")
    if M >= n_rx:
        G = W @ W.conj().T
        rhs = W @ y
    else:
        G = W.conj().T @ W
        rhs = y
    if np.linalg.cond(G) > 1e12:
        warnings.warn("singular Gram matrix in least squares; adding a ridge", RuntimeWarning)
        G = G + ridge * np.trace(G).real / G.shape[0] * np.eye(G.shape[0])
    sol = np.linalg.solve(G, rhs)
    return sol if M >= n_rx else W @ sol


def oracle_vr_run(obs, config: GampConfig | None, true_mask, truth=None, keep_history=False) -> SubchannelEstimate:
    """TL-GAMP with ``pi_in`` clamped to the true visibility mask."""
    mask = np.asarray(true_mask, dtype=float)
    return run_subchannel_estimation(obs, config, truth=truth, fixed_pi_in=mask, keep_history=keep_history)


def frozen_vr_run(obs, config: GampConfig | None, phi: float, truth=None, keep_history=False) -> SubchannelEstimate:
    """TL-GAMP with the chain disabled: ``pi_in`` held at ``phi`` everywhere."""
    n = np.asarray(obs.a_matrix).shape[1]
    return run_subchannel_estimation(
        obs, config, truth=truth, fixed_pi_in=np.full(n, float(phi)), keep_history=keep_history
    )
