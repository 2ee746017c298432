"""Pilot transmission, combining, whitening and the angular dictionary.

The base station combines each pilot subframe with ``K`` random
constant-modulus analog combiners ``W_k`` (``N_R x N_RF`` each), giving
``M = K * N_RF`` measurements per subframe::

    y_p = W^H H f_p + nbar_p,   cov(nbar_p) = blkdiag(sigma^2 W_k^H W_k)

Phase I observes ``P_0`` subframes with random DFT transmit beams and
estimates the AoDs. Phase II sends one subframe per path with the beam
steered to the estimated AoD, which isolates that path's receive-side
subchannel up to cross-path leakage.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.optimize import minimize_scalar

from .channel import ArrayGeometry, steer_tx


@dataclass(frozen=True)
class CombinerSet:
    per_slot: tuple[np.ndarray, ...]

    @property
    def stacked(self) -> np.ndarray:
        """``W``, shape ``(N_R, M)``; slot ``k`` occupies columns ``k*N_RF:(k+1)*N_RF``."""
        return np.concatenate(self.per_slot, axis=1)

    @property
    def n_slots(self) -> int:
        return len(self.per_slot)

    @property
    def n_rf(self) -> int:
        return self.per_slot[0].shape[1]

    @property
    def n_meas(self) -> int:
        return self.n_slots * self.n_rf


def gen_combiners(K: int, geometry: ArrayGeometry, n_rf: int, rng_seed=None) -> CombinerSet:
    """Random analog combiners with entries uniform over ``{+-1/sqrt(N_R)}``."""
    if K < 1 or n_rf < 1:
        raise ValueError("need at least one slot and one RF chain")
    rng = np.random.default_rng(rng_seed)
    signs = rng.integers(0, 2, size=(K, geometry.n_rx, n_rf)) * 2 - 1
    W = signs / np.sqrt(geometry.n_rx)
    return CombinerSet(tuple(W.astype(complex)))


@dataclass(frozen=True)
class NoiseModel:
    """Combined-noise statistics for one combiner set.

    ``chol`` is the lower Cholesky factor ``B`` of ``covariance`` (computed
    block by block since ``covariance`` is block diagonal).
    """

    variance: float
    covariance: np.ndarray
    chol: np.ndarray
    slot_size: int

    def whitener(self) -> np.ndarray:
        """``B^{-1}`` as a dense matrix."""
        return linalg.solve_triangular(self.chol, np.eye(self.chol.shape[0]), lower=True)

    def sample(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        """Draw combined noise vectors (one per column when ``n`` is given)."""
        shape = (self.chol.shape[0],) if n is None else (self.chol.shape[0], n)
        w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)
        return self.chol @ w


def noise_model(combiners: CombinerSet, variance: float) -> NoiseModel:
    if variance <= 0:
        raise ValueError("noise variance must be positive")
    blocks = [variance * (Wk.conj().T @ Wk) for Wk in combiners.per_slot]
    try:
        chols = [linalg.cholesky(b, lower=True) for b in blocks]
    except linalg.LinAlgError as exc:
        raise linalg.LinAlgError(
            "combined-noise covariance is not positive definite; the combiner set is ill-formed"
        ) from exc
    return NoiseModel(variance, linalg.block_diag(*blocks), linalg.block_diag(*chols), combiners.n_rf)


def sample_combined_noise(combiners: CombinerSet, variance: float, rng, n: int | None = None):
    """Combined noise drawn the physical way: ``W_k^H n_k`` with white ``n_k``."""
    rng = np.random.default_rng(rng)
    W = combiners.stacked
    n_rx, M = W.shape
    cols = 1 if n is None else n
    out = np.empty((M, cols), dtype=complex)
    for k, Wk in enumerate(combiners.per_slot):
        nk = np.sqrt(variance / 2) * (
            rng.standard_normal((n_rx, cols)) + 1j * rng.standard_normal((n_rx, cols))
        )
        out[k * combiners.n_rf:(k + 1) * combiners.n_rf] = Wk.conj().T @ nk
    return out[:, 0] if n is None else out


def simulate_subframe(H, f_p, combiners: CombinerSet, noise_variance: float, rng_seed=None):
    """One received pilot subframe ``W^H H f_p + nbar`` (pilot symbols are 1)."""
    H = np.asarray(H)
    f_p = np.asarray(f_p)
    W = combiners.stacked
    if H.shape[0] != W.shape[0] or H.shape[1] != f_p.shape[0]:
        raise ValueError(f"shape mismatch: H {H.shape}, f_p {f_p.shape}, W {W.shape}")
    clean = W.conj().T @ (H @ f_p)
    if noise_variance == 0:
        return clean
    return clean + sample_combined_noise(combiners, noise_variance, rng_seed)


def receive_snr_db(H, f_p, combiners: CombinerSet, noise_draws) -> float:
    """Receive SNR of one subframe against realized combined noise."""
    W = combiners.stacked
    signal = np.linalg.norm(W.conj().T @ (np.asarray(H) @ np.asarray(f_p))) ** 2
    if signal == 0:
        raise ValueError("zero signal power; SNR undefined")
    return float(10 * np.log10(signal / np.linalg.norm(noise_draws) ** 2))


def calibrate_noise_variance(signal_power: float, n_meas: int, snr_db: float) -> float:
    """Noise variance giving the target SNR against the expected noise power.

    Each combiner column has unit norm, so ``E||nbar_p||^2 = sigma^2 M`` and
    the mapping is closed form.
    """
    if signal_power <= 0:
        raise ValueError("zero signal power; SNR undefined")
    return signal_power / (n_meas * 10 ** (snr_db / 10))


def whiten(y, noise: NoiseModel):
    """``B^{-1} y``; after whitening the noise covariance is the identity."""
    return linalg.solve_triangular(noise.chol, y, lower=True)


@dataclass
class WhitenedObservation:
    r: np.ndarray
    a_matrix: np.ndarray
    dictionary: np.ndarray
    snr_db: float = float("nan")
    rank_deficient: bool = False

    @property
    def n_meas(self) -> int:
        return self.a_matrix.shape[0]

    @property
    def n_rx(self) -> int:
        return self.a_matrix.shape[1]


@dataclass(frozen=True)
class UnitaryTransform:
    """Economy SVD ``P = U diag(s) V^H`` of the whitened measurement matrix."""

    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray
    rank_deficient: bool

    @property
    def a_matrix(self) -> np.ndarray:
        return self.s[:, None] * self.Vh

    def apply(self, ytilde):
        return self.U.conj().T @ ytilde

    def save(self, path):
        np.savez(path, U=self.U, s=self.s, Vh=self.Vh, rank_deficient=self.rank_deficient)

    @classmethod
    def load(cls, path) -> "UnitaryTransform":
        with np.load(path) as f:
            return cls(f["U"], f["s"], f["Vh"], bool(f["rank_deficient"]))


def measurement_matrix(combiners: CombinerSet, noise: NoiseModel) -> np.ndarray:
    """``P = B^{-1} W^H``."""
    return whiten(combiners.stacked.conj().T, noise)


def svd_transform(P) -> UnitaryTransform:
    M, N = P.shape
    if M > N:
        raise ValueError(f"P must have at most as many rows as columns, got {P.shape}")
    U, s, Vh = np.linalg.svd(P, full_matrices=False)
    floor = 1e-12 * s[0]
    deficient = bool(s[-1] < floor)
    if deficient:
        warnings.warn("measurement matrix is rank deficient; flooring singular values", RuntimeWarning)
        s = np.maximum(s, floor)
    return UnitaryTransform(U, s, Vh, deficient)


def cached_svd_transform(P, cache_dir, key) -> UnitaryTransform:
    """Like :func:`svd_transform` but persisted to ``cache_dir/svd_<key>.npz``.

    ``key`` should identify (seed, K, N_R, N_RF); the SVD only changes when the
    combiners or the noise covariance change.
    """
    path = Path(cache_dir) / f"svd_{key}.npz"
    if path.exists():
        return UnitaryTransform.load(path)
    T = svd_transform(P)
    path.parent.mkdir(parents=True, exist_ok=True)
    T.save(path)
    return T


def unitary_transform(ytilde, P, dictionary=None, transform: UnitaryTransform | None = None):
    """Rotate a whitened observation into ``r = A t + n`` with ``A = diag(s) V^H``."""
    if transform is None:
        transform = svd_transform(P)
    r = transform.apply(ytilde)
    return WhitenedObservation(
        r=r,
        a_matrix=transform.a_matrix,
        dictionary=dictionary,
        rank_deficient=transform.rank_deficient,
    )


def build_dictionary(n_rx: int, q_size: int) -> np.ndarray:
    """Angular dictionary: unit-norm plane-wave responses on a uniform grid.

    Column ``q`` is the half-wavelength ULA response at spatial frequency
    ``u_q = -1 + 2q/Q``, matching :func:`tlgamp.channel.steer_rx_ff`. With
    ``Q == N_R`` the matrix is unitary.
    """
    if q_size < n_rx:
        raise ValueError(f"dictionary size Q={q_size} must be at least N_R={n_rx}")
    u = dictionary_frequencies(q_size)
    n = np.arange(n_rx)[:, None]
    return np.exp(-1j * np.pi * n * u[None, :]) / np.sqrt(n_rx)


def dictionary_frequencies(q_size: int) -> np.ndarray:
    return -1 + 2 * np.arange(q_size) / q_size


def dft_codebook(n_tx: int) -> np.ndarray:
    """Unit-norm ``N_T``-point DFT transmit codebook, one beam per column."""
    n = np.arange(n_tx)
    return np.exp(-2j * np.pi * np.outer(n, n) / n_tx) / np.sqrt(n_tx)


def phase1_beams(n_tx: int, p0: int, rng) -> np.ndarray:
    """``F``: ``P_0`` columns drawn from the DFT codebook (distinct while possible)."""
    rng = np.random.default_rng(rng)
    book = dft_codebook(n_tx)
    idx = []
    while len(idx) < p0:
        idx.extend(rng.permutation(n_tx)[: p0 - len(idx)])
    return book[:, idx]


def _atoms(u, n_tx):
    n = np.arange(n_tx)
    return np.exp(-1j * np.pi * np.outer(n, np.atleast_1d(u))) / np.sqrt(n_tx)


def _fit_energy(us, Y0H, F, n_tx):
    # energy of Y0^H captured by the span of the beam-domain atoms at ``us``
    B = F.conj().T @ _atoms(us, n_tx)
    Q, _ = np.linalg.qr(B)
    return float(np.linalg.norm(Q.conj().T @ Y0H) ** 2)


def wrap_frequency(u):
    """Map spatial frequencies onto ``[-1, 1)``, where the steering vector is periodic."""
    return (np.asarray(u) + 1) % 2 - 1


def refine_aods(us, Y0H, F, n_tx: int, rounds: int = 3, width: float | None = None, n_scan: int = 41):
    """Cyclic coordinate refinement of all spatial frequencies jointly.

    Each ``u_l`` is moved within ``+-width`` (default one beamwidth ``1/N_T``)
    to maximize the least-squares fit of ``Y0^H`` by all atoms, with the other
    frequencies held fixed: a coarse scan, then a bounded scalar search.
    """
    us = list(np.asarray(us, dtype=float))
    width = 1.0 / n_tx if width is None else width
    for _ in range(rounds):
        for l in range(len(us)):
            def cost(v, l=l):
                trial = us.copy()
                trial[l] = float(wrap_frequency(v))
                return -_fit_energy(trial, Y0H, F, n_tx)

            scan = us[l] + np.linspace(-width, width, n_scan)
            vals = [cost(v) for v in scan]
            best = int(np.argmin(vals))
            step = 2 * width / (n_scan - 1)
            res = minimize_scalar(cost, bounds=(scan[best] - step, scan[best] + step), method="bounded",
                                  options={"xatol": 1e-7})
            us[l] = float(wrap_frequency(res.x if res.fun <= vals[best] else scan[best]))
    return np.array(us)


def estimate_aods_grid(Y0, F, n_paths: int, n_tx: int, grid_size: int | None = None, refine=True):
    """Grid-correlation AoD estimator for the Phase-I pilots.

    ``Y0 = C A_T^H F + N`` with ``F`` the ``N_T x P_0`` transmit beams. Each
    candidate spatial frequency ``u = sin(psi)`` is scored by the energy of
    ``Y0^H`` projected on ``F^H a_T(u)``. Peaks are taken greedily; after each
    pick the selected atoms are removed from ``Y0^H`` by least squares and a
    half-beamwidth exclusion zone is placed around the pick. With ``refine``
    the picks are then moved off-grid jointly (:func:`refine_aods`).

    Returns ``(aods, n_missing)`` where ``n_missing`` counts paths for which no
    peak with positive energy was left.
    """
    Y0H = np.asarray(Y0).conj().T  # P0 x M
    if grid_size is None:
        grid_size = 4 * n_tx
    if Y0H.shape[0] < n_paths:
        warnings.warn("fewer Phase-I subframes than paths; AoDs are not identifiable", RuntimeWarning)
    grid = dictionary_frequencies(grid_size)
    half_beam = 1.0 / n_tx
    B = F.conj().T @ _atoms(grid, n_tx)  # P0 x G
    norms = np.maximum(np.sum(np.abs(B) ** 2, axis=0), 1e-15)

    picked: list[float] = []
    residual = Y0H.copy()
    excluded = np.zeros(grid_size, dtype=bool)
    n_missing = 0
    for _ in range(n_paths):
        scores = np.sum(np.abs(B.conj().T @ residual) ** 2, axis=1) / norms
        scores[excluded] = -np.inf
        g = int(np.argmax(scores))
        if not np.isfinite(scores[g]) or scores[g] <= 1e-12 * max(np.linalg.norm(Y0H) ** 2, 1e-300):
            n_missing += 1
            continue
        picked.append(float(grid[g]))
        dist = np.abs(wrap_frequency(grid - grid[g]))
        excluded |= dist < half_beam
        Bsel = F.conj().T @ _atoms(picked, n_tx)
        coef, *_ = np.linalg.lstsq(Bsel, Y0H, rcond=None)
        residual = Y0H - Bsel @ coef
    if n_missing:
        warnings.warn(f"{n_missing} AoD peak(s) not found", RuntimeWarning)
    us = np.array(picked)
    if refine and us.size:
        us = refine_aods(us, Y0H, F, n_tx)
    us = np.clip(us, -1 + 1e-9, 1 - 1e-9)
    return np.arcsin(us), n_missing


def decoupling_beams(aods, geometry: ArrayGeometry, loading: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Zero-forcing transmit beams for Phase II, normalized to unit norm.

    Returns ``(F, scale)`` with ``a_T(psi_j)^H F[:, l] = delta_jl / scale[l]``,
    so ``H F[:, l] * scale[l]`` is exactly the ``l``-th subchannel. A positive
    ``loading`` adds ``loading * I`` to the Gram matrix before inversion, which
    caps the gain when two AoDs nearly coincide at the cost of residual
    cross-path leakage.
    """
    A_T = np.stack([steer_tx(a, geometry) for a in aods], axis=1)
    G = A_T.conj().T @ A_T + loading * np.eye(A_T.shape[1])
    F = A_T @ np.linalg.pinv(G)
    # per-beam gain toward its own path, so the scaled output matches h_l
    own = np.real(np.einsum("nl,nl->l", A_T.conj(), F))
    norm = np.linalg.norm(F, axis=0)
    return F / norm, norm / own


def phase2_beams(aods, geometry: ArrayGeometry, beam_mode: str = "aligned", loading: float = 0.0):
    """Transmit beams for the Phase-II subframes and the per-beam output scale."""
    if beam_mode == "aligned":
        F = np.stack([steer_tx(a, geometry) for a in aods], axis=1)
        return F, np.ones(len(aods))
    if beam_mode == "decoupled":
        return decoupling_beams(aods, geometry, loading)
    raise ValueError(f"unknown beam mode {beam_mode!r}")


def beam_align_observe(H, aods, combiners: CombinerSet, geometry, noise_draws=None, beam_mode="aligned",
                       loading: float = 0.0):
    """Phase-II observations ``y_l = W^H H f_l + nbar_l``, one per path.

    ``noise_draws`` is ``M x L`` combined noise (or ``None`` for noiseless).
    Outputs are multiplied by the beam scale so each approximates ``W^H h_l``.
    """
    F, scale = phase2_beams(aods, geometry, beam_mode, loading)
    W = combiners.stacked
    Y = W.conj().T @ (np.asarray(H) @ F)
    if noise_draws is not None:
        Y = Y + noise_draws
    Y = Y * scale[None, :]
    return [Y[:, l] for l in range(Y.shape[1])]
