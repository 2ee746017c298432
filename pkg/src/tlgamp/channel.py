"""Near-field, spatially non-stationary XL-MIMO channel synthesis.

A channel is a sum of ``L`` rank-one path contributions. Each path has a
spherical-wavefront receive response (Fresnel approximation) masked by a
binary visibility vector, and a plane-wave transmit response::

    H = sqrt(N_T N_R) * sum_l g_l (s_l * a_R(theta_l, r_l)) a_T(psi_l)^H
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SPEED_OF_LIGHT = 299792458.0

SCENARIO_KINDS = ("nf_sns", "nf_ss", "ff_ss")
VR_MODELS = ("contiguous_block", "markov")


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear arrays at the base station (rx) and the user (tx).

    Element spacing is always half a wavelength.
    """

    n_rx: int
    n_tx: int
    wavelength: float

    def __post_init__(self):
        if not (self.n_rx > self.n_tx > 0):
            raise ValueError(f"need n_rx > n_tx > 0, got n_rx={self.n_rx}, n_tx={self.n_tx}")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")

    @classmethod
    def from_carrier(cls, n_rx: int, n_tx: int, carrier_hz: float = 30e9) -> "ArrayGeometry":
        return cls(n_rx, n_tx, SPEED_OF_LIGHT / carrier_hz)

    @property
    def spacing(self) -> float:
        return self.wavelength / 2

    @property
    def carrier_hz(self) -> float:
        return SPEED_OF_LIGHT / self.wavelength

    @property
    def aperture(self) -> float:
        return (self.n_rx - 1) * self.spacing


@dataclass(frozen=True)
class MarkovPrior:
    """Stationary two-state chain over the visibility indicators.

    ``p10`` is the probability of leaving the visible state and ``p01`` the
    probability of entering it; both are fixed by ``phi`` and ``p10`` through
    stationarity.
    """

    phi: float
    p10: float

    def __post_init__(self):
        if not 0 < self.phi < 1:
            raise ValueError(f"phi must lie in (0, 1), got {self.phi}")
        if not 0 < self.p10 < 1:
            raise ValueError(f"p10 must lie in (0, 1), got {self.p10}")
        if self.p01 >= 1:
            raise ValueError(f"phi={self.phi} and p10={self.p10} give p01 >= 1")

    @property
    def p01(self) -> float:
        return self.phi * self.p10 / (1 - self.phi)

    @property
    def p00(self) -> float:
        return 1 - self.p01

    @property
    def p11(self) -> float:
        return 1 - self.p10

    def transition_matrix(self) -> np.ndarray:
        """Row-stochastic matrix ``T[i, j] = P(s_n = j | s_{n-1} = i)``."""
        return np.array([[self.p00, self.p01], [self.p10, self.p11]])


@dataclass(frozen=True)
class VisibilityVector:
    mask: np.ndarray

    def __post_init__(self):
        mask = np.asarray(self.mask)
        if mask.ndim != 1 or not np.isin(mask, (0, 1)).all():
            raise ValueError("visibility mask must be a 1-D array of zeros and ones")
        object.__setattr__(self, "mask", mask.astype(np.int8))

    @property
    def fraction(self) -> float:
        return float(self.mask.sum()) / self.mask.size

    @classmethod
    def full(cls, n_rx: int) -> "VisibilityVector":
        return cls(np.ones(n_rx, dtype=np.int8))


@dataclass(frozen=True)
class PathParams:
    gain: complex
    aoa_rad: float
    distance_m: float
    aod_rad: float
    visibility: VisibilityVector

    def __post_init__(self):
        if self.distance_m <= 0:
            raise ValueError("path distance must be positive")
        for name in ("aoa_rad", "aod_rad"):
            if not abs(getattr(self, name)) < np.pi / 2:
                raise ValueError(f"{name} must lie in (-pi/2, pi/2)")


@dataclass
class ChannelRealization:
    matrix: np.ndarray
    paths: list[PathParams]
    subchannels: list[np.ndarray] = field(default_factory=list)

    @property
    def n_paths(self) -> int:
        return len(self.paths)

    @property
    def aods(self) -> np.ndarray:
        return np.array([p.aod_rad for p in self.paths])

    def masks(self) -> list[np.ndarray]:
        return [p.visibility.mask for p in self.paths]


def steer_tx(aod_rad: float, geometry: ArrayGeometry) -> np.ndarray:
    """Unit-norm far-field transmit steering vector, length ``n_tx``."""
    n = np.arange(geometry.n_tx)
    k = 2 * np.pi / geometry.wavelength
    return np.exp(-1j * k * n * geometry.spacing * np.sin(aod_rad)) / np.sqrt(geometry.n_tx)


def wave_path_difference(aoa_rad, distance_m, geometry: ArrayGeometry) -> np.ndarray:
    """Fresnel-approximated path difference of each rx element to element 0."""
    n = np.arange(geometry.n_rx)
    d = geometry.spacing
    return -d * n * np.sin(aoa_rad) + (d * n) ** 2 * np.cos(aoa_rad) ** 2 / (2 * distance_m)


def steer_rx_nf(aoa_rad: float, distance_m: float, geometry: ArrayGeometry) -> np.ndarray:
    """Unit-norm spherical-wavefront receive steering vector, length ``n_rx``.

    ``distance_m = np.inf`` gives the plane-wave response.
    """
    if not distance_m > 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    if np.isinf(distance_m):
        delta = -geometry.spacing * np.arange(geometry.n_rx) * np.sin(aoa_rad)
    else:
        delta = wave_path_difference(aoa_rad, distance_m, geometry)
    return np.exp(2j * np.pi / geometry.wavelength * delta) / np.sqrt(geometry.n_rx)


def steer_rx_ff(aoa_rad: float, geometry: ArrayGeometry) -> np.ndarray:
    return steer_rx_nf(aoa_rad, np.inf, geometry)


def sample_markov_mask(n: int, prior: MarkovPrior, rng: np.random.Generator) -> np.ndarray:
    """One draw of the stationary visibility chain, rejecting all-zero masks."""
    T = prior.transition_matrix()
    while True:
        s = np.empty(n, dtype=np.int8)
        s[0] = rng.random() < prior.phi
        u = rng.random(n)
        for i in range(1, n):
            s[i] = u[i] < T[s[i - 1], 1]
        if s.any():
            return s


def sample_visibility(
    fraction: float,
    n_rx: int,
    model: str = "contiguous_block",
    prior: MarkovPrior | None = None,
    rng_seed=None,
) -> VisibilityVector:
    """Draw a visibility mask with the requested visible fraction.

    ``contiguous_block`` places a run of ``round(fraction * n_rx)`` ones at a
    uniformly random offset. ``markov`` samples the stationary chain of
    ``prior`` (whose ``phi`` should match ``fraction``); its realized fraction
    is random.
    """
    if not 0 < fraction <= 1:
        raise ValueError(f"visible fraction must lie in (0, 1], got {fraction}")
    rng = np.random.default_rng(rng_seed)
    if fraction == 1:
        return VisibilityVector.full(n_rx)
    if model == "contiguous_block":
        length = max(1, int(round(fraction * n_rx)))
        start = rng.integers(0, n_rx - length + 1)
        mask = np.zeros(n_rx, dtype=np.int8)
        mask[start:start + length] = 1
        return VisibilityVector(mask)
    if model == "markov":
        if prior is None:
            prior = MarkovPrior(fraction, 0.05)
        return VisibilityVector(sample_markov_mask(n_rx, prior, rng))
    raise ValueError(f"unknown visibility model {model!r}; expected one of {VR_MODELS}")


def assemble_channel(paths: list[PathParams], geometry: ArrayGeometry) -> ChannelRealization:
    """Build ``H`` and the per-path receive subchannels ``h_l``."""
    if not paths:
        raise ValueError("at least one path is required")
    scale = np.sqrt(geometry.n_tx * geometry.n_rx)
    H = np.zeros((geometry.n_rx, geometry.n_tx), dtype=complex)
    subchannels = []
    for p in paths:
        if p.visibility.mask.size != geometry.n_rx:
            raise ValueError(
                f"visibility length {p.visibility.mask.size} does not match n_rx={geometry.n_rx}"
            )
        h = scale * p.gain * p.visibility.mask * steer_rx_nf(p.aoa_rad, p.distance_m, geometry)
        subchannels.append(h)
        H += np.outer(h, steer_tx(p.aod_rad, geometry).conj())
    return ChannelRealization(H, list(paths), subchannels)


def channel_matrix_form(paths: list[PathParams], geometry: ArrayGeometry) -> np.ndarray:
    """The compact ``sqrt(N_T N_R) A_R G A_T^H`` form of the same channel."""
    A_R = np.stack(
        [p.visibility.mask * steer_rx_nf(p.aoa_rad, p.distance_m, geometry) for p in paths], axis=1
    )
    A_T = np.stack([steer_tx(p.aod_rad, geometry) for p in paths], axis=1)
    G = np.diag([p.gain for p in paths])
    return np.sqrt(geometry.n_tx * geometry.n_rx) * A_R @ G @ A_T.conj().T


@dataclass
class ScenarioConfig:
    kind: str = "nf_sns"
    n_rx: int = 256
    n_tx: int = 16
    carrier_hz: float = 30e9
    n_paths: int = 4
    distance_min: float = 2.0
    distance_max: float = 10.0
    ff_distance: float = 200.0
    phi: float = 0.25
    # when set, each path draws its own fraction uniformly from [lo, hi]
    phi_range: tuple[float, float] | None = None
    vr_model: str = "contiguous_block"
    vr_p10: float = 0.05
    max_vr_overlap: float = 0.5
    gain_variance: float = 1.0
    min_aod_separation: float = 0.0

    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.from_carrier(self.n_rx, self.n_tx, self.carrier_hz)

    def validate(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"scenario.kind must be one of {SCENARIO_KINDS}, got {self.kind!r}")
        if self.vr_model not in VR_MODELS:
            raise ValueError(f"scenario.vr_model must be one of {VR_MODELS}, got {self.vr_model!r}")
        if not (self.n_rx > self.n_tx > 0):
            raise ValueError("scenario.n_rx > scenario.n_tx > 0 violated")
        if self.n_paths < 1:
            raise ValueError("scenario.n_paths must be >= 1")
        if not 0 < self.distance_min <= self.distance_max:
            raise ValueError("need 0 < scenario.distance_min <= scenario.distance_max")
        if not 0 < self.phi <= 1:
            raise ValueError(f"scenario.phi must lie in (0, 1], got {self.phi}")
        if self.phi_range is not None:
            lo, hi = self.phi_range
            if not 0 < lo <= hi <= 1:
                raise ValueError(f"scenario.phi_range must satisfy 0 < lo <= hi <= 1, got {self.phi_range}")
        if self.kind == "ff_ss" and self.ff_distance < 200:
            raise ValueError("ff_ss requires scenario.ff_distance >= 200 m")
        if self.gain_variance <= 0:
            raise ValueError("scenario.gain_variance must be positive")


def _block_overlap(a: np.ndarray, b: np.ndarray) -> float:
    inter = np.count_nonzero(a & b)
    return inter / min(a.sum(), b.sum())


def _draw_aods(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    half = np.pi / 2 * (1 - 1e-9)
    for _ in range(1000):
        aods = rng.uniform(-half, half, cfg.n_paths)
        if cfg.n_paths == 1 or cfg.min_aod_separation <= 0:
            return aods
        u = np.sort(np.sin(aods))
        if np.min(np.diff(u)) >= cfg.min_aod_separation:
            return aods
    raise RuntimeError("could not place AoDs with the requested separation")


def make_scenario(cfg: ScenarioConfig, rng_seed=None) -> ChannelRealization:
    """Draw one channel realization of the configured scenario kind.

    ``nf_sns`` gives every path its own visibility region; regions overlapping
    by more than ``max_vr_overlap`` (relative to the smaller one) are redrawn.
    """
    cfg.validate()
    rng = np.random.default_rng(rng_seed)
    geometry = cfg.geometry()
    half = np.pi / 2 * (1 - 1e-9)

    aoas = rng.uniform(-half, half, cfg.n_paths)
    aods = _draw_aods(cfg, rng)
    if cfg.kind == "ff_ss":
        distances = np.full(cfg.n_paths, cfg.ff_distance)
    else:
        distances = rng.uniform(cfg.distance_min, cfg.distance_max, cfg.n_paths)
    gains = np.sqrt(cfg.gain_variance / 2) * (
        rng.standard_normal(cfg.n_paths) + 1j * rng.standard_normal(cfg.n_paths)
    )

    masks = []
    for _ in range(cfg.n_paths):
        if cfg.kind != "nf_sns":
            masks.append(VisibilityVector.full(cfg.n_rx))
            continue
        if cfg.phi_range is not None:
            frac = rng.uniform(*cfg.phi_range)
        else:
            frac = cfg.phi
        prior = MarkovPrior(min(frac, 1 - 1e-6), cfg.vr_p10) if cfg.vr_model == "markov" else None
        for _attempt in range(200):
            vis = sample_visibility(frac, cfg.n_rx, cfg.vr_model, prior, rng)
            if frac == 1 or all(
                _block_overlap(vis.mask, m.mask) <= cfg.max_vr_overlap for m in masks if m.fraction < 1
            ):
                break
        masks.append(vis)

    paths = [
        PathParams(complex(g), float(t), float(r), float(p), m)
        for g, t, r, p, m in zip(gains, aoas, distances, aods, masks)
    ]
    return assemble_channel(paths, geometry)
