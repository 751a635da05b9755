"""Propagation models: the deterministic two-path toy scene, a seeded
cluster channel, link budget bookkeeping and noise injection.

Ray gains are linear amplitudes relative to a 1 m free-space reference, so
a line-of-sight ray at distance d carries (lambda / 4 pi) * d**(-eta/2).
Delays are integer tap indices at the signal sample period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .array_model import (
    ArrayConfig,
    BeamCodebook,
    SteeringVector,
    WeightVector,
    array_factor_many,
    codebook_from_cosines,
)

__all__ = [
    "Ray",
    "ChannelRealization",
    "ChannelConfig",
    "LinkBudget",
    "TOY_NUM_BEAMS",
    "TOY_BEAM_COSINES",
    "TOY_BEAM_ANGLES_DEG",
    "TOY_LOS_PAIR",
    "TOY_NLOS_PAIR",
    "toy_channel",
    "toy_codebooks",
    "draw_cluster_loss",
    "sample_channel",
    "end_to_end_gain",
    "pair_gain_table",
    "add_noise",
    "derive_seed",
]

SPEED_OF_LIGHT = 299792458.0

_MASK64 = (1 << 64) - 1


def derive_seed(master: int, index: int) -> int:
    """Child seed i = splitmix64_mix((master XOR i) + golden gamma).

    The splitmix64 finalizer scrambles the xor so that nearby indices land
    on unrelated RNG streams; the rule is fixed so campaigns can be
    replayed or sharded without coordination.
    """
    x = ((master ^ index) + 0x9E3779B97F4A7C15) & _MASK64
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9 & _MASK64
    x = (x ^ (x >> 27)) * 0x94D049BB133111EB & _MASK64
    return (x ^ (x >> 31)) & _MASK64


@dataclass(frozen=True)
class Ray:
    """One propagation path: departure/arrival angles, amplitude, delay tap."""

    aod_deg: float
    aoa_deg: float
    gain: complex
    tap: int = 0

    def __post_init__(self) -> None:
        if self.tap < 0 or int(self.tap) != self.tap:
            raise ValueError(f"tap must be a nonnegative integer, got {self.tap!r}")
        object.__setattr__(self, "tap", int(self.tap))
        object.__setattr__(self, "gain", complex(self.gain))


@dataclass(frozen=True)
class ChannelRealization:
    """An immutable list of rays plus the seed that produced it."""

    rays: tuple[Ray, ...]
    los_present: bool = False
    seed: int | None = None

    @property
    def num_taps(self) -> int:
        if not self.rays:
            return 1
        return max(r.tap for r in self.rays) + 1


@dataclass(frozen=True)
class ChannelConfig:
    """Simplified stochastic cluster channel parameters.

    Cluster reflection loss is Gaussian in dB, redrawn until it passes the
    truncation cap (rejection keeps the distribution smooth instead of
    piling mass onto the cap).  Cluster excess delays are uniform integers
    in [0, max_excess_tap]; by default a cluster's rays share its tap, and
    intra_cluster_tap_spread > 0 smears them over that many further taps
    the way indoor models do at gigahertz sample rates.
    """

    path_loss_exponent: float = 2.0
    cluster_loss_mean_db: float = -10.0
    cluster_loss_rms_db: float = 4.0
    cluster_loss_truncation_db: float = -2.0
    intra_cluster_angle_std_deg: float = 5.0
    num_clusters: int = 4
    rays_per_cluster: int = 3
    distance_m: float = 5.0
    los: bool = True
    max_excess_tap: int = 16
    intra_cluster_tap_spread: int = 0
    carrier_hz: float = 60e9

    def __post_init__(self) -> None:
        if self.num_clusters < 0 or self.rays_per_cluster < 1:
            raise ValueError("need a nonnegative cluster count and at least one ray per cluster")
        if self.distance_m <= 0:
            raise ValueError(f"distance must be positive, got {self.distance_m!r}")
        if self.max_excess_tap < 0:
            raise ValueError("max_excess_tap must be nonnegative")

    def los_amplitude(self) -> float:
        """Line-of-sight amplitude at the configured distance (1 m reference)."""
        wavelength = SPEED_OF_LIGHT / self.carrier_hz
        return (wavelength / (4.0 * math.pi)) * self.distance_m ** (
            -self.path_loss_exponent / 2.0
        )


@dataclass(frozen=True)
class LinkBudget:
    """Transmit power and receiver noise accounting."""

    tx_power_dbm: float = 10.0
    bandwidth_hz: float = 2e9
    noise_figure_plus_impl_db: float = 12.0
    noise_override_dbm: float | None = None

    @property
    def noise_power_dbm(self) -> float:
        if self.noise_override_dbm is not None:
            return self.noise_override_dbm
        return -174.0 + 10.0 * math.log10(self.bandwidth_hz) + self.noise_figure_plus_impl_db

    @property
    def noise_to_signal(self) -> float:
        """Linear noise power in units of the transmit power."""
        return 10.0 ** ((self.noise_power_dbm - self.tx_power_dbm) / 10.0)


# The classic 4-beam scene: both ends can steer at four mutually orthogonal
# beams; a line-of-sight path joins tx beam 2 to rx beam 3 and a lossy
# reflection joins tx beam 1 to rx beam 4 (numbering from one, so code
# indices are one less).  The beam grid is the offset orthogonal grid
# cos = +/-0.25, +/-0.75, which keeps all four beams away from endfire.
TOY_NUM_BEAMS = 4
TOY_BEAM_COSINES = (0.75, 0.25, -0.25, -0.75)
TOY_BEAM_ANGLES_DEG = tuple(math.degrees(math.acos(c)) for c in TOY_BEAM_COSINES)
TOY_LOS_PAIR = (1, 2)
TOY_NLOS_PAIR = (0, 3)


def toy_channel(a: float, nlos_excess_tap: int = 0) -> ChannelRealization:
    """Two-path toy scene with NLOS attenuation ``a``.

    The LOS ray (gain 1) aligns with the toy LOS beam pair and the NLOS
    ray (gain a) with the toy NLOS pair, so any correct training scheme
    must pick the LOS pair whenever a < 1.
    """
    if not (0.0 < a < 1.0):
        raise ValueError(f"NLOS attenuation must lie in (0, 1), got {a!r}")
    los = Ray(
        aod_deg=TOY_BEAM_ANGLES_DEG[TOY_LOS_PAIR[0]],
        aoa_deg=TOY_BEAM_ANGLES_DEG[TOY_LOS_PAIR[1]],
        gain=1.0,
        tap=0,
    )
    nlos = Ray(
        aod_deg=TOY_BEAM_ANGLES_DEG[TOY_NLOS_PAIR[0]],
        aoa_deg=TOY_BEAM_ANGLES_DEG[TOY_NLOS_PAIR[1]],
        gain=a,
        tap=nlos_excess_tap,
    )
    return ChannelRealization(rays=(los, nlos), los_present=True)


def toy_codebooks(
    num_antennas: int = 4, spacing: float = 0.5
) -> tuple[BeamCodebook, BeamCodebook]:
    """Matching 4-beam transmit and receive codebooks for the toy scene."""
    cfg = ArrayConfig(num_antennas, spacing)
    cb = codebook_from_cosines(cfg, TOY_BEAM_COSINES)
    return cb, cb


def _fold_angle(angle: float) -> float:
    """Reflect an angle into [0, 180] degrees."""
    a = angle % 360.0
    return 360.0 - a if a > 180.0 else a


def draw_cluster_loss(cfg: ChannelConfig, rng: np.random.Generator) -> float:
    """One cluster reflection loss in dB, redrawn until under the cap."""
    loss_db = rng.normal(cfg.cluster_loss_mean_db, cfg.cluster_loss_rms_db)
    while loss_db > cfg.cluster_loss_truncation_db:
        loss_db = rng.normal(cfg.cluster_loss_mean_db, cfg.cluster_loss_rms_db)
    return float(loss_db)


def sample_channel(cfg: ChannelConfig, seed: int) -> ChannelRealization:
    """Draw one cluster-channel realization, deterministic under ``seed``.

    Cluster centers are uniform over (0, 180) in AoD and AoA independently;
    each cluster gets a reflection loss redrawn until it passes the
    truncation cap, an excess delay tap, and ``rays_per_cluster`` rays
    spread Gaussian around the center with uniform phases.  The LOS ray, if
    present, sits at tap 0 with phase 0.
    """
    rng = np.random.default_rng(seed)
    ref = cfg.los_amplitude()
    rays: list[Ray] = []
    if cfg.los:
        aod = rng.uniform(0.0, 180.0)
        aoa = rng.uniform(0.0, 180.0)
        rays.append(Ray(aod_deg=aod, aoa_deg=aoa, gain=ref, tap=0))
    for _ in range(cfg.num_clusters):
        center_aod = rng.uniform(0.0, 180.0)
        center_aoa = rng.uniform(0.0, 180.0)
        loss_db = draw_cluster_loss(cfg, rng)
        cluster_tap = int(rng.integers(0, cfg.max_excess_tap + 1))
        amp = ref * 10.0 ** (loss_db / 20.0) / math.sqrt(cfg.rays_per_cluster)
        for _ in range(cfg.rays_per_cluster):
            aod = _fold_angle(center_aod + rng.normal(0.0, cfg.intra_cluster_angle_std_deg))
            aoa = _fold_angle(center_aoa + rng.normal(0.0, cfg.intra_cluster_angle_std_deg))
            phase = rng.uniform(0.0, 2.0 * math.pi)
            tap = cluster_tap + int(rng.integers(0, cfg.intra_cluster_tap_spread + 1))
            rays.append(Ray(aod_deg=aod, aoa_deg=aoa, gain=amp * np.exp(1j * phase), tap=tap))
    return ChannelRealization(rays=tuple(rays), los_present=cfg.los, seed=seed)


def _cfg_for(w: WeightVector | SteeringVector, cfg: ArrayConfig | None) -> ArrayConfig:
    if cfg is not None:
        return cfg
    n = len(w.entries) if isinstance(w, SteeringVector) else len(w)
    return ArrayConfig(n)


def end_to_end_gain(
    tx_w: WeightVector | SteeringVector,
    rx_w: WeightVector | SteeringVector,
    ch: ChannelRealization,
    tx_cfg: ArrayConfig | None = None,
    rx_cfg: ArrayConfig | None = None,
) -> np.ndarray:
    """Per-tap complex gains of the full array-channel-array cascade.

    Each ray contributes gain * array_factor(tx_w, aod) *
    array_factor(rx_w, aoa) at its tap.  Configs default to
    half-wavelength spacing with the length taken from the weights.
    """
    tx_cfg = _cfg_for(tx_w, tx_cfg)
    rx_cfg = _cfg_for(rx_w, rx_cfg)
    taps = np.zeros(ch.num_taps, dtype=np.complex128)
    if not ch.rays:
        return taps
    aods = np.array([r.aod_deg for r in ch.rays])
    aoas = np.array([r.aoa_deg for r in ch.rays])
    gains = np.array([r.gain for r in ch.rays])
    tx_af = array_factor_many(tx_w, aods, tx_cfg)
    rx_af = array_factor_many(rx_w, aoas, rx_cfg)
    contributions = gains * tx_af * rx_af
    for ray, c in zip(ch.rays, contributions):
        taps[ray.tap] += c
    return taps


def pair_gain_table(
    tx_cb: BeamCodebook, rx_cb: BeamCodebook, ch: ChannelRealization
) -> np.ndarray:
    """End-to-end gains for every beam pair, shape (num_taps, P, Q).

    Equivalent to calling :func:`end_to_end_gain` per pair but batched over
    the codebooks.
    """
    out = np.zeros((ch.num_taps, len(tx_cb), len(rx_cb)), dtype=np.complex128)
    if not ch.rays:
        return out
    aods = np.array([r.aod_deg for r in ch.rays])
    aoas = np.array([r.aoa_deg for r in ch.rays])
    gains = np.array([r.gain for r in ch.rays])
    taps = np.array([r.tap for r in ch.rays])
    tx_resp = np.stack([array_factor_many(v, aods, tx_cb.cfg) for v in tx_cb.vectors])
    rx_resp = np.stack([array_factor_many(v, aoas, rx_cb.cfg) for v in rx_cb.vectors])
    for tap in np.unique(taps):
        idx = np.flatnonzero(taps == tap)
        out[tap] = np.einsum("pr,qr,r->pq", tx_resp[:, idx], rx_resp[:, idx], gains[idx])
    return out


def add_noise(samples: np.ndarray, budget: LinkBudget, seed: int) -> np.ndarray:
    """Add circularly-symmetric complex Gaussian noise at the budgeted level.

    Samples are amplitudes in units where unit power equals the transmit
    power, so the injected noise has linear power ``budget.noise_to_signal``.
    Deterministic under ``seed``.
    """
    arr = np.asarray(samples, dtype=np.complex128)
    power = budget.noise_to_signal
    if power == 0.0:
        return arr.copy()
    rng = np.random.default_rng(seed)
    scale = math.sqrt(power / 2.0)
    noise = rng.standard_normal(arr.shape) + 1j * rng.standard_normal(arr.shape)
    return arr + scale * noise
