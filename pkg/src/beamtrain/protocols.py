"""Training protocol state machines.

Every runner is a pure function of (config, channel, seed) and returns a
:class:`TrainingOutcome` with the selected beam pair, the measured gain or
correlation table, packet and bit costs, per-field power traces and the
post-selection SNR.

Measurement model: each training field yields one channel estimate per
delay tap.  Estimates are expressed in beam-pair gain units, i.e. the raw
array response divided by sqrt(N_tx * N_rx), so a ray aligned with both
beams of an orthogonal pair reads back as its plain ray gain; that keeps
the classic two-path numbers (2 and 2a) exact.  Correlating over the CE
sequence buys a processing gain of ``ce_chips``, so additive noise enters
each estimate with variance noise_power / (tx_power * ce_chips).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .array_model import (
    BeamCodebook,
    SteeringVector,
    WeightVector,
    array_factor_many,
    project_uniform,
    quantize_phases,
    subarray_beam,
    superpose_beams,
)
from .beam_coding import CorrelationMatrix, SignatureCode, build_schedule, walsh_codes
from .channel import ChannelRealization, LinkBudget, Ray, derive_seed, end_to_end_gain
from .packets import PER_BEAM_BITS_80211AD, PER_BEAM_BITS_BEAM_CODING

__all__ = [
    "Scheme",
    "ProtocolConfig",
    "TrainingOutcome",
    "run",
    "run_exhaustive_pbp",
    "run_multilevel_pbp",
    "run_exhaustive_inpacket",
    "run_feedback_inpacket",
    "run_exhaustive_beamcoding",
    "run_feedback_beamcoding",
    "sector_beams",
    "sector_trap_channel",
]

# Salt for the measurement-noise RNG stream so it never replays the draws
# that produced the channel realization from the same seed.
_NOISE_STREAM = 0x6E015E


class Scheme(str, Enum):
    EXHAUSTIVE_PBP = "exhaustive_pbp"
    MULTILEVEL_PBP = "multilevel_pbp"
    EXHAUSTIVE_INPACKET = "exhaustive_inpacket"
    FEEDBACK_INPACKET = "feedback_inpacket"
    EXHAUSTIVE_BEAMCODING = "exhaustive_beamcoding"
    FEEDBACK_BEAMCODING = "feedback_beamcoding"


_CODED_SCHEMES = (Scheme.EXHAUSTIVE_BEAMCODING, Scheme.FEEDBACK_BEAMCODING)


@dataclass(frozen=True)
class ProtocolConfig:
    """Codebooks plus scheme-specific knobs for one training run.

    ``noise`` switches measurement noise on; ``snr_budget`` only scales the
    reported post-selection SNR (and falls back to ``noise``).  The weight
    transforms model hardware limits: ``project_phase_only`` forces uniform
    magnitudes, ``quantize_bits`` snaps phases to a digital phase shifter.
    Transforms apply to training weights only; the reported SNR always uses
    clean steering at the chosen pair, since data transmission happens
    after training refines the weights.
    """

    tx_codebook: BeamCodebook
    rx_codebook: BeamCodebook
    scheme: Scheme
    noise: LinkBudget | None = None
    snr_budget: LinkBudget | None = None
    quantize_bits: int | None = None
    project_phase_only: bool = False
    num_sectors: int = 4
    ce_chips: int = 1024
    feedback_bits: int = 512
    detection_threshold_sigma: float = 5.0

    def __post_init__(self) -> None:
        if self.scheme in _CODED_SCHEMES and not self.tx_codebook.is_orthogonal:
            warnings.warn(
                "coded training over a non-orthogonal transmit beam group: "
                "decoding still works but per-field power flatness is lost",
                stacklevel=2,
            )
        if self.scheme is Scheme.FEEDBACK_BEAMCODING and not self.rx_codebook.is_orthogonal:
            warnings.warn(
                "feedback coded training codes the receive beams too, and this "
                "receive beam group is not mutually orthogonal",
                stacklevel=2,
            )

    def budget_for_snr(self) -> LinkBudget | None:
        return self.snr_budget if self.snr_budget is not None else self.noise


@dataclass(frozen=True)
class TrainingOutcome:
    """Result of one training run.

    ``feedback_bits`` counts the piggybacked feedback messages and is kept
    out of ``training_bits``, which covers training sections only.
    """

    scheme: Scheme
    seed: int
    success: bool
    best_pair: tuple[int, int] | None
    pair_power: np.ndarray | None
    correlation: CorrelationMatrix | None
    packets_sent: int
    training_bits: int
    power_traces: tuple[np.ndarray, ...]
    snr_db: float
    feedback_messages: int = 0
    feedback_bits: int = 0


def _transform(cfg: ProtocolConfig, w: WeightVector | SteeringVector) -> WeightVector:
    out = w.as_weights() if isinstance(w, SteeringVector) else w
    if cfg.project_phase_only:
        out = project_uniform(out)
    if cfg.quantize_bits is not None:
        out = quantize_phases(out, cfg.quantize_bits)
    return out


def _field_noise_std(cfg: ProtocolConfig) -> float:
    if cfg.noise is None:
        return 0.0
    n_tx = cfg.tx_codebook.cfg.num_antennas
    n_rx = cfg.rx_codebook.cfg.num_antennas
    return math.sqrt(cfg.noise.noise_to_signal / cfg.ce_chips) / math.sqrt(n_tx * n_rx)


def _estimate_table(
    cfg: ProtocolConfig,
    ch: ChannelRealization,
    rng: np.random.Generator,
    tx_weights: Sequence[WeightVector],
    rx_weights: Sequence[WeightVector],
) -> np.ndarray:
    """Noisy per-tap field estimates, shape (num_taps, len(tx), len(rx))."""
    n_tx = cfg.tx_codebook.cfg.num_antennas
    n_rx = cfg.rx_codebook.cfg.num_antennas
    norm = math.sqrt(n_tx * n_rx)
    est = np.zeros((ch.num_taps, len(tx_weights), len(rx_weights)), dtype=np.complex128)
    if ch.rays:
        aods = np.array([r.aod_deg for r in ch.rays])
        aoas = np.array([r.aoa_deg for r in ch.rays])
        gains = np.array([r.gain for r in ch.rays])
        taps = np.array([r.tap for r in ch.rays])
        tx_resp = np.stack(
            [array_factor_many(w, aods, cfg.tx_codebook.cfg) for w in tx_weights]
        )
        rx_resp = np.stack(
            [array_factor_many(w, aoas, cfg.rx_codebook.cfg) for w in rx_weights]
        )
        for tap in np.unique(taps):
            idx = np.flatnonzero(taps == tap)
            est[tap] = (
                np.einsum("fr,gr,r->fg", tx_resp[:, idx], rx_resp[:, idx], gains[idx]) / norm
            )
    sigma = _field_noise_std(cfg)
    if sigma > 0.0:
        noise = rng.standard_normal(est.shape) + 1j * rng.standard_normal(est.shape)
        est = est + (sigma / math.sqrt(2.0)) * noise
    return est


def _snr_db(cfg: ProtocolConfig, ch: ChannelRealization, pair: tuple[int, int] | None) -> float:
    budget = cfg.budget_for_snr()
    if budget is None or pair is None:
        return float("nan") if pair is not None else -math.inf
    taps = end_to_end_gain(
        cfg.tx_codebook.vectors[pair[0]],
        cfg.rx_codebook.vectors[pair[1]],
        ch,
        cfg.tx_codebook.cfg,
        cfg.rx_codebook.cfg,
    )
    p_rel = float(np.sum(np.abs(taps) ** 2))
    if p_rel <= 0.0:
        return -math.inf
    return 10.0 * math.log10(p_rel / budget.noise_to_signal)


def _passes_detection(cfg: ProtocolConfig, peak: float, decode_gain: float = 1.0) -> bool:
    """Peak statistic must clear 5x the decoded noise standard deviation.

    There is no failure path in an idealized description, but degenerate
    inputs (a dead channel) need one; noiseless runs just require a
    strictly positive peak.
    """
    threshold = cfg.detection_threshold_sigma * _field_noise_std(cfg) * decode_gain
    return peak > threshold


def _argmax_pair(power: np.ndarray) -> tuple[int, int]:
    flat = int(np.argmax(power))
    p, q = np.unravel_index(flat, power.shape)
    return int(p), int(q)


def _traces_per_rx(est: np.ndarray) -> tuple[np.ndarray, ...]:
    """Per-packet traces for schemes with one receive dwell per packet."""
    power = np.sum(np.abs(est) ** 2, axis=0)
    return tuple(power[:, q].copy() for q in range(power.shape[1]))


def run_exhaustive_pbp(
    cfg: ProtocolConfig, ch: ChannelRealization, seed: int
) -> TrainingOutcome:
    """One packet per beam pair, (p, q) ordered; the performance yardstick."""
    rng = np.random.default_rng(derive_seed(seed, _NOISE_STREAM))
    tx_ws = [_transform(cfg, v) for v in cfg.tx_codebook.vectors]
    rx_ws = [_transform(cfg, v) for v in cfg.rx_codebook.vectors]
    est = _estimate_table(cfg, ch, rng, tx_ws, rx_ws)
    power = np.sum(np.abs(est) ** 2, axis=0)
    success = _passes_detection(cfg, float(np.max(np.abs(est))))
    pair = _argmax_pair(power) if success else None
    p, q = power.shape
    traces = tuple(
        np.array([power[i, j]]) for i in range(p) for j in range(q)
    )
    return TrainingOutcome(
        scheme=Scheme.EXHAUSTIVE_PBP,
        seed=seed,
        success=success,
        best_pair=pair,
        pair_power=power,
        correlation=None,
        packets_sent=p * q,
        training_bits=p * q * PER_BEAM_BITS_80211AD,
        power_traces=traces,
        snr_db=_snr_db(cfg, ch, pair),
    )


def sector_beams(
    codebook: BeamCodebook, num_sectors: int
) -> tuple[list[WeightVector], list[list[int]]]:
    """Lower-resolution sector beams plus the fine-beam indices they cover.

    The codebook is split into contiguous groups; each sector beam steers a
    front sub-array of N // num_sectors antennas at the group's mean
    cos(angle), trading aperture for per-beam coverage.
    """
    if num_sectors < 1:
        raise ValueError("need at least one sector")
    sub = max(1, codebook.cfg.num_antennas // num_sectors)
    groups = [
        [int(i) for i in g]
        for g in np.array_split(np.arange(len(codebook)), num_sectors)
        if g.size
    ]
    beams = []
    for group in groups:
        center = float(np.mean([math.cos(math.radians(codebook.angles_deg[i])) for i in group]))
        beams.append(subarray_beam(codebook.cfg, center, sub))
    return beams, groups


def run_multilevel_pbp(
    cfg: ProtocolConfig, ch: ChannelRealization, seed: int
) -> TrainingOutcome:
    """Two-level search: wide sector beams first, fine beams inside the winner."""
    rng = np.random.default_rng(derive_seed(seed, _NOISE_STREAM))
    tx_wide, tx_groups = sector_beams(cfg.tx_codebook, cfg.num_sectors)
    rx_wide, rx_groups = sector_beams(cfg.rx_codebook, cfg.num_sectors)

    est1 = _estimate_table(cfg, ch, rng, tx_wide, rx_wide)
    power1 = np.sum(np.abs(est1) ** 2, axis=0)
    s_tx, s_rx = _argmax_pair(power1)

    fine_tx = [_transform(cfg, cfg.tx_codebook.vectors[i]) for i in tx_groups[s_tx]]
    fine_rx = [_transform(cfg, cfg.rx_codebook.vectors[j]) for j in rx_groups[s_rx]]
    est2 = _estimate_table(cfg, ch, rng, fine_tx, fine_rx)
    power2 = np.sum(np.abs(est2) ** 2, axis=0)
    success = _passes_detection(cfg, float(np.max(np.abs(est2))))
    local = _argmax_pair(power2)
    pair = (tx_groups[s_tx][local[0]], rx_groups[s_rx][local[1]]) if success else None

    packets = len(tx_wide) * len(rx_wide) + len(fine_tx) * len(fine_rx)
    return TrainingOutcome(
        scheme=Scheme.MULTILEVEL_PBP,
        seed=seed,
        success=success,
        best_pair=pair,
        pair_power=power2,
        correlation=None,
        packets_sent=packets,
        training_bits=packets * PER_BEAM_BITS_80211AD,
        power_traces=(power1.ravel(), power2.ravel()),
        snr_db=_snr_db(cfg, ch, pair),
    )


def run_exhaustive_inpacket(
    cfg: ProtocolConfig, ch: ChannelRealization, seed: int
) -> TrainingOutcome:
    """One packet per receive beam; TRN fields sweep every transmit beam.

    Recovers the full beam-pair gain table, so noiselessly it agrees with
    packet-by-packet search entry for entry.
    """
    rng = np.random.default_rng(derive_seed(seed, _NOISE_STREAM))
    tx_ws = [_transform(cfg, v) for v in cfg.tx_codebook.vectors]
    rx_ws = [_transform(cfg, v) for v in cfg.rx_codebook.vectors]
    est = _estimate_table(cfg, ch, rng, tx_ws, rx_ws)
    power = np.sum(np.abs(est) ** 2, axis=0)
    success = _passes_detection(cfg, float(np.max(np.abs(est))))
    pair = _argmax_pair(power) if success else None
    p, q = power.shape
    return TrainingOutcome(
        scheme=Scheme.EXHAUSTIVE_INPACKET,
        seed=seed,
        success=success,
        best_pair=pair,
        pair_power=power,
        correlation=None,
        packets_sent=q,
        training_bits=q * p * PER_BEAM_BITS_80211AD,
        power_traces=_traces_per_rx(est),
        snr_db=_snr_db(cfg, ch, pair),
    )


def _rx_composite(cfg: ProtocolConfig) -> WeightVector:
    # Equal-power all-beams reception for the feedback stage; deliberately
    # left untransformed (see ProtocolConfig docstring).
    return superpose_beams(list(cfg.rx_codebook.vectors), [1] * len(cfg.rx_codebook))


def run_feedback_inpacket(
    cfg: ProtocolConfig, ch: ChannelRealization, seed: int
) -> TrainingOutcome:
    """Two-packet training: transmit sweep into a composite receiver, then a
    receive sweep at the fed-back transmit beam."""
    rng = np.random.default_rng(derive_seed(seed, _NOISE_STREAM))
    tx_ws = [_transform(cfg, v) for v in cfg.tx_codebook.vectors]
    est1 = _estimate_table(cfg, ch, rng, tx_ws, [_rx_composite(cfg)])
    power1 = np.sum(np.abs(est1) ** 2, axis=0)[:, 0]
    stage1_ok = _passes_detection(cfg, float(np.max(np.abs(est1))))
    best_tx = int(np.argmax(power1))

    rx_ws = [_transform(cfg, v) for v in cfg.rx_codebook.vectors]
    est2 = _estimate_table(cfg, ch, rng, [tx_ws[best_tx]], rx_ws)
    power2 = np.sum(np.abs(est2) ** 2, axis=0)[0, :]
    stage2_ok = _passes_detection(cfg, float(np.max(np.abs(est2))))
    success = stage1_ok and stage2_ok
    pair = (best_tx, int(np.argmax(power2))) if success else None

    bits = (
        len(cfg.tx_codebook) * PER_BEAM_BITS_80211AD
        + len(cfg.rx_codebook) * PER_BEAM_BITS_80211AD
    )
    return TrainingOutcome(
        scheme=Scheme.FEEDBACK_INPACKET,
        seed=seed,
        success=success,
        best_pair=pair,
        pair_power=None,
        correlation=None,
        packets_sent=2,
        training_bits=bits,
        power_traces=(power1, power2),
        snr_db=_snr_db(cfg, ch, pair),
        feedback_messages=1,
        feedback_bits=cfg.feedback_bits,
    )


def _coded_fields(
    cfg: ProtocolConfig, codebook: BeamCodebook
) -> tuple[list[WeightVector], list[SignatureCode]]:
    k = len(codebook)
    order = max(0, (k - 1).bit_length())
    codes = walsh_codes(order)[:k]
    schedule = build_schedule(codebook, codes)
    return [_transform(cfg, w) for w in schedule.field_weights], codes


def _decode_fields(est: np.ndarray, codes: Sequence[SignatureCode]) -> np.ndarray:
    """Walsh-decode per-tap field estimates (taps, T, G) -> (taps, P, G)."""
    s = np.stack([c.chips for c in codes]).astype(np.complex128)
    return np.einsum("pt,dtg->dpg", s, est)


def run_exhaustive_beamcoding(
    cfg: ProtocolConfig, ch: ChannelRealization, seed: int
) -> TrainingOutcome:
    """All transmit beams coded into every field; the receiver sweeps.

    The correlation r[p, q] carries the documented T/sqrt(K) scale on top
    of the beam-pair gain, so the two-path toy decodes to exactly 2 and 2a.
    """
    rng = np.random.default_rng(derive_seed(seed, _NOISE_STREAM))
    tx_fields, codes = _coded_fields(cfg, cfg.tx_codebook)
    rx_ws = [_transform(cfg, v) for v in cfg.rx_codebook.vectors]
    est = _estimate_table(cfg, ch, rng, tx_fields, rx_ws)
    r = _decode_fields(est, codes)
    power = np.sum(np.abs(r) ** 2, axis=0)
    t = len(tx_fields)
    success = _passes_detection(cfg, float(np.max(np.abs(r))), decode_gain=math.sqrt(t))
    pair = _argmax_pair(power) if success else None

    dominant = np.take_along_axis(
        r, np.argmax(np.abs(r), axis=0)[None, ...], axis=0
    )[0]
    q = len(rx_ws)
    return TrainingOutcome(
        scheme=Scheme.EXHAUSTIVE_BEAMCODING,
        seed=seed,
        success=success,
        best_pair=pair,
        pair_power=power,
        correlation=CorrelationMatrix(dominant),
        packets_sent=q,
        training_bits=q * t * PER_BEAM_BITS_BEAM_CODING,
        power_traces=_traces_per_rx(est),
        snr_db=_snr_db(cfg, ch, pair),
    )


def run_feedback_beamcoding(
    cfg: ProtocolConfig, ch: ChannelRealization, seed: int
) -> TrainingOutcome:
    """Two-packet coded training: coded transmit beams into a composite
    receiver, feedback, then coded receive beams at the chosen transmit beam."""
    rng = np.random.default_rng(derive_seed(seed, _NOISE_STREAM))
    tx_fields, tx_codes = _coded_fields(cfg, cfg.tx_codebook)
    est1 = _estimate_table(cfg, ch, rng, tx_fields, [_rx_composite(cfg)])
    r1 = _decode_fields(est1, tx_codes)[:, :, 0]
    power1 = np.sum(np.abs(r1) ** 2, axis=0)
    stage1_ok = _passes_detection(
        cfg, float(np.max(np.abs(r1))), decode_gain=math.sqrt(len(tx_fields))
    )
    best_tx = int(np.argmax(power1))

    rx_fields, rx_codes = _coded_fields(cfg, cfg.rx_codebook)
    tx_best = _transform(cfg, cfg.tx_codebook.vectors[best_tx])
    est2 = _estimate_table(cfg, ch, rng, [tx_best], rx_fields)
    # Receive-side coding: fields vary the receiver weights, so decode along
    # the receive axis.
    r2 = _decode_fields(np.swapaxes(est2, 1, 2), rx_codes)[:, :, 0]
    power2 = np.sum(np.abs(r2) ** 2, axis=0)
    stage2_ok = _passes_detection(
        cfg, float(np.max(np.abs(r2))), decode_gain=math.sqrt(len(rx_fields))
    )
    success = stage1_ok and stage2_ok
    pair = (best_tx, int(np.argmax(power2))) if success else None

    bits = (len(tx_fields) + len(rx_fields)) * PER_BEAM_BITS_BEAM_CODING
    return TrainingOutcome(
        scheme=Scheme.FEEDBACK_BEAMCODING,
        seed=seed,
        success=success,
        best_pair=pair,
        pair_power=None,
        correlation=None,
        packets_sent=2,
        training_bits=bits,
        power_traces=(power1, power2),
        snr_db=_snr_db(cfg, ch, pair),
        feedback_messages=1,
        feedback_bits=cfg.feedback_bits,
    )


_RUNNERS = {
    Scheme.EXHAUSTIVE_PBP: run_exhaustive_pbp,
    Scheme.MULTILEVEL_PBP: run_multilevel_pbp,
    Scheme.EXHAUSTIVE_INPACKET: run_exhaustive_inpacket,
    Scheme.FEEDBACK_INPACKET: run_feedback_inpacket,
    Scheme.EXHAUSTIVE_BEAMCODING: run_exhaustive_beamcoding,
    Scheme.FEEDBACK_BEAMCODING: run_feedback_beamcoding,
}


def run(cfg: ProtocolConfig, ch: ChannelRealization, seed: int) -> TrainingOutcome:
    """Dispatch to the runner named by ``cfg.scheme``."""
    return _RUNNERS[cfg.scheme](cfg, ch, seed)


def sector_trap_channel(
    tx_cb: BeamCodebook,
    rx_cb: BeamCodebook,
    num_sectors: int = 4,
    distractor_gain: float = 0.5,
) -> ChannelRealization:
    """Adversarial channel where sector-first search picks a weak path.

    Two equal-strength rays depart on the two center-most fine beams of one
    sector and arrive on a single fine beam, with gains phased so their sum
    under that sector's wide transmit beam cancels exactly: the wide beam
    cannot resolve the two departures, so every sector pair involving the
    trap sector looks dead (the arrival factor multiplies a zero).  A
    weaker distractor ray in another sector then wins the sector stage.
    Fine-resolution search (exhaustive or coded) resolves the two strong
    departures individually and beats the two-level result by
    1 / distractor_gain**2.
    """
    if not 0.0 < distractor_gain < 1.0:
        raise ValueError("distractor gain must lie in (0, 1)")
    tx_wide, tx_groups = sector_beams(tx_cb, num_sectors)
    _, rx_groups = sector_beams(rx_cb, num_sectors)
    if len(tx_groups) < 3 or min(len(g) for g in tx_groups[:3]) < 2:
        raise ValueError("need at least three sectors of two or more beams")

    trap_tx, trap_rx = tx_groups[1], rx_groups[1]
    i1, i2 = trap_tx[len(trap_tx) // 2 - 1], trap_tx[len(trap_tx) // 2]
    j = trap_rx[len(trap_rx) // 2]
    aod1, aod2 = tx_cb.angles_deg[i1], tx_cb.angles_deg[i2]
    aoa = rx_cb.angles_deg[j]

    wide = tx_wide[1]
    t1 = complex(array_factor_many(wide, np.array([aod1]), tx_cb.cfg)[0])
    t2 = complex(array_factor_many(wide, np.array([aod2]), tx_cb.cfg)[0])
    gain2 = -t1 / t2  # magnitude 1 by symmetry; kills the wide-beam sum

    d_tx = tx_groups[2][len(tx_groups[2]) // 2]
    d_rx = rx_groups[2][len(rx_groups[2]) // 2]
    rays = (
        Ray(aod_deg=aod1, aoa_deg=aoa, gain=1.0, tap=0),
        Ray(aod_deg=aod2, aoa_deg=aoa, gain=gain2, tap=0),
        Ray(
            aod_deg=tx_cb.angles_deg[d_tx],
            aoa_deg=rx_cb.angles_deg[d_rx],
            gain=distractor_gain,
            tap=0,
        ),
    )
    return ChannelRealization(rays=rays, los_present=False)
