"""Signature codes and correlation receivers for coded multi-beam training.

Walsh codes tag the beams that are steered simultaneously; Golay
complementary pairs form the channel-estimation sequence inside each
training field.  A receiver correlates what it heard against the codes to
split the per-beam gains back apart, per delay tap when asked to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .array_model import BeamCodebook, SteeringVector, WeightVector, are_orthogonal, superpose_beams

__all__ = [
    "SignatureCode",
    "GolayPair",
    "CodedWeightSchedule",
    "CorrelationMatrix",
    "walsh_codes",
    "golay_pair",
    "aperiodic_autocorrelation",
    "build_schedule",
    "decode_correlations",
    "encode_ce_field",
    "decode_per_tap",
    "kronecker_codes",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SignatureCode:
    """A +/-1 chip sequence tagging one beam, one chip per training field."""

    chips: np.ndarray
    beam_index: int

    def __post_init__(self) -> None:
        chips = np.array(self.chips, dtype=np.int64)
        if chips.ndim != 1 or not _is_power_of_two(chips.size):
            raise ValueError("chip count must be a power of two")
        if not np.all(np.abs(chips) == 1):
            raise ValueError("chips must be +1 or -1")
        if chips[0] != 1:
            raise ValueError("chips must start with +1")
        chips.setflags(write=False)
        object.__setattr__(self, "chips", chips)

    def __len__(self) -> int:
        return int(self.chips.size)


@dataclass(frozen=True)
class GolayPair:
    """Complementary +/-1 sequence pair used as the CE sequence."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=np.int64)
        b = np.array(self.b, dtype=np.int64)
        if a.shape != b.shape or a.ndim != 1 or not _is_power_of_two(a.size):
            raise ValueError("pair members must share one power-of-two length")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def __len__(self) -> int:
        return int(self.a.size)


def walsh_codes(order_log2: int) -> list[SignatureCode]:
    """All 2**order_log2 Walsh codes of length 2**order_log2.

    Rows of the Sylvester Hadamard matrix in natural order; distinct rows
    have zero dot product.
    """
    if int(order_log2) != order_log2 or order_log2 < 0:
        raise ValueError(f"order_log2 must be a nonnegative integer, got {order_log2!r}")
    h = np.ones((1, 1), dtype=np.int64)
    for _ in range(int(order_log2)):
        h = np.block([[h, h], [h, -h]])
    return [SignatureCode(chips=row, beam_index=p) for p, row in enumerate(h)]


def golay_pair(length_log2: int) -> GolayPair:
    """Binary Golay complementary pair of length 2**length_log2.

    Doubling recursion a' = a|b, b' = a|-b from a = b = [1].  The two
    aperiodic autocorrelations sum to 2L at lag 0 and cancel exactly at
    every nonzero lag.
    """
    if int(length_log2) != length_log2 or length_log2 < 0:
        raise ValueError(f"length_log2 must be a nonnegative integer, got {length_log2!r}")
    a = np.ones(1, dtype=np.int64)
    b = np.ones(1, dtype=np.int64)
    for _ in range(int(length_log2)):
        a, b = np.concatenate([a, b]), np.concatenate([a, -b])
    return GolayPair(a, b)


def aperiodic_autocorrelation(x: Sequence[complex]) -> np.ndarray:
    """Aperiodic autocorrelation of ``x`` at lags 0 .. len(x)-1."""
    arr = np.asarray(x)
    n = arr.size
    return np.array([np.sum(arr[k:] * np.conj(arr[: n - k])) for k in range(n)])


@dataclass(frozen=True)
class CodedWeightSchedule:
    """Per-field composite antenna weights for a coded beam group.

    Field t carries w[t] = (1/sqrt(K)) sum_p codes[p][t] * beam_p.  When the
    beams are mutually orthogonal every field has |w|^2 = 1; a schedule over
    a non-orthogonal group still decodes but loses that power flatness,
    which ``orthogonal_beams`` records.
    """

    beams: tuple[SteeringVector, ...]
    codes: tuple[SignatureCode, ...]
    field_weights: tuple[WeightVector, ...]
    orthogonal_beams: bool

    def __len__(self) -> int:
        return len(self.field_weights)

    @property
    def num_beams(self) -> int:
        return len(self.beams)


def _beam_list(beams: BeamCodebook | Sequence[SteeringVector]) -> list[SteeringVector]:
    if isinstance(beams, BeamCodebook):
        return list(beams.vectors)
    return list(beams)


def build_schedule(
    beams: BeamCodebook | Sequence[SteeringVector], codes: Sequence[SignatureCode]
) -> CodedWeightSchedule:
    """Composite weight sequence encoding ``beams`` with ``codes``."""
    vecs = _beam_list(beams)
    if len(vecs) == 0:
        raise ValueError("need at least one beam")
    if len(codes) != len(vecs):
        raise ValueError(f"{len(codes)} codes for {len(vecs)} beams")
    t = len(codes[0])
    if any(len(c) != t for c in codes):
        raise ValueError("all codes must have the same length")
    if t < len(vecs):
        raise ValueError(f"code length {t} cannot separate {len(vecs)} beams")
    orthogonal = all(
        are_orthogonal(vecs[i], vecs[j])
        for i in range(len(vecs))
        for j in range(i + 1, len(vecs))
    )
    fields = tuple(
        superpose_beams(vecs, [int(c.chips[ti]) for c in codes]) for ti in range(t)
    )
    return CodedWeightSchedule(
        beams=tuple(vecs),
        codes=tuple(codes),
        field_weights=fields,
        orthogonal_beams=orthogonal,
    )


@dataclass(frozen=True)
class CorrelationMatrix:
    """Correlator outputs r[p, q] for transmit beam p and receive beam q."""

    r: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.r, dtype=np.complex128)
        if arr.ndim != 2:
            raise ValueError("correlation matrix must be 2-D")
        arr.setflags(write=False)
        object.__setattr__(self, "r", arr)

    @property
    def num_tx(self) -> int:
        return int(self.r.shape[0])

    @property
    def num_rx(self) -> int:
        return int(self.r.shape[1])

    def magnitude(self) -> np.ndarray:
        return np.abs(self.r)

    def best_pair(self) -> tuple[int, int]:
        """Indices of the strongest entry; ties go to the lowest (p, q)."""
        flat = int(np.argmax(self.magnitude()))
        p, q = np.unravel_index(flat, self.r.shape)
        return int(p), int(q)


def decode_correlations(
    received: np.ndarray, codes: Sequence[SignatureCode]
) -> CorrelationMatrix:
    """Correlate per-field observations against the signature codes.

    ``received[q, t]`` is what receive beam q heard during field t; the
    output is r[p, q] = sum_t codes[p][t] * received[q, t].  With K coded
    beams and T chips a noiseless orthogonal transmission returns the
    per-beam channel gain scaled by T/sqrt(K); the scale is left in so the
    classic two-path example decodes to 2 and 2a on the aligned pairs.
    """
    y = np.asarray(received, dtype=np.complex128)
    if y.ndim != 2:
        raise ValueError("received must be a (num_rx, num_fields) matrix")
    t = len(codes[0])
    if y.shape[1] != t:
        raise ValueError(f"received has {y.shape[1]} fields but codes have {t} chips")
    s = np.stack([c.chips for c in codes]).astype(np.complex128)
    return CorrelationMatrix(s @ y.T)


def encode_ce_field(
    tap_gains: Sequence[complex], golay: GolayPair, guard: int
) -> np.ndarray:
    """One CE field as heard through a tapped channel.

    The transmitted field is [a | guard zeros | b | guard zeros]; ``guard``
    must be at least the highest tap index so the two halves do not smear
    into each other.
    """
    h = np.asarray(tap_gains, dtype=np.complex128)
    if h.ndim != 1 or h.size == 0:
        raise ValueError("tap_gains must be a nonempty 1-D sequence")
    if guard < h.size - 1:
        raise ValueError(f"guard {guard} shorter than channel spread {h.size - 1}")
    width = len(golay) + guard
    out = np.zeros(2 * width, dtype=np.complex128)
    spread = len(golay) + h.size - 1
    out[:spread] = np.convolve(golay.a, h)
    out[width : width + spread] = np.convolve(golay.b, h)
    return out


def decode_per_tap(
    received_fields: np.ndarray,
    golay: GolayPair,
    codes: Sequence[SignatureCode],
    num_taps: int | None = None,
) -> np.ndarray:
    """Per-beam, per-delay-tap gain estimates from coded CE fields.

    ``received_fields[t]`` is the sample stream of field t in the
    :func:`encode_ce_field` layout.  Golay correlation turns each field
    into a tap-delay profile; correlating the profiles against the codes
    across fields separates the beams.  Output is (num_beams, num_taps)
    and is fully normalized: gains injected through a
    :func:`build_schedule` composite come back at their original scale.
    """
    y = np.asarray(received_fields, dtype=np.complex128)
    t = len(codes[0])
    if y.ndim != 2 or y.shape[0] != t:
        raise ValueError(f"expected {t} fields of samples")
    length = len(golay)
    if y.shape[1] < 2 * length:
        raise ValueError(f"field of {y.shape[1]} samples is shorter than the CE pair")
    width = y.shape[1] // 2
    guard = width - length
    if num_taps is None:
        num_taps = guard + 1
    if num_taps > guard + 1:
        raise ValueError(f"cannot resolve {num_taps} taps from a guard of {guard}")

    profiles = np.empty((t, num_taps), dtype=np.complex128)
    a = golay.a.astype(np.complex128)
    b = golay.b.astype(np.complex128)
    for d in range(num_taps):
        profiles[:, d] = (
            y[:, d : d + length] @ a + y[:, width + d : width + d + length] @ b
        ) / (2.0 * length)

    s = np.stack([c.chips for c in codes]).astype(np.complex128)
    k = len(codes)
    return (math.sqrt(k) / t) * (s @ profiles)


def kronecker_codes(
    tx_codes: Sequence[SignatureCode], rx_codes: Sequence[SignatureCode]
) -> list[SignatureCode]:
    """Pairwise signature codes for simultaneous transmit and receive coding.

    Pair (p, q) gets chips kron(rx_q, tx_p): the outer chip index runs over
    receive-side fields, the inner one over transmit-side fields inside one
    receive dwell.  Codes come back in (p, q) row-major order with
    beam_index = p * len(rx_codes) + q.  This goes beyond plain
    transmit-side coding and exists for feedback training stages where both
    ends code at once.
    """
    out = []
    nrx = len(rx_codes)
    for p, tx in enumerate(tx_codes):
        for q, rx in enumerate(rx_codes):
            out.append(
                SignatureCode(chips=np.kron(rx.chips, tx.chips), beam_index=p * nrx + q)
            )
    return out
