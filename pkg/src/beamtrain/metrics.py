"""Training-quality metrics: power-ratio statistics, empirical CDFs and
the geometric-mean style SNR aggregate used across Monte-Carlo runs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "PowerRatioSample",
    "EmpiricalCdf",
    "SnrAggregate",
    "power_ratio",
    "empirical_cdf",
    "aggregate_snr",
]


@dataclass(frozen=True)
class PowerRatioSample:
    """One training-field power ratio gamma = P_train / (3 sigma_prem).

    The 3x factor reflects the AGC's habit of budgeting for three standard
    deviations of preamble signal; gamma above one means the field would
    stress the gain setting the preamble established.
    """

    gamma: float
    scheme: str = ""
    seed: int | None = None
    field_index: int = 0


def power_ratio(
    field_powers: Sequence[float],
    preamble_samples: Sequence[complex],
    *,
    scheme: str = "",
    seed: int | None = None,
) -> list[PowerRatioSample]:
    """Per-field power ratios against the preamble's signal variance.

    ``sigma_prem`` is the population mean squared magnitude of the preamble
    samples (variance about zero; no sample-mean subtraction, no n-1).
    """
    samples = np.asarray(preamble_samples)
    if samples.size == 0:
        raise ValueError("preamble is empty")
    sigma = float(np.mean(np.abs(samples) ** 2))
    if sigma <= 0.0:
        raise ValueError("undefined ratio: preamble has zero variance")
    powers = np.asarray(field_powers, dtype=float)
    return [
        PowerRatioSample(gamma=float(p) / (3.0 * sigma), scheme=scheme, seed=seed, field_index=i)
        for i, p in enumerate(powers)
    ]


@dataclass(frozen=True)
class EmpiricalCdf:
    """Right-continuous empirical CDF, evaluable at arbitrary points."""

    sorted_values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.sort(np.asarray(self.sorted_values, dtype=float))
        arr.setflags(write=False)
        object.__setattr__(self, "sorted_values", arr)

    def __call__(self, x: float | np.ndarray) -> float | np.ndarray:
        frac = np.searchsorted(self.sorted_values, x, side="right") / self.sorted_values.size
        return float(frac) if np.isscalar(x) else frac

    def points(self) -> list[tuple[float, float]]:
        """(value, cumulative fraction) pairs at the jump points."""
        values, counts = np.unique(self.sorted_values, return_counts=True)
        fracs = np.cumsum(counts) / self.sorted_values.size
        return [(float(v), float(f)) for v, f in zip(values, fracs)]


def empirical_cdf(samples: Sequence[float]) -> EmpiricalCdf:
    """Empirical CDF of the samples; rejects empty input."""
    arr = np.asarray(samples, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot build a CDF from no samples")
    return EmpiricalCdf(arr)


def aggregate_snr(per_run: Sequence[float]) -> float:
    """Aggregate linear SNR: 2**(mean of log2(1 + SNR_i)) - 1.

    The geometric-style mean over capacities keeps a single lucky run from
    dominating the summary.  Inputs are linear (not dB) and must be
    nonnegative.
    """
    snrs = np.asarray(per_run, dtype=float)
    if snrs.size == 0:
        raise ValueError("need at least one run")
    if np.any(snrs < 0):
        raise ValueError("SNR values must be nonnegative")
    return float(2.0 ** np.mean(np.log2(1.0 + snrs)) - 1.0)


@dataclass(frozen=True)
class SnrAggregate:
    """Per-run linear SNRs together with their aggregate."""

    per_run_snr: tuple[float, ...]
    aggregate: float

    @classmethod
    def from_runs(cls, per_run: Sequence[float]) -> "SnrAggregate":
        return cls(per_run_snr=tuple(float(s) for s in per_run), aggregate=aggregate_snr(per_run))

    @property
    def num_runs(self) -> int:
        return len(self.per_run_snr)

    @property
    def aggregate_db(self) -> float:
        return 10.0 * math.log10(self.aggregate) if self.aggregate > 0 else -math.inf
