"""Closed-form collaboration metrics and the phase-diagram regime classifier.

All functions here are pure. Scores are unitless in [0, 1]; drift rates are
in score units per simulation tick.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

AI_DOMINATED_THRESHOLD = 0.8
HUMAN_DOMINANT_THRESHOLD = 0.5


class MetricError(ValueError):
    """Raised when a metric is undefined for its inputs."""


class Quadrant(str, enum.Enum):
    AMPLIFICATION = "Amplification"
    AUTOMATION_TRAP = "AutomationTrap"
    HUMAN_DOMINANT = "HumanDominant"
    INEFFECTIVE_AUTOMATION = "IneffectiveAutomation"


class DominanceBand(str, enum.Enum):
    HUMAN_DOMINANT = "HumanDominant"
    BALANCED = "Balanced"
    AI_DOMINATED = "AIDominated"


@dataclass(frozen=True)
class PerformanceTriple:
    """Standalone human, standalone AI and hybrid performance."""

    q_h: float
    q_a: float
    q_ha: float

    def __post_init__(self) -> None:
        for name in ("q_h", "q_a", "q_ha"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise MetricError(f"{name}={value!r} outside [0, 1]")


@dataclass(frozen=True)
class MetricSet:
    cai_star: float
    d: float
    hri: float
    hcdr: float

    def to_dict(self) -> dict:
        return {"cai_star": self.cai_star, "d": self.d, "hri": self.hri, "hcdr": self.hcdr}


@dataclass(frozen=True)
class RegimeLabel:
    quadrant: Quadrant
    sustainable: bool
    dominance_band: DominanceBand

    def to_dict(self) -> dict:
        return {
            "quadrant": self.quadrant.value,
            "sustainable": self.sustainable,
            "dominance_band": self.dominance_band.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegimeLabel":
        return cls(
            Quadrant(data["quadrant"]),
            bool(data["sustainable"]),
            DominanceBand(data["dominance_band"]),
        )


def cai_star(t: PerformanceTriple) -> float:
    """Relative gain of the hybrid over the best standalone agent."""
    best = max(t.q_h, t.q_a)
    if best <= 0.0:
        raise MetricError("degenerate baseline: max(q_h, q_a) must be positive")
    return (t.q_ha - best) / best


def dependency_ratio(t: PerformanceTriple) -> float:
    """``q_a / q_ha``. Values above 1 flag ineffective integration."""
    if t.q_ha <= 0.0:
        raise MetricError("dependency ratio undefined for q_ha = 0")
    return t.q_a / t.q_ha


def hri(d: float) -> float:
    if not math.isfinite(d):
        raise MetricError(f"dependency ratio must be finite, got {d!r}")
    return 1.0 - d


def hcdr(samples: Iterable[tuple[float, float]]) -> float:
    """Least-squares slope of AI-off performance against time.

    With exactly two samples this is the plain difference quotient. The
    response is centred on its first value rather than its mean, so an
    exactly constant series yields exactly 0.
    """
    arr = np.asarray(list(samples), dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise MetricError("hcdr needs at least 2 (time, q_h) samples")
    t, y = arr[:, 0], arr[:, 1]
    if np.any(np.diff(t) <= 0):
        raise MetricError("sample times must be strictly increasing")
    tc = t - t.mean()
    return float(np.dot(tc, y - y[0]) / np.dot(tc, tc))


def synergy_model(q_h: float, q_a: float, alpha: float) -> float:
    """Idealised additive-plus-interaction hybrid score (unclamped)."""
    return q_h + q_a + alpha * q_h * q_a


def compute_metrics(t: PerformanceTriple, drift: float) -> MetricSet:
    d = dependency_ratio(t)
    return MetricSet(cai_star=cai_star(t), d=d, hri=hri(d), hcdr=drift)


def dominance_band(d: float) -> DominanceBand:
    if d < HUMAN_DOMINANT_THRESHOLD:
        return DominanceBand.HUMAN_DOMINANT
    if d <= AI_DOMINATED_THRESHOLD:
        return DominanceBand.BALANCED
    return DominanceBand.AI_DOMINATED


def classify_regime(m: MetricSet) -> RegimeLabel:
    """Place a metric set on the (D, CAI*) phase diagram.

    ``cai_star <= 0`` falls in the lower half. In the upper-right region the
    automation trap needs negative drift; with non-negative drift the point
    counts as amplification (its band still reads AI-dominated).
    """
    high_d = m.d > AI_DOMINATED_THRESHOLD
    sustainable = m.hcdr >= 0.0
    if m.cai_star > 0.0:
        quadrant = (
            Quadrant.AUTOMATION_TRAP if high_d and not sustainable else Quadrant.AMPLIFICATION
        )
    else:
        quadrant = Quadrant.INEFFECTIVE_AUTOMATION if high_d else Quadrant.HUMAN_DOMINANT
    return RegimeLabel(quadrant, sustainable, dominance_band(m.d))


def stable_mean(values: Sequence[float] | np.ndarray) -> float:
    """Mean that returns a constant series' value bit-exactly."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise MetricError("mean of empty sequence")
    return float(arr[0] + np.mean(arr - arr[0]))
