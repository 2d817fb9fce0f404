"""Runtime randomized detection.

For each input, a fresh handful of fingerprints is drawn from the predicted
class's bank and one of three decision rules turns their values into an
attack score. Scores share one orientation: larger means more suspicious,
and an input is flagged when its score strictly exceeds the threshold.

Rule score definitions (per selected fingerprint value F_i):

- likelihood_ratio: sum of log P_attack(F_i) - log P_clean(F_i). This is the
  negated log-ratio of the clean-over-attack likelihoods, so flagging
  score > t is the same as flagging when that ratio drops below exp(-t).
- vote: count of fingerprints with P_attack(F_i) >= P_clean(F_i); a tie
  counts as an attack vote.
- anomaly: negated clean log-likelihood, -sum log P_clean(F_i). Needs no
  attacked training data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    InsufficientBankError,
    PairingError,
    RuleUnavailableError,
)
from .fingerprints import ClassBank, Fingerprint, GaussianStats

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class Rule(Enum):
    LIKELIHOOD_RATIO = "likelihood_ratio"
    VOTE = "vote"
    ANOMALY = "anomaly"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def from_name(cls, name: str) -> "Rule":
        aliases = {"likelihood": cls.LIKELIHOOD_RATIO, "lr": cls.LIKELIHOOD_RATIO}
        key = name.strip().lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(
                f"unknown rule {name!r}; expected likelihood|vote|anomaly"
            ) from None


@dataclass(frozen=True)
class DetectorConfig:
    rule: Rule = Rule.LIKELIHOOD_RATIO
    n_fingerprints: int = 20
    threshold: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.rule, Rule):
            object.__setattr__(self, "rule", Rule.from_name(str(self.rule)))
        if self.n_fingerprints < 1:
            raise ConfigError(
                f"n_fingerprints must be >= 1, got {self.n_fingerprints}"
            )
        if math.isnan(self.threshold):
            raise ConfigError("threshold must not be NaN")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a u64, got {self.seed}")


@dataclass(frozen=True)
class Verdict:
    attack_score: float
    is_attack: bool
    fingerprint_ids: tuple[int, ...]
    rule: Rule


def select_fingerprints(
    bank: ClassBank, k: int, rng: np.random.Generator
) -> list[Fingerprint]:
    """Draw ``k`` distinct fingerprints uniformly without replacement.

    Implemented as a permutation prefix, so for a fixed generator state the
    selection at a smaller ``k`` is a prefix of the selection at a larger one.
    """
    if k < 1:
        raise ConfigError(f"selection size must be >= 1, got {k}")
    if len(bank) < k:
        raise InsufficientBankError(len(bank), k)
    order = rng.permutation(len(bank))[:k]
    return [bank.fingerprints[i] for i in order]


def gaussian_log_density(value: float, stats: GaussianStats) -> float:
    """Log of the normal density at ``value`` under ``stats``."""
    z = (value - stats.mean) / stats.std
    return -_HALF_LOG_2PI - math.log(stats.std) - 0.5 * z * z


def _fingerprint_values_for(
    activations: np.ndarray, fps: Sequence[Fingerprint]
) -> np.ndarray:
    index_matrix = np.asarray([fp.indices.indices for fp in fps])
    return activations[index_matrix].mean(axis=1, dtype=np.float64)


def _log_densities(values: np.ndarray, means: np.ndarray, stds: np.ndarray) -> np.ndarray:
    z = (values - means) / stds
    return -_HALF_LOG_2PI - np.log(stds) - 0.5 * z * z


def _check_activations(activations, n_neurons: int) -> np.ndarray:
    arr = np.asarray(activations)
    if arr.ndim != 1 or arr.shape[0] != n_neurons:
        raise PairingError(
            "n_neurons",
            f"activations have shape {arr.shape}, expected ({n_neurons},)",
        )
    return arr


def _checked(activations, fps: Sequence[Fingerprint]) -> np.ndarray:
    if not fps:
        raise ConfigError("scoring requires at least one fingerprint")
    return _check_activations(activations, fps[0].indices.n_neurons)


def _clean_params(fps: Sequence[Fingerprint]) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.asarray([fp.clean.mean for fp in fps]),
        np.asarray([fp.clean.std for fp in fps]),
    )


def _attack_params(fps: Sequence[Fingerprint]) -> tuple[np.ndarray, np.ndarray]:
    missing = [fp.id for fp in fps if fp.attack is None]
    if missing:
        raise RuleUnavailableError(
            f"rule needs attack statistics; fingerprints {missing} have none "
            "(clean-only bank)"
        )
    return (
        np.asarray([fp.attack.mean for fp in fps]),
        np.asarray([fp.attack.std for fp in fps]),
    )


def score_likelihood_ratio(activations, fps: Sequence[Fingerprint]) -> float:
    """Summed per-fingerprint log-density gap, attack minus clean."""
    arr = _checked(activations, fps)
    values = _fingerprint_values_for(arr, fps)
    am, astd = _attack_params(fps)
    cm, cstd = _clean_params(fps)
    diff = _log_densities(values, am, astd) - _log_densities(values, cm, cstd)
    return float(diff.sum())


def score_vote(activations, fps: Sequence[Fingerprint]) -> int:
    """Number of fingerprints whose attack density is >= the clean density."""
    arr = _checked(activations, fps)
    values = _fingerprint_values_for(arr, fps)
    am, astd = _attack_params(fps)
    cm, cstd = _clean_params(fps)
    votes = _log_densities(values, am, astd) >= _log_densities(values, cm, cstd)
    return int(votes.sum())


def score_anomaly(activations, fps: Sequence[Fingerprint]) -> float:
    """Negated clean log-likelihood; defined for clean-only banks too."""
    arr = _checked(activations, fps)
    values = _fingerprint_values_for(arr, fps)
    cm, cstd = _clean_params(fps)
    return float(-_log_densities(values, cm, cstd).sum())


_SCORERS = {
    Rule.LIKELIHOOD_RATIO: score_likelihood_ratio,
    Rule.VOTE: score_vote,
    Rule.ANOMALY: score_anomaly,
}


def detect(
    activations,
    bank: ClassBank,
    config: DetectorConfig,
    rng: np.random.Generator,
) -> Verdict:
    """Run one randomized detection: sample fingerprints, score, threshold."""
    arr = _check_activations(activations, bank.n_neurons)
    fps = select_fingerprints(bank, config.n_fingerprints, rng)
    score = float(_SCORERS[config.rule](arr, fps))
    return Verdict(
        attack_score=score,
        is_attack=score > config.threshold,
        fingerprint_ids=tuple(fp.id for fp in fps),
        rule=config.rule,
    )


def detector_rng(config: DetectorConfig) -> np.random.Generator:
    """Fresh generator for a detection session under ``config.seed``."""
    return np.random.default_rng(config.seed)
