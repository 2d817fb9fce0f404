"""Synthetic activation tables with a planted attack signal.

The generator builds a world where detection provably works: clean
activations are i.i.d. standard normal, and attacked activations add a mean
shift on a per-class subset of "informative" neurons. Averaging a candidate
fingerprint's neurons concentrates that shift, so expected effect sizes are
auditable by hand (roughly fraction * shift * sqrt(size) for a random
candidate). This gives the whole pipeline a ground-truth oracle at desk
scale; it does not try to imitate real network activations.

All tables are bit-reproducible: every (class, split, condition) gets its
own counter-derived RNG substream, so train/test splits are disjoint by
construction and generation order never matters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .tables import ActivationTable, TableKind

_STREAM_INFORMATIVE = 0
_STREAM_CLEAN_TRAIN = 1
_STREAM_CLEAN_TEST = 2
_STREAM_ATTACKED_TRAIN = 3
_STREAM_ATTACKED_TEST = 4


@dataclass(frozen=True)
class SynthConfig:
    n_neurons: int = 10_000
    n_classes: int = 3
    n_train_clean: int = 400
    n_test_clean: int = 100
    n_train_attacked: int = 400
    n_test_attacked: int = 100
    informative_fraction: float = 0.1
    attack_shift: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_neurons < 1:
            raise ConfigError(f"n_neurons must be >= 1, got {self.n_neurons}")
        if self.n_classes < 1:
            raise ConfigError(f"n_classes must be >= 1, got {self.n_classes}")
        for name in ("n_train_clean", "n_test_clean", "n_train_attacked", "n_test_attacked"):
            if getattr(self, name) < 2:
                raise ConfigError(f"{name} must be >= 2, got {getattr(self, name)}")
        if not 0.0 <= self.informative_fraction <= 1.0:
            raise ConfigError(
                f"informative_fraction must be in [0, 1], got {self.informative_fraction}"
            )
        if not math.isfinite(self.attack_shift):
            raise ConfigError(f"attack_shift must be finite, got {self.attack_shift}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be a u64, got {self.seed}")


@dataclass(frozen=True)
class SynthClassTables:
    clean_train: ActivationTable
    clean_test: ActivationTable
    attacked_train: ActivationTable
    attacked_test: ActivationTable
    informative: tuple[int, ...]


def _stream(config: SynthConfig, class_id: int, tag: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, class_id, tag])


def _draw(
    config: SynthConfig,
    class_id: int,
    tag: int,
    n_samples: int,
    kind: TableKind,
    informative: np.ndarray,
) -> ActivationTable:
    rng = _stream(config, class_id, tag)
    values = rng.standard_normal((n_samples, config.n_neurons))
    if kind is TableKind.ATTACKED and informative.size:
        values[:, informative] += config.attack_shift
    return ActivationTable(
        class_id=class_id, kind=kind, values=values.astype(np.float32)
    )


def synth_class_tables(config: SynthConfig, class_id: int) -> SynthClassTables:
    """All four tables for one class (train/test x clean/attacked)."""
    if not 0 <= class_id < config.n_classes:
        raise ConfigError(
            f"class_id must be in [0, {config.n_classes}), got {class_id}"
        )
    n_informative = int(round(config.informative_fraction * config.n_neurons))
    rng = _stream(config, class_id, _STREAM_INFORMATIVE)
    informative = np.sort(
        rng.choice(config.n_neurons, size=n_informative, replace=False, shuffle=False)
    )
    return SynthClassTables(
        clean_train=_draw(
            config, class_id, _STREAM_CLEAN_TRAIN,
            config.n_train_clean, TableKind.CLEAN, informative,
        ),
        clean_test=_draw(
            config, class_id, _STREAM_CLEAN_TEST,
            config.n_test_clean, TableKind.CLEAN, informative,
        ),
        attacked_train=_draw(
            config, class_id, _STREAM_ATTACKED_TRAIN,
            config.n_train_attacked, TableKind.ATTACKED, informative,
        ),
        attacked_test=_draw(
            config, class_id, _STREAM_ATTACKED_TEST,
            config.n_test_attacked, TableKind.ATTACKED, informative,
        ),
        informative=tuple(int(i) for i in informative),
    )


def synth_tables(config: SynthConfig) -> dict[int, SynthClassTables]:
    """Tables for every class under ``config``, keyed by class id."""
    return {c: synth_class_tables(config, c) for c in range(config.n_classes)}
