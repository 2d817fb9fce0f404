"""ROC curves, threshold calibration, and the desk-scale experiment harness.

The harness reproduces the shape of the published protocol on local data:
per class it builds a bank from training tables, calibrates per-rule
thresholds on training clean scores at each target false-positive rate, and
scores held-out test tables with fresh per-input fingerprint selection.
Results are reported per (rule, fingerprint-count, class, seed) and averaged
across classes and seeds.

Flagging is strict (score > threshold) and calibration returns an order
statistic of the calibration scores, so the empirical false-positive rate on
the calibration set never exceeds the target.
"""

from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping

import numpy as np

from .detector import Rule, _log_densities
from .errors import ConfigError, InsufficientDataError, NeuralFingerprintError
from .fingerprints import BankConfig, ClassBank, generate_bank
from .tables import ActivationTable, read_table

DEFAULT_TARGET_FPRS = (0.01, 0.02, 0.05)

# RNG stream tags for the harness's per-input fingerprint selection.
_PHASE_CALIBRATE = 0
_PHASE_TEST_CLEAN = 1
_PHASE_TEST_ATTACKED = 2


@dataclass(frozen=True)
class RocCurve:
    """Empirical ROC: (fpr, tpr, threshold) points, thresholds descending."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    n_clean: int
    n_attacked: int

    def __post_init__(self):
        fpr = np.asarray(self.fpr, dtype=np.float64)
        tpr = np.asarray(self.tpr, dtype=np.float64)
        thr = np.asarray(self.thresholds, dtype=np.float64)
        if not (fpr.shape == tpr.shape == thr.shape) or fpr.ndim != 1 or fpr.size < 2:
            raise ConfigError("ROC arrays must be 1-D, equal-length, with >= 2 points")
        if np.any(np.diff(thr) > 0):
            raise ConfigError("ROC thresholds must be non-increasing")
        if np.any(np.diff(fpr) < 0) or np.any(np.diff(tpr) < 0):
            raise ConfigError("ROC rates must be non-decreasing along the curve")
        if not (fpr[0] == tpr[0] == 0.0 and fpr[-1] == tpr[-1] == 1.0):
            raise ConfigError("ROC must start at (0,0) and end at (1,1)")
        for name, arr in (("fpr", fpr), ("tpr", tpr)):
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "thresholds", thr)

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return [
            (float(f), float(t), float(th))
            for f, t, th in zip(self.fpr, self.tpr, self.thresholds)
        ]


def _finite_scores(scores, side: str) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64).reshape(-1)
    if arr.size == 0:
        raise InsufficientDataError(f"{side} score list is empty")
    if np.isnan(arr).any():
        raise ConfigError(f"{side} scores contain NaN")
    return arr


def roc_curve(clean_scores, attacked_scores) -> RocCurve:
    """Empirical ROC over all distinct thresholds.

    At threshold t, fpr is the fraction of clean scores strictly above t and
    tpr the fraction of attacked scores strictly above t.
    """
    clean = _finite_scores(clean_scores, "clean")
    attacked = _finite_scores(attacked_scores, "attacked")
    distinct = np.unique(np.concatenate([clean, attacked]))[::-1]
    thresholds = np.concatenate([[np.inf], distinct, [-np.inf]])
    clean_sorted = np.sort(clean)
    attacked_sorted = np.sort(attacked)
    fpr = (
        clean.size - np.searchsorted(clean_sorted, thresholds, side="right")
    ) / clean.size
    tpr = (
        attacked.size - np.searchsorted(attacked_sorted, thresholds, side="right")
    ) / attacked.size
    return RocCurve(
        fpr=fpr,
        tpr=tpr,
        thresholds=thresholds,
        n_clean=int(clean.size),
        n_attacked=int(attacked.size),
    )


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve.

    Equals the probability that an attacked score exceeds a clean score,
    counting exact ties with weight one half.
    """
    return float(np.trapezoid(curve.tpr, curve.fpr))


def calibrate_threshold(clean_calibration_scores, target_fpr: float) -> float:
    """Smallest score such that the fraction strictly above it is <= target.

    Integer fix-up keeps the choice exact under floating-point division, so
    the calibration-set false-positive guarantee always holds.
    """
    if not (isinstance(target_fpr, (int, float)) and 0.0 < target_fpr < 1.0):
        raise ConfigError(f"target_fpr must lie in (0, 1), got {target_fpr}")
    x = np.sort(_finite_scores(clean_calibration_scores, "calibration"))
    n = x.size
    allowed = int(math.floor(n * target_fpr))
    while (allowed + 1) / n <= target_fpr:
        allowed += 1
    while allowed > 0 and allowed / n > target_fpr:
        allowed -= 1
    return float(x[n - 1 - allowed])


@dataclass(frozen=True)
class OperatingPoint:
    target_fpr: float
    threshold: float
    tpr: float
    fpr: float

    def __post_init__(self):
        for name in ("tpr", "fpr"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")


@dataclass(frozen=True)
class CellMetrics:
    """Metrics for one (rule, k, class, seed) experiment cell."""

    rule: Rule
    k: int
    class_id: int
    seed_index: int
    auc: float
    operating_points: tuple[OperatingPoint, ...]

    def __post_init__(self):
        if not 0.0 <= self.auc <= 1.0:
            raise ConfigError(f"AUC must be in [0, 1], got {self.auc}")

    def point(self, target_fpr: float) -> OperatingPoint:
        for op in self.operating_points:
            if op.target_fpr == target_fpr:
                return op
        raise KeyError(f"no operating point for target_fpr={target_fpr}")


@dataclass(frozen=True)
class AggregatePoint:
    target_fpr: float
    tpr_mean: float
    fpr_mean: float


@dataclass(frozen=True)
class AggregateMetrics:
    """Means over classes and seeds for one (rule, k)."""

    rule: Rule
    k: int
    auc_mean: float
    operating_points: tuple[AggregatePoint, ...]

    def point(self, target_fpr: float) -> AggregatePoint:
        for op in self.operating_points:
            if op.target_fpr == target_fpr:
                return op
        raise KeyError(f"no operating point for target_fpr={target_fpr}")


@dataclass(frozen=True)
class ExperimentReport:
    config: dict
    class_ids: tuple[int, ...]
    n_seeds: int
    bank_sizes: dict[int, int]
    cells: tuple[CellMetrics, ...]
    aggregates: tuple[AggregateMetrics, ...] = field(default=())

    def aggregate(self, rule: Rule, k: int) -> AggregateMetrics:
        for agg in self.aggregates:
            if agg.rule is rule and agg.k == k:
                return agg
        raise KeyError(f"no aggregate for rule={rule}, k={k}")

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "class_ids": list(self.class_ids),
            "n_seeds": self.n_seeds,
            "bank_sizes": {str(c): n for c, n in sorted(self.bank_sizes.items())},
            "cells": [
                {
                    "rule": cell.rule.value,
                    "k": cell.k,
                    "class_id": cell.class_id,
                    "seed_index": cell.seed_index,
                    "auc": cell.auc,
                    "operating_points": [
                        {
                            "target_fpr": op.target_fpr,
                            "threshold": op.threshold,
                            "tpr": op.tpr,
                            "fpr": op.fpr,
                        }
                        for op in cell.operating_points
                    ],
                }
                for cell in self.cells
            ],
            "aggregates": [
                {
                    "rule": agg.rule.value,
                    "k": agg.k,
                    "auc_mean": agg.auc_mean,
                    "operating_points": [
                        {
                            "target_fpr": op.target_fpr,
                            "tpr_mean": op.tpr_mean,
                            "fpr_mean": op.fpr_mean,
                        }
                        for op in agg.operating_points
                    ],
                }
                for agg in self.aggregates
            ],
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """Grid and replication settings for the experiment harness."""

    bank: BankConfig
    rules: tuple[Rule, ...] = (Rule.LIKELIHOOD_RATIO, Rule.VOTE, Rule.ANOMALY)
    k_values: tuple[int, ...] = (20,)
    target_fprs: tuple[float, ...] = DEFAULT_TARGET_FPRS
    n_seeds: int = 10
    base_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(
            self, "rules", tuple(Rule.from_name(str(r)) if not isinstance(r, Rule) else r
                                 for r in self.rules)
        )
        object.__setattr__(self, "k_values", tuple(sorted(set(int(k) for k in self.k_values))))
        object.__setattr__(self, "target_fprs", tuple(float(f) for f in self.target_fprs))
        if not self.rules:
            raise ConfigError("at least one rule is required")
        if not self.k_values or self.k_values[0] < 1:
            raise ConfigError(f"k_values must be positive, got {self.k_values}")
        for f in self.target_fprs:
            if not 0.0 < f < 1.0:
                raise ConfigError(f"target FPRs must lie in (0, 1), got {f}")
        if self.n_seeds < 1:
            raise ConfigError(f"n_seeds must be >= 1, got {self.n_seeds}")


@dataclass(frozen=True)
class ClassData:
    """The four tables the protocol needs for one class."""

    class_id: int
    clean_train: ActivationTable
    clean_test: ActivationTable
    attacked_train: ActivationTable
    attacked_test: ActivationTable


_FILE_RE = re.compile(r"^class(\d+)_clean_train\.nfat$")


def discover_classes(data_dir: str | Path) -> list[int]:
    """Class ids present in ``data_dir`` (complete quadruples required)."""
    data_dir = Path(data_dir)
    ids = sorted(
        int(m.group(1))
        for m in (_FILE_RE.match(p.name) for p in data_dir.glob("class*_clean_train.nfat"))
        if m
    )
    if not ids:
        raise NeuralFingerprintError(f"no class*_clean_train.nfat files in {data_dir}")
    for c in ids:
        for stem in ("clean_test", "attacked_train", "attacked_test"):
            path = data_dir / f"class{c}_{stem}.nfat"
            if not path.exists():
                raise NeuralFingerprintError(f"missing table file {path}")
    return ids


def load_class_data(data_dir: str | Path, class_id: int) -> ClassData:
    data_dir = Path(data_dir)

    def rd(stem: str) -> ActivationTable:
        return read_table(data_dir / f"class{class_id}_{stem}.nfat")

    return ClassData(
        class_id=class_id,
        clean_train=rd("clean_train"),
        clean_test=rd("clean_test"),
        attacked_train=rd("attacked_train"),
        attacked_test=rd("attacked_test"),
    )


class _BankArrays:
    """Columnar view of a bank for fast batch scoring."""

    def __init__(self, bank: ClassBank):
        fps = bank.fingerprints
        self.n_fingerprints = len(fps)
        self.ids = np.asarray([fp.id for fp in fps], dtype=np.int64)
        self.index_matrix = np.asarray(
            [fp.indices.indices for fp in fps], dtype=np.int64
        )
        self.clean_mean = np.asarray([fp.clean.mean for fp in fps])
        self.clean_std = np.asarray([fp.clean.std for fp in fps])
        if all(fp.attack is not None for fp in fps) and fps:
            self.attack_mean = np.asarray([fp.attack.mean for fp in fps])
            self.attack_std = np.asarray([fp.attack.std for fp in fps])
        else:
            self.attack_mean = self.attack_std = None


def _score_rows(
    values: np.ndarray,
    arrays: _BankArrays,
    rules: tuple[Rule, ...],
    k_values: tuple[int, ...],
    rng_for_row: Callable[[int], np.random.Generator],
) -> dict[tuple[Rule, int], np.ndarray]:
    """Scores for every row under every (rule, k), with shared selections.

    Per row one permutation of the bank is drawn; each k uses its prefix.
    This mirrors select_fingerprints exactly while letting all rules and
    fingerprint counts share one set of gathered activation means.
    """
    k_max = max(k_values)
    if arrays.n_fingerprints < k_max:
        raise InsufficientDataError(
            f"bank holds {arrays.n_fingerprints} fingerprints, grid needs {k_max}"
        )
    needs_attack = any(r in (Rule.LIKELIHOOD_RATIO, Rule.VOTE) for r in rules)
    if needs_attack and arrays.attack_mean is None:
        raise NeuralFingerprintError(
            "likelihood_ratio/vote rules need attack statistics in the bank"
        )
    n_rows = values.shape[0]
    out = {(r, k): np.empty(n_rows) for r in rules for k in k_values}
    for row in range(n_rows):
        rng = rng_for_row(row)
        sel = rng.permutation(arrays.n_fingerprints)[:k_max]
        fv = values[row][arrays.index_matrix[sel]].mean(axis=1, dtype=np.float64)
        lc = _log_densities(fv, arrays.clean_mean[sel], arrays.clean_std[sel])
        if needs_attack:
            la = _log_densities(fv, arrays.attack_mean[sel], arrays.attack_std[sel])
        for k in k_values:
            for rule in rules:
                if rule is Rule.LIKELIHOOD_RATIO:
                    out[(rule, k)][row] = (la[:k] - lc[:k]).sum()
                elif rule is Rule.VOTE:
                    out[(rule, k)][row] = float((la[:k] >= lc[:k]).sum())
                else:
                    out[(rule, k)][row] = -lc[:k].sum()
    return out


def _derive_class_seed(master_seed: int, class_id: int) -> int:
    return int(
        np.random.SeedSequence(entropy=[master_seed, class_id]).generate_state(
            1, np.uint64
        )[0]
    )


def build_class_banks(
    data: Iterable[ClassData], config: ExperimentConfig
) -> dict[int, ClassBank]:
    """One bank per class; each class gets its own derived master seed."""
    banks = {}
    for cd in data:
        class_config = dataclasses.replace(
            config.bank,
            master_seed=_derive_class_seed(config.bank.master_seed, cd.class_id),
        )
        banks[cd.class_id] = generate_bank(
            cd.clean_train, cd.attacked_train, class_config, workers=config.workers
        )
    return banks


def run_experiment(
    data_dir: str | Path,
    config: ExperimentConfig,
    banks: Mapping[int, ClassBank] | None = None,
) -> ExperimentReport:
    """Full protocol over every class in ``data_dir``.

    Banks are built once per class from the training tables (pass ``banks``
    to reuse prebuilt ones); seeds replicate the randomized-detection side:
    calibration and test scoring draw fresh fingerprints per input from
    seed-indexed substreams.
    """
    class_ids = discover_classes(data_dir)
    data = [load_class_data(data_dir, c) for c in class_ids]
    if banks is None:
        banks = build_class_banks(data, config)

    cells: list[CellMetrics] = []
    for cd in data:
        bank = banks[cd.class_id]
        arrays = _BankArrays(bank)
        for seed_index in range(config.n_seeds):

            def rng_factory(phase):
                def make(row: int) -> np.random.Generator:
                    return np.random.default_rng(
                        [config.base_seed, seed_index, cd.class_id, phase, row]
                    )

                return make

            calib = _score_rows(
                cd.clean_train.values, arrays, config.rules, config.k_values,
                rng_factory(_PHASE_CALIBRATE),
            )
            test_clean = _score_rows(
                cd.clean_test.values, arrays, config.rules, config.k_values,
                rng_factory(_PHASE_TEST_CLEAN),
            )
            test_attacked = _score_rows(
                cd.attacked_test.values, arrays, config.rules, config.k_values,
                rng_factory(_PHASE_TEST_ATTACKED),
            )
            for rule in config.rules:
                for k in config.k_values:
                    clean_scores = test_clean[(rule, k)]
                    attacked_scores = test_attacked[(rule, k)]
                    cell_auc = auc(roc_curve(clean_scores, attacked_scores))
                    points = []
                    for target in config.target_fprs:
                        thr = calibrate_threshold(calib[(rule, k)], target)
                        points.append(
                            OperatingPoint(
                                target_fpr=target,
                                threshold=thr,
                                tpr=float((attacked_scores > thr).mean()),
                                fpr=float((clean_scores > thr).mean()),
                            )
                        )
                    cells.append(
                        CellMetrics(
                            rule=rule,
                            k=k,
                            class_id=cd.class_id,
                            seed_index=seed_index,
                            auc=cell_auc,
                            operating_points=tuple(points),
                        )
                    )

    aggregates = []
    for rule in config.rules:
        for k in config.k_values:
            group = [c for c in cells if c.rule is rule and c.k == k]
            points = tuple(
                AggregatePoint(
                    target_fpr=target,
                    tpr_mean=float(np.mean([c.point(target).tpr for c in group])),
                    fpr_mean=float(np.mean([c.point(target).fpr for c in group])),
                )
                for target in config.target_fprs
            )
            aggregates.append(
                AggregateMetrics(
                    rule=rule,
                    k=k,
                    auc_mean=float(np.mean([c.auc for c in group])),
                    operating_points=points,
                )
            )

    return ExperimentReport(
        config={
            "data_dir": str(data_dir),
            "bank": {
                "fingerprint_size": config.bank.fingerprint_size,
                "num_candidates": config.bank.num_candidates,
                "effect_threshold": config.bank.effect_threshold,
                "max_bank_size": config.bank.max_bank_size,
                "max_neuron_reuse": config.bank.max_neuron_reuse,
                "master_seed": config.bank.master_seed,
                "mode": config.bank.mode.value,
            },
            "rules": [r.value for r in config.rules],
            "k_values": list(config.k_values),
            "target_fprs": list(config.target_fprs),
            "n_seeds": config.n_seeds,
            "base_seed": config.base_seed,
        },
        class_ids=tuple(class_ids),
        n_seeds=config.n_seeds,
        bank_sizes={c: len(banks[c]) for c in class_ids},
        cells=tuple(cells),
        aggregates=tuple(aggregates),
    )
