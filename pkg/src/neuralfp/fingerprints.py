"""Fingerprint sampling, Gaussian fitting, effect-size screening, bank generation.

A fingerprint is a small set of neuron indices; its value on a sample is the
mean of the selected activations. Banks are built by sampling many candidate
index sets, fitting one Gaussian per condition to each candidate's values,
and keeping candidates whose clean/attacked separation (absolute Cohen's d,
pooled-standard-deviation form) clears a threshold.

Candidate randomness is counter-derived: candidate ``i`` under master seed
``s`` always yields the same index set, no matter how candidates are batched
or scheduled. Bank generation is therefore a pure function of its inputs.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    ConfigError,
    InsufficientDataError,
    PairingError,
    TableValidationError,
)
from .tables import ActivationTable, TableKind, table_digest, validate_pair

# Lower bound on fitted standard deviations. Prevents infinite log-likelihoods
# on degenerate constant-valued fingerprints.
STD_FLOOR = 1e-8

# Tolerance for re-checking a stored effect size against its stored stats.
EFFECT_RECOMPUTE_RTOL = 1e-12

_EVAL_CHUNK = 512


class BankMode(Enum):
    TWO_SAMPLE = "two_sample"
    CLEAN_ONLY = "clean_only"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class FingerprintIndices:
    """A sorted set of distinct neuron indices into an N-wide activation vector."""

    indices: tuple[int, ...]
    n_neurons: int

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(idx) < 1:
            raise ConfigError("fingerprint must select at least one neuron")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ConfigError(f"indices must be strictly increasing, got {idx}")
        if idx[0] < 0 or idx[-1] >= self.n_neurons:
            raise ConfigError(
                f"indices must lie in [0, {self.n_neurons}), got range "
                f"[{idx[0]}, {idx[-1]}]"
            )
        object.__setattr__(self, "indices", idx)

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass(frozen=True)
class GaussianStats:
    """Mean and standard deviation of one fingerprint's values under one condition."""

    mean: float
    std: float
    count: int

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.std)):
            raise TableValidationError(
                f"Gaussian stats must be finite, got mean={self.mean}, std={self.std}"
            )
        if self.std < STD_FLOOR:
            raise TableValidationError(
                f"std {self.std} is below the floor {STD_FLOOR}"
            )
        if self.count < 2:
            raise InsufficientDataError(
                f"Gaussian stats need >= 2 samples, got {self.count}"
            )


@dataclass(frozen=True)
class Fingerprint:
    """An accepted fingerprint: index set plus fitted condition models.

    ``attack`` and ``effect_size`` are absent in clean-only (anomaly) banks.
    """

    id: int
    indices: FingerprintIndices
    clean: GaussianStats
    attack: GaussianStats | None = None
    effect_size: float | None = None

    def __post_init__(self):
        if (self.attack is None) != (self.effect_size is None):
            raise ConfigError(
                "attack stats and effect_size must be present or absent together"
            )
        if self.attack is not None:
            expected = cohens_d(self.clean, self.attack)
            tol = EFFECT_RECOMPUTE_RTOL * max(1.0, abs(expected))
            if not abs(self.effect_size - expected) <= tol:
                raise ConfigError(
                    f"stored effect size {self.effect_size} disagrees with "
                    f"recomputed {expected}"
                )


@dataclass(frozen=True)
class BankConfig:
    """Knobs for the sample-and-filter bank generation procedure."""

    fingerprint_size: int = 50
    num_candidates: int = 100_000
    effect_threshold: float = 1.0
    max_bank_size: int | None = None
    max_neuron_reuse: int | None = None
    master_seed: int = 0
    mode: BankMode = BankMode.TWO_SAMPLE

    def __post_init__(self):
        if self.fingerprint_size < 1:
            raise ConfigError(f"fingerprint_size must be >= 1, got {self.fingerprint_size}")
        if self.num_candidates < 0:
            raise ConfigError(f"num_candidates must be >= 0, got {self.num_candidates}")
        if not (math.isfinite(self.effect_threshold) and self.effect_threshold >= 0):
            raise ConfigError(
                f"effect_threshold must be finite and >= 0, got {self.effect_threshold}"
            )
        if self.max_bank_size is not None and self.max_bank_size < 1:
            raise ConfigError(f"max_bank_size must be >= 1, got {self.max_bank_size}")
        if self.max_neuron_reuse is not None and self.max_neuron_reuse < 1:
            raise ConfigError(f"max_neuron_reuse must be >= 1, got {self.max_neuron_reuse}")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError(f"master_seed must be a u64, got {self.master_seed}")
        if not isinstance(self.mode, BankMode):
            object.__setattr__(self, "mode", BankMode(self.mode))


@dataclass(frozen=True)
class ClassBank:
    """All accepted fingerprints for one class, with generation provenance."""

    class_id: int
    n_neurons: int
    config: BankConfig
    fingerprints: tuple[Fingerprint, ...]
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "fingerprints", tuple(self.fingerprints))
        ids = [fp.id for fp in self.fingerprints]
        if len(set(ids)) != len(ids):
            raise ConfigError("fingerprint ids must be unique within a bank")
        reuse = self.config.max_neuron_reuse
        counts: dict[int, int] = {}
        for fp in self.fingerprints:
            if fp.indices.n_neurons != self.n_neurons:
                raise ConfigError(
                    f"fingerprint {fp.id} indexes {fp.indices.n_neurons} neurons, "
                    f"bank has {self.n_neurons}"
                )
            if reuse is not None:
                for j in fp.indices.indices:
                    counts[j] = counts.get(j, 0) + 1
                    if counts[j] > reuse:
                        raise ConfigError(
                            f"neuron {j} appears in more than {reuse} fingerprints"
                        )

    def __len__(self) -> int:
        return len(self.fingerprints)


def sample_candidate(
    candidate_index: int, config: BankConfig, n_neurons: int
) -> FingerprintIndices:
    """Draw candidate ``candidate_index``'s index set under ``config``.

    The draw is uniform without replacement over ``[0, n_neurons)`` and is a
    pure function of (master_seed, candidate_index): the same pair yields the
    same sorted subset regardless of evaluation order or batching.
    """
    d = config.fingerprint_size
    if d > n_neurons:
        raise ConfigError(
            f"fingerprint_size {d} exceeds the table's {n_neurons} neurons"
        )
    rng = np.random.default_rng([config.master_seed, candidate_index])
    idx = np.sort(rng.choice(n_neurons, size=d, replace=False, shuffle=False))
    return FingerprintIndices(indices=tuple(int(i) for i in idx), n_neurons=n_neurons)


def fingerprint_values(
    indices: FingerprintIndices, table: ActivationTable
) -> np.ndarray:
    """Per-sample fingerprint values: the mean of the selected activations."""
    if indices.n_neurons != table.n_neurons:
        raise PairingError(
            "n_neurons",
            f"fingerprint indexes {indices.n_neurons} neurons, "
            f"table has {table.n_neurons}",
        )
    cols = table.values[:, np.asarray(indices.indices)]
    return cols.mean(axis=1, dtype=np.float64)


def fit_gaussian(values) -> GaussianStats:
    """Fit mean and unbiased (n-1) standard deviation, floored at STD_FLOOR."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        x = x.reshape(-1)
    if x.size < 2:
        raise InsufficientDataError(
            f"Gaussian fit needs at least 2 values, got {x.size}"
        )
    if not np.isfinite(x).all():
        raise TableValidationError("Gaussian fit input contains non-finite values")
    mean = float(np.mean(x))
    std = max(float(np.std(x, ddof=1)), STD_FLOOR)
    return GaussianStats(mean=mean, std=std, count=int(x.size))


def cohens_d(clean: GaussianStats, attack: GaussianStats) -> float:
    """Standardized clean-vs-attack mean difference with pooled std.

    Screening uses the absolute value; the sign records which condition
    sits higher.
    """
    m, mp = clean.count, attack.count
    pooled_var = ((m - 1) * clean.std**2 + (mp - 1) * attack.std**2) / (m + mp - 2)
    return (clean.mean - attack.mean) / math.sqrt(pooled_var)


def _chunk_stats(values_t: np.ndarray, index_matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-candidate (mean, ddof-1 std) over a chunk of index sets.

    ``values_t`` is the (N, m) transposed activation matrix. Reductions are
    arranged to be bit-identical to fit_gaussian(fingerprint_values(...)) for
    each candidate, so results do not depend on chunk boundaries.
    """
    n_cand, d = index_matrix.shape
    m = values_t.shape[1]
    gathered = values_t[index_matrix.reshape(-1)].reshape(n_cand, d, m)
    fvals = gathered.mean(axis=1, dtype=np.float64)
    return fvals.mean(axis=1), fvals.std(axis=1, ddof=1)


@dataclass(frozen=True)
class _CandidateBatch:
    start: int
    index_matrix: np.ndarray
    clean_mean: np.ndarray
    clean_std: np.ndarray
    attack_mean: np.ndarray | None
    attack_std: np.ndarray | None


def _evaluate_batch(
    start: int,
    stop: int,
    config: BankConfig,
    n_neurons: int,
    clean_t: np.ndarray,
    attacked_t: np.ndarray | None,
) -> _CandidateBatch:
    index_matrix = np.empty((stop - start, config.fingerprint_size), dtype=np.int64)
    for i in range(start, stop):
        index_matrix[i - start] = sample_candidate(i, config, n_neurons).indices
    c_mean, c_std = _chunk_stats(clean_t, index_matrix)
    if attacked_t is not None:
        a_mean, a_std = _chunk_stats(attacked_t, index_matrix)
    else:
        a_mean = a_std = None
    return _CandidateBatch(start, index_matrix, c_mean, c_std, a_mean, a_std)


def generate_bank(
    clean: ActivationTable,
    attacked: ActivationTable | None,
    config: BankConfig,
    workers: int = 1,
    provenance_extra: dict | None = None,
) -> ClassBank:
    """Sample-and-filter bank generation.

    Candidates 0..num_candidates-1 are sampled and evaluated; exact-duplicate
    index sets are skipped. In two-sample mode a candidate is accepted when
    its absolute effect size clears ``effect_threshold``; in clean-only mode
    every candidate is accepted (no filtering signal exists without attacked
    data). The per-neuron reuse cap, when set, is applied greedily in
    candidate order. ``max_bank_size`` then keeps the accepted fingerprints
    with the largest absolute effect (two-sample; ties favor earlier
    candidates) or the earliest accepted (clean-only).

    The result is a deterministic function of the inputs and master seed;
    ``workers`` only batches the evaluation and never changes the output.
    """
    if config.mode is BankMode.TWO_SAMPLE:
        if attacked is None:
            raise ConfigError("two_sample mode requires an attacked table")
        validate_pair(clean, attacked)
    else:
        if attacked is not None:
            raise ConfigError("clean_only mode takes no attacked table")
        if clean.kind is not TableKind.CLEAN:
            raise PairingError("kind", f"expected a clean table, got {clean.kind}")
    if config.fingerprint_size > clean.n_neurons:
        raise ConfigError(
            f"fingerprint_size {config.fingerprint_size} exceeds the table's "
            f"{clean.n_neurons} neurons"
        )
    for tbl, name in ((clean, "clean"), (attacked, "attacked")):
        if tbl is not None and tbl.n_samples < 2:
            raise InsufficientDataError(
                f"{name} table has {tbl.n_samples} samples, need >= 2 for fitting"
            )

    n_neurons = clean.n_neurons
    clean_t = np.ascontiguousarray(clean.values.T)
    attacked_t = np.ascontiguousarray(attacked.values.T) if attacked is not None else None

    spans = [
        (lo, min(lo + _EVAL_CHUNK, config.num_candidates))
        for lo in range(0, config.num_candidates, _EVAL_CHUNK)
    ]

    def run(lo_hi):
        return _evaluate_batch(*lo_hi, config, n_neurons, clean_t, attacked_t)

    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(run, spans))
    else:
        batches = [run(span) for span in spans]

    # Serial reduction in candidate order: dedupe, screen, apply the reuse cap.
    seen: set[tuple[int, ...]] = set()
    reuse_counts: dict[int, int] = {}
    accepted: list[Fingerprint] = []
    two_sample = config.mode is BankMode.TWO_SAMPLE
    for batch in batches:
        for row in range(batch.index_matrix.shape[0]):
            candidate_index = batch.start + row
            key = tuple(int(i) for i in batch.index_matrix[row])
            if key in seen:
                continue
            seen.add(key)
            clean_stats = GaussianStats(
                mean=float(batch.clean_mean[row]),
                std=max(float(batch.clean_std[row]), STD_FLOOR),
                count=clean.n_samples,
            )
            if two_sample:
                attack_stats = GaussianStats(
                    mean=float(batch.attack_mean[row]),
                    std=max(float(batch.attack_std[row]), STD_FLOOR),
                    count=attacked.n_samples,
                )
                effect = cohens_d(clean_stats, attack_stats)
                if abs(effect) < config.effect_threshold:
                    continue
            else:
                attack_stats = None
                effect = None
            if config.max_neuron_reuse is not None:
                if any(
                    reuse_counts.get(j, 0) >= config.max_neuron_reuse for j in key
                ):
                    continue
                for j in key:
                    reuse_counts[j] = reuse_counts.get(j, 0) + 1
            accepted.append(
                Fingerprint(
                    id=candidate_index,
                    indices=FingerprintIndices(indices=key, n_neurons=n_neurons),
                    clean=clean_stats,
                    attack=attack_stats,
                    effect_size=effect,
                )
            )

    if config.max_bank_size is not None and len(accepted) > config.max_bank_size:
        if two_sample:
            accepted.sort(key=lambda fp: (-abs(fp.effect_size), fp.id))
        accepted = accepted[: config.max_bank_size]
    accepted.sort(key=lambda fp: fp.id)

    provenance = {"clean_table_sha256": table_digest(clean)}
    if attacked is not None:
        provenance["attacked_table_sha256"] = table_digest(attacked)
    if provenance_extra:
        provenance.update(provenance_extra)

    return ClassBank(
        class_id=clean.class_id,
        n_neurons=n_neurons,
        config=config,
        fingerprints=tuple(accepted),
        provenance=provenance,
    )
