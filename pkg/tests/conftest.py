"""Shared fixtures: small deterministic tables, banks, and data directories."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from neuralfp import (
    ActivationTable,
    BankConfig,
    SynthConfig,
    TableKind,
    generate_bank,
    synth_class_tables,
    write_table,
)

SMALL_WORLD = SynthConfig(
    n_neurons=2_000,
    n_classes=2,
    n_train_clean=200,
    n_test_clean=80,
    n_train_attacked=200,
    n_test_attacked=80,
    informative_fraction=0.1,
    attack_shift=1.0,
    seed=20240817,
)

SMALL_BANK_CONFIG = BankConfig(
    fingerprint_size=20,
    num_candidates=3_000,
    effect_threshold=1.0,
    master_seed=11,
)


def make_table(
    seed: int,
    n_samples: int = 8,
    n_neurons: int = 16,
    kind: TableKind = TableKind.CLEAN,
    class_id: int = 0,
    layer_sizes=None,
) -> ActivationTable:
    rng = np.random.default_rng(seed)
    values = rng.standard_normal((n_samples, n_neurons)).astype(np.float32)
    return ActivationTable(
        class_id=class_id, kind=kind, values=values, layer_sizes=layer_sizes
    )


@pytest.fixture(scope="session")
def small_tables():
    return synth_class_tables(SMALL_WORLD, 0)


@pytest.fixture(scope="session")
def small_bank(small_tables):
    return generate_bank(
        small_tables.clean_train, small_tables.attacked_train, SMALL_BANK_CONFIG
    )


@pytest.fixture(scope="session")
def small_data_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("small_world")
    for class_id in range(SMALL_WORLD.n_classes):
        tables = synth_class_tables(SMALL_WORLD, class_id)
        for stem, table in (
            ("clean_train", tables.clean_train),
            ("clean_test", tables.clean_test),
            ("attacked_train", tables.attacked_train),
            ("attacked_test", tables.attacked_test),
        ):
            write_table(table, out / f"class{class_id}_{stem}.nfat")
    return out
