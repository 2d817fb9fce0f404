"""Synthetic world: determinism, planted-signal structure, null behavior."""

import math

import numpy as np
import pytest

from neuralfp import (
    BankConfig,
    ConfigError,
    SynthConfig,
    TableKind,
    generate_bank,
    synth_class_tables,
    synth_tables,
)

FAST = SynthConfig(
    n_neurons=600,
    n_classes=2,
    n_train_clean=150,
    n_test_clean=60,
    n_train_attacked=150,
    n_test_attacked=60,
    informative_fraction=0.1,
    attack_shift=1.0,
    seed=31415,
)


class TestDeterminism:
    def test_identical_config_identical_tables(self):
        a = synth_class_tables(FAST, 1)
        b = synth_class_tables(FAST, 1)
        for name in ("clean_train", "clean_test", "attacked_train", "attacked_test"):
            assert getattr(a, name) == getattr(b, name)
        assert a.informative == b.informative

    def test_classes_get_distinct_streams(self):
        tables = synth_tables(FAST)
        assert tables[0].clean_train != tables[1].clean_train
        assert tables[0].informative != tables[1].informative

    def test_splits_are_disjoint(self):
        tables = synth_class_tables(FAST, 0)
        train = {row.tobytes() for row in tables.clean_train.values}
        test = {row.tobytes() for row in tables.clean_test.values}
        assert not train & test


class TestStructure:
    def test_kinds_and_shapes(self):
        tables = synth_class_tables(FAST, 0)
        assert tables.clean_train.kind is TableKind.CLEAN
        assert tables.attacked_test.kind is TableKind.ATTACKED
        assert tables.clean_train.values.shape == (150, 600)
        assert tables.attacked_test.values.shape == (60, 600)
        assert len(tables.informative) == round(0.1 * 600)

    def test_informative_column_shift(self):
        # Informative minus non-informative column means approximate the shift.
        tables = synth_class_tables(FAST, 0)
        values = tables.attacked_train.values.astype(np.float64)
        informative = np.asarray(tables.informative)
        mask = np.zeros(600, dtype=bool)
        mask[informative] = True
        gap = values[:, mask].mean() - values[:, ~mask].mean()
        m = tables.attacked_train.n_samples
        assert abs(gap - FAST.attack_shift) <= 4.0 / math.sqrt(m)

    def test_clean_tables_carry_no_shift(self):
        tables = synth_class_tables(FAST, 0)
        values = tables.clean_train.values.astype(np.float64)
        mask = np.zeros(600, dtype=bool)
        mask[np.asarray(tables.informative)] = True
        gap = values[:, mask].mean() - values[:, ~mask].mean()
        assert abs(gap) <= 4.0 / math.sqrt(tables.clean_train.n_samples)


class TestDegenerateWorlds:
    def test_zero_shift_is_null_world(self):
        config = SynthConfig(
            n_neurons=400, n_classes=1, n_train_clean=200, n_test_clean=60,
            n_train_attacked=200, n_test_attacked=60,
            informative_fraction=0.1, attack_shift=0.0, seed=7,
        )
        tables = synth_class_tables(config, 0)
        bank = generate_bank(
            tables.clean_train, tables.attacked_train,
            BankConfig(fingerprint_size=20, num_candidates=3_000,
                       effect_threshold=1.0, master_seed=1),
        )
        assert len(bank) == 0

    def test_zero_informative_fraction_is_null_world(self):
        config = SynthConfig(
            n_neurons=400, n_classes=1, n_train_clean=200, n_test_clean=60,
            n_train_attacked=200, n_test_attacked=60,
            informative_fraction=0.0, attack_shift=1.0, seed=8,
        )
        tables = synth_class_tables(config, 0)
        assert tables.informative == ()
        bank = generate_bank(
            tables.clean_train, tables.attacked_train,
            BankConfig(fingerprint_size=20, num_candidates=3_000,
                       effect_threshold=1.0, master_seed=1),
        )
        assert len(bank) == 0

    def test_candidate_effect_sizes_match_analytic_expectation(self):
        # E[-effect] ~ fraction * shift * sqrt(size) for a random candidate.
        config = SynthConfig(
            n_neurons=4_000, n_classes=1, n_train_clean=400, n_test_clean=60,
            n_train_attacked=400, n_test_attacked=60,
            informative_fraction=0.1, attack_shift=1.0, seed=9,
        )
        tables = synth_class_tables(config, 0)
        bank = generate_bank(
            tables.clean_train, tables.attacked_train,
            BankConfig(fingerprint_size=50, num_candidates=2_000,
                       effect_threshold=0.0, master_seed=2),
        )
        mean_effect = float(np.mean([-fp.effect_size for fp in bank.fingerprints]))
        expected = 0.1 * 1.0 * math.sqrt(50)
        assert mean_effect == pytest.approx(expected, abs=0.05)


class TestConfigValidation:
    def test_fraction_out_of_range(self):
        with pytest.raises(ConfigError):
            SynthConfig(informative_fraction=1.5)

    def test_counts_below_two(self):
        with pytest.raises(ConfigError):
            SynthConfig(n_test_clean=1)

    def test_non_finite_shift(self):
        with pytest.raises(ConfigError):
            SynthConfig(attack_shift=math.inf)

    def test_class_id_out_of_range(self):
        with pytest.raises(ConfigError):
            synth_class_tables(FAST, FAST.n_classes)
