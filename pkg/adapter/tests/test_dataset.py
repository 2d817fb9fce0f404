"""build_dataset: protocol constraints and cross-component compatibility."""

import pytest
import torch

from nf_adapter import (
    AdapterError,
    AttackConfig,
    ExtractionConfig,
    ShortfallError,
    build_dataset,
    read_nfat,
)

CLASS_ID = 1


def world_pairs(world, split="train", limit=None):
    images, labels = world.split(split)
    pairs = list(zip(images, labels))
    return pairs[:limit] if limit else pairs


def make_configs(class_id=CLASS_ID):
    extraction = ExtractionConfig(
        model_id="toy",
        layer_names=("pool2", "relu3"),
        class_id=class_id,
        confidence_floor=0.50,
    )
    attack = AttackConfig(target_class=class_id, eps=0.01)
    return extraction, attack


@pytest.fixture(scope="module")
def built(toy_world, tmp_path_factory):
    out = tmp_path_factory.mktemp("dataset")
    extraction, attack = make_configs()
    result = build_dataset(
        class_id=CLASS_ID,
        clean_source=world_pairs(toy_world),
        donor_source=world_pairs(toy_world),
        model=toy_world.model,
        extraction=extraction,
        attack=attack,
        n_clean=30,
        n_attacked=20,
        out_dir=out,
    )
    return result


def test_emits_commensurate_pair(built):
    clean = read_nfat(built.clean_path)
    attacked = read_nfat(built.attacked_path)
    assert clean.kind == "clean" and attacked.kind == "attacked"
    assert clean.class_id == attacked.class_id == CLASS_ID
    assert clean.n_neurons == attacked.n_neurons == 1088
    assert clean.n_samples == 30
    assert attacked.n_samples == 20
    assert clean.layer_sizes == attacked.layer_sizes == (1024, 64)


def test_attacked_rows_only_from_successful_attacks(built):
    assert built.n_attacked == 20
    assert len(built.attack_iterations) == 20
    assert built.attacks_attempted >= 20


def test_loads_in_primary_component(built):
    neuralfp = pytest.importorskip("neuralfp")
    clean = neuralfp.read_table(built.clean_path)
    attacked = neuralfp.read_table(built.attacked_path)
    neuralfp.validate_pair(clean, attacked)
    assert clean.layer_sizes == (1024, 64)
    ours = read_nfat(built.clean_path)
    assert clean.values.tobytes() == ours.values.tobytes()


def test_zero_attacked_skips_attacked_file(toy_world, tmp_path):
    extraction, attack = make_configs()
    result = build_dataset(
        class_id=CLASS_ID,
        clean_source=world_pairs(toy_world),
        donor_source=[],
        model=toy_world.model,
        extraction=extraction,
        attack=attack,
        n_clean=10,
        n_attacked=0,
        out_dir=tmp_path,
    )
    assert result.attacked_path is None
    assert result.clean_path.exists()
    assert not (tmp_path / f"class{CLASS_ID}_attacked.nfat").exists()


def test_donors_of_the_class_are_excluded(toy_world, tmp_path):
    # A donor pool containing only class images yields an attacked shortfall.
    images, labels = toy_world.split("train")
    own = [(images[i], labels[i]) for i in range(len(labels))
           if int(labels[i]) == CLASS_ID][:25]
    extraction, attack = make_configs()
    with pytest.raises(ShortfallError) as err:
        build_dataset(
            class_id=CLASS_ID,
            clean_source=world_pairs(toy_world),
            donor_source=own,
            model=toy_world.model,
            extraction=extraction,
            attack=attack,
            n_clean=10,
            n_attacked=5,
            out_dir=tmp_path,
        )
    assert err.value.obtained == 0
    assert err.value.requested == 5


def test_clean_shortfall_reports_counts(toy_world, tmp_path):
    extraction, attack = make_configs()
    with pytest.raises(ShortfallError) as err:
        build_dataset(
            class_id=CLASS_ID,
            clean_source=world_pairs(toy_world, limit=12),
            donor_source=world_pairs(toy_world),
            model=toy_world.model,
            extraction=extraction,
            attack=attack,
            n_clean=500,
            n_attacked=0,
            out_dir=tmp_path,
        )
    assert err.value.requested == 500
    assert err.value.obtained < 500


def test_mismatched_configs_rejected(toy_world, tmp_path):
    extraction, attack = make_configs(class_id=2)
    with pytest.raises(AdapterError):
        build_dataset(
            class_id=CLASS_ID,
            clean_source=[],
            donor_source=[],
            model=toy_world.model,
            extraction=extraction,
            attack=attack,
            n_clean=1,
            n_attacked=0,
            out_dir=tmp_path,
        )
