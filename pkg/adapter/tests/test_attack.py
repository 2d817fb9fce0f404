"""Targeted IFGSM: budget exactness, early stop, degenerate cases."""

import pytest
import torch
import torch.nn.functional as F

from nf_adapter import AttackConfig, UnsupportedModelError, ifgsm_attack


def target_confidence(model, image, target):
    with torch.no_grad():
        return float(F.softmax(model(image[None]), dim=1)[0, target])


def pick_donor(world, target, generator_seed=0):
    g = torch.Generator().manual_seed(generator_seed)
    while True:
        i = int(torch.randint(0, len(world.test_images), (1,), generator=g))
        if int(world.test_labels[i]) != target:
            return world.test_images[i]


class TestZeroStep:
    def test_zero_step_returns_input_without_success(self, toy_world):
        image = pick_donor(toy_world, target=1)
        config = AttackConfig(target_class=1, eps=0.01, step_size=0.0, max_iter=5)
        result = ifgsm_attack(image, toy_world.model, config)
        assert torch.equal(result.image, image)
        assert result.success is False

    def test_already_confident_input_succeeds_immediately(self, toy_world):
        # An image of the target class itself usually carries >= 0.70 already.
        labels = toy_world.test_labels
        target = 0
        candidates = [
            toy_world.test_images[i]
            for i in range(len(labels))
            if int(labels[i]) == target
        ]
        confident = next(
            img for img in candidates
            if target_confidence(toy_world.model, img, target) >= 0.70
        )
        config = AttackConfig(target_class=target, eps=0.01, step_size=0.0)
        result = ifgsm_attack(confident, toy_world.model, config)
        assert result.success is True
        assert result.iterations == 0
        assert torch.equal(result.image, confident)


class TestBudget:
    def test_linf_bound_holds_exactly(self, toy_world):
        config = AttackConfig(target_class=2, eps=0.01)
        for seed in range(8):
            image = pick_donor(toy_world, target=2, generator_seed=seed)
            result = ifgsm_attack(image, toy_world.model, config)
            diff = (result.image.double() - image.double()).abs().max().item()
            assert diff <= 0.01
            assert result.image.min() >= 0.0
            assert result.image.max() <= 1.0

    def test_failed_attack_respects_iteration_cap(self, toy_world):
        image = pick_donor(toy_world, target=3)
        config = AttackConfig(
            target_class=3, eps=1e-5, step_size=1e-6, max_iter=4
        )
        result = ifgsm_attack(image, toy_world.model, config)
        assert result.success is False
        assert result.iterations == 4


class TestBehavior:
    def test_attack_reaches_stop_confidence(self, toy_world):
        config = AttackConfig(target_class=1, eps=0.01)
        image = pick_donor(toy_world, target=1)
        result = ifgsm_attack(image, toy_world.model, config)
        assert result.success is True
        assert result.confidence >= 0.70
        assert target_confidence(toy_world.model, result.image, 1) >= 0.70

    def test_deterministic(self, toy_world):
        config = AttackConfig(target_class=1, eps=0.01)
        image = pick_donor(toy_world, target=1, generator_seed=3)
        a = ifgsm_attack(image, toy_world.model, config)
        b = ifgsm_attack(image, toy_world.model, config)
        assert torch.equal(a.image, b.image)
        assert (a.success, a.iterations) == (b.success, b.iterations)

    def test_non_differentiable_model_rejected(self):
        class Blocked(torch.nn.Module):
            def forward(self, x):
                with torch.no_grad():
                    return torch.stack(
                        [x.sum(dim=(1, 2, 3)), -x.sum(dim=(1, 2, 3))], dim=1
                    )

        # Class 1's logit is the negated sum, so the loop must actually run.
        config = AttackConfig(target_class=1, eps=0.01, max_iter=2)
        with pytest.raises(UnsupportedModelError):
            ifgsm_attack(torch.rand(3, 8, 8), Blocked(), config)


class TestConfigValidation:
    def test_default_step_is_tenth_of_eps(self):
        config = AttackConfig(target_class=0, eps=0.02)
        assert config.step_size == pytest.approx(0.002)

    def test_bad_values_rejected(self):
        from nf_adapter import AdapterError

        with pytest.raises(AdapterError):
            AttackConfig(target_class=0, eps=0.0)
        with pytest.raises(AdapterError):
            AttackConfig(target_class=0, eps=0.01, max_iter=0)
        with pytest.raises(AdapterError):
            AttackConfig(target_class=0, eps=0.01, stop_confidence=1.5)
