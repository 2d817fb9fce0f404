"""Targeted iterative FGSM under an exact L-infinity budget.

The attack repeats signed-gradient steps on the cross-entropy loss toward
the target class, clipping the accumulated perturbation to the epsilon ball
around the original image and the image itself to valid pixel range. It
stops as soon as the model's confidence in the target class reaches the
stop threshold.

Emitted images satisfy max|x' - x| <= eps *as measured on the stored
float32 tensors*: after clipping, any pixel pushed past the budget by
float rounding is nudged back one ulp at a time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .errors import AdapterError, UnsupportedModelError


@dataclass(frozen=True)
class AttackConfig:
    target_class: int
    eps: float = 0.01
    step_size: float | None = None  # default eps / 10
    max_iter: int = 150
    stop_confidence: float = 0.70

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise AdapterError(f"eps must be positive, got {self.eps}")
        if self.step_size is None:
            object.__setattr__(self, "step_size", self.eps / 10.0)
        if self.step_size < 0 or not math.isfinite(self.step_size):
            raise AdapterError(f"step_size must be >= 0, got {self.step_size}")
        if self.max_iter < 1:
            raise AdapterError(f"max_iter must be >= 1, got {self.max_iter}")
        if not 0.0 < self.stop_confidence < 1.0:
            raise AdapterError(
                f"stop_confidence must be in (0, 1), got {self.stop_confidence}"
            )
        if self.target_class < 0:
            raise AdapterError(f"target_class must be >= 0, got {self.target_class}")


@dataclass(frozen=True)
class AttackResult:
    image: torch.Tensor
    success: bool
    iterations: int
    confidence: float


def _target_confidence(model, image: torch.Tensor, target: int) -> float:
    with torch.no_grad():
        return float(F.softmax(model(image[None]), dim=1)[0, target])


def _enforce_budget(x: torch.Tensor, x0: torch.Tensor, eps: float) -> torch.Tensor:
    """Nudge rounding overshoot back so max|x - x0| <= eps holds exactly."""
    for _ in range(4):
        diff = x - x0
        over = (diff > eps) | (diff < -eps)
        if not bool(over.any()):
            return x
        x = torch.where(over, torch.nextafter(x, x0), x)
    raise AssertionError("budget enforcement did not converge")


def ifgsm_attack(
    image: torch.Tensor, model: torch.nn.Module, config: AttackConfig
) -> AttackResult:
    """Attack one image; returns the perturbed image and a success flag.

    ``image`` is a (C, H, W) float tensor in [0, 1]. Success means the
    stop-confidence threshold was reached within the iteration budget (0
    iterations if the input already satisfies it).
    """
    was_training = model.training
    model.eval()
    try:
        x0 = image.detach().to(torch.float32)
        eps = float(config.eps)
        alpha = float(config.step_size)
        confidence = _target_confidence(model, x0, config.target_class)
        if confidence >= config.stop_confidence:
            return AttackResult(x0.clone(), True, 0, confidence)
        x = x0.clone()
        for iteration in range(1, config.max_iter + 1):
            x = x.detach().requires_grad_(True)
            logits = model(x[None])
            loss = -torch.log_softmax(logits, dim=1)[0, config.target_class]
            try:
                loss.backward()
            except RuntimeError as exc:
                raise UnsupportedModelError(
                    f"model is not differentiable w.r.t. its input: {exc}"
                ) from exc
            if x.grad is None:
                raise UnsupportedModelError(
                    "model produced no input gradient; gradient attacks need a "
                    "differentiable forward pass"
                )
            with torch.no_grad():
                delta = (x - alpha * x.grad.sign() - x0).clamp(-eps, eps)
                x = (x0 + delta).clamp(0.0, 1.0)
                x = _enforce_budget(x, x0, eps)
            confidence = _target_confidence(model, x, config.target_class)
            if confidence >= config.stop_confidence:
                return AttackResult(x.detach(), True, iteration, confidence)
        return AttackResult(x.detach(), False, config.max_iter, confidence)
    finally:
        model.train(was_training)
