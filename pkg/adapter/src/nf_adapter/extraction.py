"""Activation extraction via forward hooks on named layers.

The configured layers' outputs are flattened per sample and concatenated in
declared order, giving one N-wide activation row per image. Images whose
model confidence for the table's class falls below the configured floor are
skipped (with a logged count) rather than recorded.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .errors import NoQualifyingImagesError, UnknownLayerError
from .nfat import NfatTable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractionConfig:
    model_id: str
    layer_names: tuple[str, ...]
    class_id: int
    confidence_floor: float = 0.50

    def __post_init__(self):
        object.__setattr__(self, "layer_names", tuple(self.layer_names))
        if not self.layer_names:
            raise UnknownLayerError("at least one layer name is required")
        if not 0.0 <= self.confidence_floor <= 1.0:
            raise ValueError(
                f"confidence_floor must be in [0, 1], got {self.confidence_floor}"
            )


def _resolve_module(model: torch.nn.Module, name: str) -> torch.nn.Module:
    module = model
    for part in name.split("."):
        if not hasattr(module, part):
            raise UnknownLayerError(f"model has no layer named {name!r}")
        module = getattr(module, part)
    if not isinstance(module, torch.nn.Module):
        raise UnknownLayerError(f"{name!r} is not a module")
    return module


class ActivationRecorder:
    """Registers forward hooks and concatenates the captured activations."""

    def __init__(self, model: torch.nn.Module, layer_names):
        self.model = model
        self.layer_names = tuple(layer_names)
        self._captured: dict[str, torch.Tensor] = {}
        self._handles = []
        for name in self.layer_names:
            module = _resolve_module(model, name)

            def hook(_module, _inputs, output, name=name):
                self._captured[name] = output.detach()

            self._handles.append(module.register_forward_hook(hook))

    def close(self) -> None:
        for handle in self._handles:
            handle.remove()
        self._handles.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def forward(self, batch: torch.Tensor) -> tuple[torch.Tensor, np.ndarray, tuple[int, ...]]:
        """Run the model; returns (probabilities, activations, layer sizes)."""
        self._captured.clear()
        with torch.no_grad():
            probs = F.softmax(self.model(batch), dim=1)
        parts = []
        sizes = []
        for name in self.layer_names:
            if name not in self._captured:
                raise UnknownLayerError(
                    f"layer {name!r} produced no output during the forward pass"
                )
            flat = self._captured[name].reshape(batch.shape[0], -1)
            parts.append(flat)
            sizes.append(flat.shape[1])
        activations = torch.cat(parts, dim=1).to(torch.float32).cpu().numpy()
        return probs, activations, tuple(sizes)


def extract_activations(
    images,
    model: torch.nn.Module,
    config: ExtractionConfig,
    kind: str = "clean",
    confidence_floor: float | None = None,
    batch_size: int = 64,
) -> tuple[NfatTable, int]:
    """One activation row per qualifying image; returns (table, skipped count).

    ``images`` is a tensor (B, C, H, W) or an iterable of (C, H, W) tensors.
    ``confidence_floor`` overrides the config's floor (used for attacked rows,
    which must hold the attack's stop confidence at emission time).
    """
    floor = config.confidence_floor if confidence_floor is None else confidence_floor
    if isinstance(images, torch.Tensor):
        batch_iter = [images[i : i + batch_size] for i in range(0, len(images), batch_size)]
    else:
        stacked = torch.stack(list(images))
        batch_iter = [stacked[i : i + batch_size] for i in range(0, len(stacked), batch_size)]

    was_training = model.training
    model.eval()
    rows = []
    sizes: tuple[int, ...] | None = None
    skipped = 0
    try:
        with ActivationRecorder(model, config.layer_names) as recorder:
            for batch in batch_iter:
                if batch.numel() == 0:
                    continue
                probs, activations, sizes = recorder.forward(batch.to(torch.float32))
                keep = probs[:, config.class_id].cpu().numpy() >= floor
                skipped += int((~keep).sum())
                rows.append(activations[keep])
    finally:
        model.train(was_training)
    if skipped:
        logger.info(
            "extract_activations: skipped %d image(s) below confidence %.2f "
            "for class %d", skipped, floor, config.class_id,
        )
    values = np.concatenate(rows, axis=0) if rows else np.empty((0, 0))
    if values.shape[0] == 0:
        raise NoQualifyingImagesError(
            f"no image reached confidence {floor:.2f} for class {config.class_id}; "
            f"skipped {skipped}"
        )
    return (
        NfatTable(
            class_id=config.class_id, kind=kind, values=values, layer_sizes=sizes
        ),
        skipped,
    )
