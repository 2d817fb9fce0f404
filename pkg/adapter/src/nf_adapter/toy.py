"""Deterministic stand-in classifier and image world for desk-scale runs.

Pretrained weights are not downloadable in every environment, so the
adapter ships a small self-trained CNN over a synthetic image task whose
class evidence is a weak, spatially smooth template spread across the whole
image. That puts the trained model in the regime where a small L-infinity
perturbation can retarget it in a handful of signed-gradient steps, which
is the regime the adapter exists to exercise.

Everything here is seeded: the same seeds give bit-identical datasets and
the same training trajectory on CPU.
"""

from __future__ import annotations

from collections import OrderedDict

import torch
import torch.nn.functional as F
from torch import nn

N_CLASSES = 4
IMAGE_SIZE = 32
TEMPLATE_AMPLITUDE = 0.03
PIXEL_NOISE = 0.05

# Activation layers recorded by default: last pooled conv block + penultimate
# fully connected activations.
DEFAULT_LAYERS = ("pool2", "relu3")


class SmallCNN(nn.Module):
    """Two conv blocks and two linear layers, every stage a named module."""

    def __init__(self, n_classes: int = N_CLASSES):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 8, 3, padding=1)
        self.relu1 = nn.ReLU()
        self.pool1 = nn.MaxPool2d(2)
        self.conv2 = nn.Conv2d(8, 16, 3, padding=1)
        self.relu2 = nn.ReLU()
        self.pool2 = nn.MaxPool2d(2)
        self.flatten = nn.Flatten()
        self.fc1 = nn.Linear(16 * (IMAGE_SIZE // 4) ** 2, 64)
        self.relu3 = nn.ReLU()
        self.fc2 = nn.Linear(64, n_classes)

    def forward(self, x):
        x = self.pool1(self.relu1(self.conv1(x)))
        x = self.pool2(self.relu2(self.conv2(x)))
        x = self.flatten(x)
        x = self.relu3(self.fc1(x))
        return self.fc2(x)


def class_templates(
    n_classes: int = N_CLASSES,
    size: int = IMAGE_SIZE,
    amplitude: float = TEMPLATE_AMPLITUDE,
    seed: int = 5,
) -> torch.Tensor:
    """Smooth low-amplitude per-class image templates."""
    generator = torch.Generator().manual_seed(seed)
    raw = torch.randn(n_classes, 3, size, size, generator=generator)
    k = 7
    raw = F.avg_pool2d(F.pad(raw, (k // 2,) * 4, mode="reflect"), k, stride=1)
    raw = raw / raw.abs().amax(dim=(1, 2, 3), keepdim=True)
    return amplitude * raw


def make_images(
    n: int,
    seed: int,
    templates: torch.Tensor,
    noise: float = PIXEL_NOISE,
) -> tuple[torch.Tensor, torch.Tensor]:
    """n labeled images: mid-gray plus noise plus the label's template."""
    generator = torch.Generator().manual_seed(seed)
    n_classes, _, size, _ = templates.shape
    labels = torch.randint(0, n_classes, (n,), generator=generator)
    images = 0.5 + noise * torch.randn(n, 3, size, size, generator=generator)
    images += templates[labels]
    return images.clamp(0.0, 1.0), labels


def train_model(
    model: nn.Module,
    images: torch.Tensor,
    labels: torch.Tensor,
    epochs: int = 4,
    lr: float = 1e-3,
    batch_size: int = 64,
    seed: int = 1,
) -> nn.Module:
    generator = torch.Generator().manual_seed(seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    model.train()
    for _ in range(epochs):
        order = torch.randperm(len(images), generator=generator)
        for start in range(0, len(images), batch_size):
            idx = order[start : start + batch_size]
            optimizer.zero_grad()
            loss = F.cross_entropy(model(images[idx]), labels[idx])
            loss.backward()
            optimizer.step()
    return model.eval()


def make_toy_world(
    seed: int = 0,
    n_train: int = 3_000,
    n_test: int = 400,
) -> "ToyWorld":
    """Templates, train/test splits, and a trained classifier, all seeded."""
    templates = class_templates(seed=seed + 5)
    train_x, train_y = make_images(n_train, seed + 10, templates)
    test_x, test_y = make_images(n_test, seed + 11, templates)
    torch.manual_seed(seed)
    model = SmallCNN()
    train_model(model, train_x, train_y, seed=seed + 1)
    return ToyWorld(
        model=model,
        templates=templates,
        train_images=train_x,
        train_labels=train_y,
        test_images=test_x,
        test_labels=test_y,
    )


class ToyWorld:
    def __init__(self, model, templates, train_images, train_labels,
                 test_images, test_labels):
        self.model = model
        self.templates = templates
        self.train_images = train_images
        self.train_labels = train_labels
        self.test_images = test_images
        self.test_labels = test_labels

    def split(self, name: str) -> tuple[torch.Tensor, torch.Tensor]:
        if name == "train":
            return self.train_images, self.train_labels
        if name == "test":
            return self.test_images, self.test_labels
        raise ValueError(f"unknown split {name!r}")
