"""Paired clean/attacked table construction for one class.

Clean rows come from images of the class that hold the configured
confidence floor. Attacked rows come from donor images of *other* classes,
each pushed by targeted IFGSM until the model assigns the class the
attack's stop confidence; only successful attacks contribute rows, so every
attacked row's prediction meets that confidence at emission time.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .attack import AttackConfig, ifgsm_attack
from .errors import AdapterError, NoQualifyingImagesError, ShortfallError
from .extraction import ExtractionConfig, extract_activations
from .nfat import NfatTable, write_nfat

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DatasetResult:
    clean_path: Path
    attacked_path: Path | None
    n_clean: int
    n_attacked: int
    clean_skipped: int
    attacks_attempted: int
    attack_iterations: tuple[int, ...]


def _clean_table(source, class_id, n_needed, model, extraction) -> tuple[NfatTable, int]:
    candidates = [image for image, label in source if int(label) == class_id]
    if not candidates:
        raise ShortfallError("clean", n_needed, 0)
    try:
        table, skipped = extract_activations(
            torch.stack(candidates), model, extraction, kind="clean"
        )
    except NoQualifyingImagesError:
        raise ShortfallError("clean", n_needed, 0) from None
    if table.n_samples < n_needed:
        raise ShortfallError("clean", n_needed, table.n_samples)
    truncated = NfatTable(
        class_id=table.class_id,
        kind=table.kind,
        values=np.ascontiguousarray(table.values[:n_needed]),
        layer_sizes=table.layer_sizes,
    )
    return truncated, skipped


def build_dataset(
    class_id: int,
    clean_source,
    donor_source,
    model: torch.nn.Module,
    extraction: ExtractionConfig,
    attack: AttackConfig,
    n_clean: int,
    n_attacked: int,
    out_dir: str | Path,
) -> DatasetResult:
    """Emit ``class<k>_clean.nfat`` and (if requested) ``class<k>_attacked.nfat``.

    ``clean_source`` and ``donor_source`` are iterables of (image, label)
    pairs; donors labeled ``class_id`` are ignored, so attacked rows always
    originate from other classes. Raises ShortfallError when a source runs
    out before the requested row count is met.
    """
    if extraction.class_id != class_id:
        raise AdapterError(
            f"extraction is configured for class {extraction.class_id}, "
            f"dataset is for class {class_id}"
        )
    if attack.target_class != class_id:
        raise AdapterError(
            f"attack targets class {attack.target_class}, dataset is for "
            f"class {class_id}"
        )
    if n_clean < 1:
        raise AdapterError(f"n_clean must be >= 1, got {n_clean}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    clean_table, clean_skipped = _clean_table(
        clean_source, class_id, n_clean, model, extraction
    )
    clean_path = out_dir / f"class{class_id}_clean.nfat"
    write_nfat(clean_table, clean_path)

    attacked_path = None
    iterations: list[int] = []
    attempts = 0
    if n_attacked > 0:
        attacked_images: list[torch.Tensor] = []
        for image, label in donor_source:
            if int(label) == class_id:
                continue
            attempts += 1
            result = ifgsm_attack(image.to(torch.float32), model, attack)
            if result.success:
                attacked_images.append(result.image)
                iterations.append(result.iterations)
            if len(attacked_images) >= n_attacked:
                break
        if len(attacked_images) < n_attacked:
            raise ShortfallError("attacked", n_attacked, len(attacked_images))
        attacked_table, _ = extract_activations(
            torch.stack(attacked_images),
            model,
            extraction,
            kind="attacked",
            confidence_floor=attack.stop_confidence,
        )
        if attacked_table.n_samples < n_attacked:
            raise ShortfallError("attacked", n_attacked, attacked_table.n_samples)
        attacked_path = out_dir / f"class{class_id}_attacked.nfat"
        write_nfat(attacked_table, attacked_path)
        logger.info(
            "build_dataset class %d: %d clean rows (%d skipped), %d attacked "
            "rows from %d attempts", class_id, clean_table.n_samples,
            clean_skipped, attacked_table.n_samples, attempts,
        )

    return DatasetResult(
        clean_path=clean_path,
        attacked_path=attacked_path,
        n_clean=clean_table.n_samples,
        n_attacked=len(iterations),
        clean_skipped=clean_skipped,
        attacks_attempted=attempts,
        attack_iterations=tuple(iterations),
    )
