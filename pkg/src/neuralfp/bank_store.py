"""Persistence, integrity checking, and inspection of fingerprint banks.

Banks are stored as human-readable JSON: they are audit artifacts in a
security workflow, and at realistic sizes inspectability beats a binary
format. Floats are serialized with Python's shortest round-trip repr, so a
save/load cycle preserves every statistic bit-for-bit.

A SHA-256 digest over the canonical serialization (sorted keys, compact
separators, digest field excluded) guards against tampering and corruption.
On load, each stored effect size is additionally re-derived from its stored
Gaussian statistics; disagreement beyond 1e-9 relative marks a hand-edited
or inconsistent bank.
"""

from __future__ import annotations

import hashlib
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO

from .errors import BankIntegrityError, BankSchemaError, NeuralFingerprintError
from .fingerprints import (
    BankConfig,
    BankMode,
    ClassBank,
    Fingerprint,
    FingerprintIndices,
    GaussianStats,
    cohens_d,
)

BANK_FORMAT_VERSION = 1

# Stored effect sizes must agree with a recomputation from the stored stats.
EFFECT_CHECK_RTOL = 1e-9


@dataclass(frozen=True)
class BankFile:
    """A versioned collection of per-class banks sharing one neuron count."""

    model: str
    n_neurons: int
    classes: dict[int, ClassBank]
    version: int = BANK_FORMAT_VERSION
    digest: str | None = field(default=None, compare=False)

    def __post_init__(self):
        for class_id, bank in self.classes.items():
            if bank.class_id != class_id:
                raise BankSchemaError(
                    f"classes.{class_id}",
                    f"entry holds bank for class {bank.class_id}",
                )
            if bank.n_neurons != self.n_neurons:
                raise BankSchemaError(
                    f"classes.{class_id}",
                    f"bank has {bank.n_neurons} neurons, file declares {self.n_neurons}",
                )


def _config_to_dict(config: BankConfig) -> dict:
    return {
        "fingerprint_size": config.fingerprint_size,
        "num_candidates": config.num_candidates,
        "effect_threshold": config.effect_threshold,
        "max_bank_size": config.max_bank_size,
        "max_neuron_reuse": config.max_neuron_reuse,
        "master_seed": config.master_seed,
        "mode": config.mode.value,
    }


def _fingerprint_to_dict(fp: Fingerprint) -> dict:
    doc = {
        "id": fp.id,
        "indices": list(fp.indices.indices),
        "clean": {"mean": fp.clean.mean, "std": fp.clean.std, "count": fp.clean.count},
    }
    if fp.attack is not None:
        doc["attack"] = {
            "mean": fp.attack.mean,
            "std": fp.attack.std,
            "count": fp.attack.count,
        }
        doc["effect_size"] = fp.effect_size
    return doc


def bank_to_document(bank: BankFile) -> dict:
    """The JSON document for ``bank``, without the digest field."""
    return {
        "version": bank.version,
        "model": bank.model,
        "n_neurons": bank.n_neurons,
        "classes": {
            str(class_id): {
                "config": _config_to_dict(cb.config),
                "provenance": dict(cb.provenance),
                "fingerprints": [_fingerprint_to_dict(fp) for fp in cb.fingerprints],
            }
            for class_id, cb in sorted(bank.classes.items())
        },
    }


def compute_bank_digest(document: dict) -> str:
    """SHA-256 over the canonical serialization of a digest-less document."""
    body = {k: v for k, v in document.items() if k != "digest"}
    canonical = json.dumps(body, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_bank(bank: BankFile, destination: IO[str] | str | Path) -> str:
    """Write ``bank`` as JSON; returns the content digest that was embedded."""
    document = bank_to_document(bank)
    digest = compute_bank_digest(document)
    document["digest"] = digest
    text = json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if isinstance(destination, (str, Path)):
        Path(destination).write_text(text, encoding="utf-8")
    else:
        destination.write(text)
    return digest


class _Walker:
    """Schema access helpers that name the failing field path."""

    def __init__(self, doc, path: str):
        self.doc = doc
        self.path = path

    def child(self, key, expect=None):
        path = f"{self.path}.{key}" if self.path else str(key)
        if not isinstance(self.doc, dict):
            raise BankSchemaError(self.path or "<root>", "expected an object")
        if key not in self.doc:
            raise BankSchemaError(path, "missing required field")
        value = self.doc[key]
        if expect is not None and not isinstance(value, expect):
            raise BankSchemaError(
                path, f"expected {expect.__name__ if isinstance(expect, type) else expect}, "
                f"got {type(value).__name__}"
            )
        return _Walker(value, path)

    def optional(self, key):
        if isinstance(self.doc, dict) and key in self.doc and self.doc[key] is not None:
            return self.child(key)
        return None

    def number(self, key) -> float:
        node = self.child(key)
        if isinstance(node.doc, bool) or not isinstance(node.doc, (int, float)):
            raise BankSchemaError(node.path, "expected a number")
        return float(node.doc)

    def integer(self, key) -> int:
        node = self.child(key)
        if isinstance(node.doc, bool) or not isinstance(node.doc, int):
            raise BankSchemaError(node.path, "expected an integer")
        return node.doc

    def optional_integer(self, key) -> int | None:
        node = self.optional(key)
        if node is None:
            return None
        if isinstance(node.doc, bool) or not isinstance(node.doc, int):
            raise BankSchemaError(node.path, "expected an integer or null")
        return node.doc


def _parse_stats(node: _Walker) -> GaussianStats:
    try:
        return GaussianStats(
            mean=node.number("mean"), std=node.number("std"), count=node.integer("count")
        )
    except NeuralFingerprintError as exc:
        if isinstance(exc, BankSchemaError):
            raise
        raise BankSchemaError(node.path, str(exc)) from exc


def _parse_fingerprint(node: _Walker, n_neurons: int) -> Fingerprint:
    fp_id = node.integer("id")
    idx_node = node.child("indices", expect=list)
    indices = []
    for i, raw in enumerate(idx_node.doc):
        if isinstance(raw, bool) or not isinstance(raw, int):
            raise BankSchemaError(f"{idx_node.path}[{i}]", "expected an integer index")
        if not 0 <= raw < n_neurons:
            raise BankSchemaError(
                f"{idx_node.path}[{i}]",
                f"index {raw} out of range [0, {n_neurons})",
            )
        indices.append(raw)
    try:
        fp_indices = FingerprintIndices(indices=tuple(indices), n_neurons=n_neurons)
    except NeuralFingerprintError as exc:
        raise BankSchemaError(idx_node.path, str(exc)) from exc
    clean = _parse_stats(node.child("clean", expect=dict))
    attack_node = node.optional("attack")
    if attack_node is not None:
        attack = _parse_stats(attack_node)
        effect = node.number("effect_size")
        expected = cohens_d(clean, attack)
        tol = EFFECT_CHECK_RTOL * max(1.0, abs(expected))
        if not abs(effect - expected) <= tol:
            raise BankIntegrityError(
                f"{node.path}.effect_size: stored {effect} disagrees with "
                f"{expected} recomputed from the stored statistics"
            )
    else:
        if node.optional("effect_size") is not None:
            raise BankSchemaError(
                f"{node.path}.effect_size", "present without attack statistics"
            )
        attack, effect = None, None
    return Fingerprint(
        id=fp_id, indices=fp_indices, clean=clean, attack=attack, effect_size=effect
    )


def _parse_config(node: _Walker) -> BankConfig:
    mode_raw = node.child("mode", expect=str).doc
    try:
        mode = BankMode(mode_raw)
    except ValueError:
        raise BankSchemaError(f"{node.path}.mode", f"unknown mode {mode_raw!r}") from None
    try:
        return BankConfig(
            fingerprint_size=node.integer("fingerprint_size"),
            num_candidates=node.integer("num_candidates"),
            effect_threshold=node.number("effect_threshold"),
            max_bank_size=node.optional_integer("max_bank_size"),
            max_neuron_reuse=node.optional_integer("max_neuron_reuse"),
            master_seed=node.integer("master_seed"),
            mode=mode,
        )
    except NeuralFingerprintError as exc:
        if isinstance(exc, BankSchemaError):
            raise
        raise BankSchemaError(node.path, str(exc)) from exc


def load_bank(source: IO[str] | str | Path) -> BankFile:
    """Parse, digest-check, and schema-validate a bank file."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise BankSchemaError("<root>", f"not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise BankSchemaError("<root>", "expected a JSON object")

    root = _Walker(document, "")
    stored_digest = root.child("digest", expect=str).doc
    actual_digest = compute_bank_digest(document)
    if stored_digest != actual_digest:
        raise BankIntegrityError(
            f"digest mismatch: file says {stored_digest}, content hashes to {actual_digest}"
        )

    version = root.integer("version")
    if version != BANK_FORMAT_VERSION:
        raise BankSchemaError(
            "version", f"unsupported bank format version {version}"
        )
    model = root.child("model", expect=str).doc
    n_neurons = root.integer("n_neurons")
    classes_node = root.child("classes", expect=dict)

    classes: dict[int, ClassBank] = {}
    for key, entry in classes_node.doc.items():
        try:
            class_id = int(key)
        except ValueError:
            raise BankSchemaError(
                f"classes.{key}", "class key must be a base-10 integer"
            ) from None
        node = _Walker(entry, f"classes.{key}")
        config = _parse_config(node.child("config", expect=dict))
        prov_node = node.optional("provenance")
        provenance = dict(prov_node.doc) if prov_node is not None else {}
        fps_node = node.child("fingerprints", expect=list)
        fingerprints = [
            _parse_fingerprint(_Walker(fp_doc, f"{fps_node.path}[{i}]"), n_neurons)
            for i, fp_doc in enumerate(fps_node.doc)
        ]
        try:
            classes[class_id] = ClassBank(
                class_id=class_id,
                n_neurons=n_neurons,
                config=config,
                fingerprints=tuple(fingerprints),
                provenance=provenance,
            )
        except NeuralFingerprintError as exc:
            raise BankSchemaError(node.path, str(exc)) from exc

    return BankFile(
        model=model,
        n_neurons=n_neurons,
        classes=classes,
        version=version,
        digest=stored_digest,
    )


def bank_summary(bank: BankFile) -> dict:
    """Per-class size, effect-size spread, and worst-case neuron reuse."""
    per_class = {}
    for class_id, cb in sorted(bank.classes.items()):
        effects = [abs(fp.effect_size) for fp in cb.fingerprints if fp.effect_size is not None]
        reuse: dict[int, int] = {}
        for fp in cb.fingerprints:
            for j in fp.indices.indices:
                reuse[j] = reuse.get(j, 0) + 1
        per_class[class_id] = {
            "fingerprints": len(cb.fingerprints),
            "effect_min": min(effects) if effects else 0.0,
            "effect_median": statistics.median(effects) if effects else 0.0,
            "effect_max": max(effects) if effects else 0.0,
            "max_neuron_reuse": max(reuse.values()) if reuse else 0,
        }
    return {
        "model": bank.model,
        "n_neurons": bank.n_neurons,
        "n_classes": len(bank.classes),
        "classes": per_class,
    }
