"""Command-line interface: extract activations, attack images, build datasets.

Model/image sources accept either the built-in deterministic toy world
(``--model toy``, ``--images toy:train`` / ``toy:test``) or files: a
TorchScript module for ``--model`` and an ImageFolder-style directory
(``<dir>/<label>/*.png``) for ``--images``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import torch

from .attack import AttackConfig, ifgsm_attack
from .dataset import build_dataset
from .errors import AdapterError
from .extraction import ExtractionConfig, extract_activations
from .nfat import write_nfat
from .toy import DEFAULT_LAYERS, make_toy_world

_toy_world_cache: dict[int, object] = {}


def _get_toy_world(seed: int = 0):
    if seed not in _toy_world_cache:
        print(f"training toy classifier (seed {seed})...", file=sys.stderr)
        _toy_world_cache[seed] = make_toy_world(seed=seed)
    return _toy_world_cache[seed]


def _load_model(spec: str, toy_seed: int) -> torch.nn.Module:
    if spec == "toy":
        return _get_toy_world(toy_seed).model
    model = torch.jit.load(spec, map_location="cpu")
    model.eval()
    return model


def _load_images(spec: str, toy_seed: int) -> tuple[torch.Tensor, torch.Tensor]:
    if spec.startswith("toy:"):
        split = spec.split(":", 1)[1]
        return _get_toy_world(toy_seed).split(split)
    root = Path(spec)
    if not root.is_dir():
        raise AdapterError(
            f"--images must be toy:train, toy:test, or a directory; got {spec!r}"
        )
    try:
        from PIL import Image
    except ImportError as exc:
        raise AdapterError("directory image sources need Pillow installed") from exc
    images, labels = [], []
    for label_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        try:
            label = int(label_dir.name)
        except ValueError:
            raise AdapterError(
                f"image directory names must be integer labels, got {label_dir.name!r}"
            ) from None
        for path in sorted(label_dir.glob("*")):
            if path.suffix.lower() not in (".png", ".jpg", ".jpeg", ".bmp"):
                continue
            with Image.open(path) as img:
                arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
            images.append(torch.from_numpy(arr).permute(2, 0, 1))
            labels.append(label)
    if not images:
        raise AdapterError(f"no images found under {root}")
    return torch.stack(images), torch.tensor(labels)


def _parse_layers(raw: str) -> tuple[str, ...]:
    names = tuple(part.strip() for part in raw.split(",") if part.strip())
    return names or DEFAULT_LAYERS


def _cmd_extract(args) -> int:
    model = _load_model(args.model, args.toy_seed)
    images, _labels = _load_images(args.images, args.toy_seed)
    config = ExtractionConfig(
        model_id=args.model,
        layer_names=_parse_layers(args.layers),
        class_id=args.class_id,
        confidence_floor=args.conf_floor,
    )
    table, skipped = extract_activations(images, model, config, kind=args.kind)
    write_nfat(table, args.out)
    print(
        f"wrote {table.n_samples} x {table.n_neurons} {args.kind} table to "
        f"{args.out} (skipped {skipped} below confidence {args.conf_floor})"
    )
    return 0


def _cmd_attack(args) -> int:
    model = _load_model(args.model, args.toy_seed)
    images, labels = _load_images(args.images, args.toy_seed)
    config = AttackConfig(
        target_class=args.target,
        eps=args.eps,
        step_size=args.alpha,
        max_iter=args.iters,
        stop_confidence=args.stop_conf,
    )
    rng = np.random.default_rng(args.seed)
    donors = [i for i in range(len(images)) if int(labels[i]) != args.target]
    picks = rng.choice(len(donors), size=min(args.n, len(donors)), replace=False)
    print("attempt,source_index,source_label,success,iterations,confidence,linf")
    successes = 0
    iteration_counts = []
    for attempt, pick in enumerate(picks):
        index = donors[int(pick)]
        result = ifgsm_attack(images[index], model, config)
        linf = float((result.image - images[index]).abs().max())
        successes += result.success
        if result.success:
            iteration_counts.append(result.iterations)
        print(
            f"{attempt},{index},{int(labels[index])},{int(result.success)},"
            f"{result.iterations},{result.confidence:.4f},{linf:.8f}"
        )
    median = float(np.median(iteration_counts)) if iteration_counts else float("nan")
    print(
        f"# {successes}/{len(picks)} succeeded; median iterations {median}",
        file=sys.stderr,
    )
    return 0


def _cmd_build_dataset(args) -> int:
    model = _load_model(args.model, args.toy_seed)
    images, labels = _load_images(args.images, args.toy_seed)
    pairs = list(zip(images, labels))
    extraction = ExtractionConfig(
        model_id=args.model,
        layer_names=_parse_layers(args.layers),
        class_id=args.class_id,
        confidence_floor=args.conf_floor,
    )
    attack = AttackConfig(
        target_class=args.class_id,
        eps=args.eps,
        step_size=args.alpha,
        max_iter=args.iters,
        stop_confidence=args.stop_conf,
    )
    result = build_dataset(
        class_id=args.class_id,
        clean_source=pairs,
        donor_source=pairs,
        model=model,
        extraction=extraction,
        attack=attack,
        n_clean=args.n_clean,
        n_attacked=args.n_attacked,
        out_dir=args.out_dir,
    )
    print(f"clean: {result.n_clean} rows -> {result.clean_path}")
    if result.attacked_path is not None:
        median = float(np.median(result.attack_iterations))
        print(
            f"attacked: {result.n_attacked} rows from {result.attacks_attempted} "
            f"attempts (median {median:.0f} iterations) -> {result.attacked_path}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nf-adapter",
        description="Extract activation tables and adversarial datasets from torch classifiers.",
    )
    parser.add_argument("--toy-seed", type=int, default=0,
                        help="seed for the built-in toy model/world")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="write one activation table")
    p.add_argument("--model", default="toy")
    p.add_argument("--images", default="toy:test")
    p.add_argument("--class", type=int, required=True, dest="class_id")
    p.add_argument("--layers", default=",".join(DEFAULT_LAYERS))
    p.add_argument("--conf-floor", type=float, default=0.50)
    p.add_argument("--kind", choices=("clean", "attacked"), default="clean")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("attack", help="run targeted IFGSM attempts and report")
    p.add_argument("--model", default="toy")
    p.add_argument("--images", default="toy:test")
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--alpha", type=float, default=None,
                   help="step size (default eps/10)")
    p.add_argument("--iters", type=int, default=150)
    p.add_argument("--stop-conf", type=float, default=0.70)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_attack)

    p = sub.add_parser("build-dataset", help="emit paired clean/attacked tables")
    p.add_argument("--model", default="toy")
    p.add_argument("--images", default="toy:train")
    p.add_argument("--class", type=int, required=True, dest="class_id")
    p.add_argument("--n-clean", type=int, default=500)
    p.add_argument("--n-attacked", type=int, default=500)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--iters", type=int, default=150)
    p.add_argument("--stop-conf", type=float, default=0.70)
    p.add_argument("--conf-floor", type=float, default=0.50)
    p.add_argument("--layers", default=",".join(DEFAULT_LAYERS))
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_build_dataset)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except AdapterError as exc:
        print(f"nf-adapter: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
