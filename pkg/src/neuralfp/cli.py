"""Command-line interface: build, inspect, detect, synthesize, evaluate."""

from __future__ import annotations

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bank_store import BankFile, bank_summary, load_bank, save_bank
from .detector import DetectorConfig, Rule, detect
from .errors import NeuralFingerprintError
from .evaluation import ExperimentConfig, run_experiment
from .fingerprints import BankConfig, BankMode, generate_bank
from .report import format_text_table, write_report_bundle
from .synth import SynthConfig, synth_tables
from .tables import read_table, table_summary, write_table


def _cmd_inspect(args) -> int:
    if (args.file is None) == (args.bank is None):
        raise NeuralFingerprintError("inspect needs exactly one of <file> or --bank")
    if args.bank is not None:
        summary = bank_summary(load_bank(args.bank))
        print(json.dumps(summary, indent=2))
        return 0
    summary = table_summary(read_table(args.file))
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_synth(args) -> int:
    config = SynthConfig(
        n_neurons=args.n,
        n_classes=args.classes,
        n_train_clean=args.m_train,
        n_test_clean=args.m_test,
        n_train_attacked=args.m_train_attacked or args.m_train,
        n_test_attacked=args.m_test_attacked or args.m_test,
        informative_fraction=args.p,
        attack_shift=args.delta,
        seed=args.seed,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for class_id, tables in synth_tables(config).items():
        for stem, table in (
            ("clean_train", tables.clean_train),
            ("clean_test", tables.clean_test),
            ("attacked_train", tables.attacked_train),
            ("attacked_test", tables.attacked_test),
        ):
            write_table(table, out_dir / f"class{class_id}_{stem}.nfat")
    n_files = 4 * config.n_classes
    print(f"wrote {n_files} tables to {out_dir}")
    return 0


def _cmd_build(args) -> int:
    clean = read_table(args.clean)
    mode = BankMode.CLEAN_ONLY if args.clean_only else BankMode.TWO_SAMPLE
    attacked = None
    if mode is BankMode.TWO_SAMPLE:
        if args.attacked is None:
            raise NeuralFingerprintError("--attacked is required unless --clean-only")
        attacked = read_table(args.attacked)
    config = BankConfig(
        fingerprint_size=args.d,
        num_candidates=args.candidates,
        effect_threshold=args.effect_threshold,
        max_bank_size=args.max_bank_size,
        max_neuron_reuse=args.max_neuron_reuse,
        master_seed=args.seed,
        mode=mode,
    )
    created = datetime.datetime.now(datetime.timezone.utc).isoformat()
    bank = generate_bank(
        clean, attacked, config,
        workers=args.workers,
        provenance_extra={"created_at": created},
    )
    bank_file = BankFile(
        model=args.model, n_neurons=bank.n_neurons, classes={bank.class_id: bank}
    )
    digest = save_bank(bank_file, args.out)
    print(
        f"class {bank.class_id}: accepted {len(bank)} of {config.num_candidates} "
        f"candidates -> {args.out} (digest {digest[:12]})"
    )
    return 0


def _read_activation_rows(path: Path, expected_n: int) -> tuple[np.ndarray, int | None]:
    """Rows to score: an NFAT table or a text file of raw vectors."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == b"NFAT":
        table = read_table(path)
        return table.values, table.class_id
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        rows.append([float(tok) for tok in line.replace(",", " ").split()])
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != expected_n:
        raise NeuralFingerprintError(
            f"raw vector file has shape {arr.shape}, bank expects {expected_n} columns"
        )
    return arr, None


def _cmd_detect(args) -> int:
    bank_file = load_bank(args.bank)
    rows, file_class = _read_activation_rows(Path(args.activations), bank_file.n_neurons)
    class_id = args.class_id if args.class_id is not None else file_class
    if class_id is None:
        if len(bank_file.classes) == 1:
            class_id = next(iter(bank_file.classes))
        else:
            raise NeuralFingerprintError(
                "--class is required with a raw vector file and a multi-class bank"
            )
    if class_id not in bank_file.classes:
        raise NeuralFingerprintError(f"bank has no class {class_id}")
    bank = bank_file.classes[class_id]
    config = DetectorConfig(
        rule=Rule.from_name(args.rule),
        n_fingerprints=args.k,
        threshold=args.threshold,
        seed=args.seed,
    )
    print("sample_index,score,verdict,fingerprint_ids")
    flagged = 0
    for i, row in enumerate(rows):
        rng = np.random.default_rng([config.seed, i])
        verdict = detect(row, bank, config, rng)
        word = "attack" if verdict.is_attack else "clean"
        flagged += verdict.is_attack
        ids = ";".join(str(fp) for fp in verdict.fingerprint_ids)
        print(f"{i},{verdict.attack_score:.9g},{word},{ids}")
    print(f"# flagged {flagged} of {len(rows)} samples", file=sys.stderr)
    return 0


def _parse_rules(raw: str) -> tuple[Rule, ...]:
    if raw.strip().lower() == "all":
        return (Rule.LIKELIHOOD_RATIO, Rule.VOTE, Rule.ANOMALY)
    return tuple(Rule.from_name(part) for part in raw.split(",") if part.strip())


def _cmd_eval(args) -> int:
    config = ExperimentConfig(
        bank=BankConfig(
            fingerprint_size=args.d,
            num_candidates=args.candidates,
            effect_threshold=args.effect_threshold,
            max_bank_size=args.max_bank_size,
            max_neuron_reuse=args.max_neuron_reuse,
            master_seed=args.seed,
            mode=BankMode.TWO_SAMPLE,
        ),
        rules=_parse_rules(args.rules),
        k_values=tuple(int(k) for k in args.k.split(",")),
        target_fprs=tuple(float(f) for f in args.fpr.split(",")),
        n_seeds=args.seeds,
        base_seed=args.seed,
        workers=args.workers,
    )
    report = run_experiment(args.data_dir, config)
    print(format_text_table(report))
    if args.out:
        written = write_report_bundle(report, args.out)
        for path in written:
            print(f"wrote {path}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nf",
        description="Neural-fingerprint banks and randomized adversarial-attack detection.",
    )
    parser.add_argument("--version", action="version", version=f"nf {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="print a table or bank summary")
    p.add_argument("file", nargs="?", help="NFAT activation-table file")
    p.add_argument("--bank", help="bank JSON file")
    p.set_defaults(func=_cmd_inspect)

    p = sub.add_parser("synth", help="generate planted-signal synthetic tables")
    p.add_argument("--n", type=int, default=10_000, help="neurons per sample")
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--m-train", type=int, default=400)
    p.add_argument("--m-test", type=int, default=100)
    p.add_argument("--m-train-attacked", type=int, default=None)
    p.add_argument("--m-test-attacked", type=int, default=None)
    p.add_argument("--p", type=float, default=0.1, help="informative neuron fraction")
    p.add_argument("--delta", type=float, default=1.0, help="attack mean shift")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("build", help="build a fingerprint bank from a table pair")
    p.add_argument("--clean", required=True)
    p.add_argument("--attacked")
    p.add_argument("--d", type=int, default=50, dest="d", help="fingerprint size")
    p.add_argument("--candidates", type=int, default=100_000)
    p.add_argument("--effect-threshold", type=float, default=1.0)
    p.add_argument("--max-bank-size", type=int, default=None)
    p.add_argument("--max-neuron-reuse", type=int, default=None)
    p.add_argument("--clean-only", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--model", default="", help="model identifier recorded in the bank")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("detect", help="score samples against a bank")
    p.add_argument("--bank", required=True)
    p.add_argument("--activations", required=True,
                   help="NFAT file or text file with one activation vector per line")
    p.add_argument("--rule", default="likelihood",
                   help="likelihood|vote|anomaly")
    p.add_argument("--k", type=int, default=20)
    p.add_argument("--threshold", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--class", type=int, default=None, dest="class_id")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("eval", help="run the experiment harness on a data directory")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--rules", default="all")
    p.add_argument("--k", default="1,5,10,20,40")
    p.add_argument("--fpr", default="0.01,0.02,0.05")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=50)
    p.add_argument("--candidates", type=int, default=20_000)
    p.add_argument("--effect-threshold", type=float, default=1.0)
    p.add_argument("--max-bank-size", type=int, default=None)
    p.add_argument("--max-neuron-reuse", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=None, help="report JSON path (CSV and figures follow)")
    p.set_defaults(func=_cmd_eval)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NeuralFingerprintError as exc:
        print(f"nf: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
