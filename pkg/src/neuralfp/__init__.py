"""Neural-fingerprint banks and randomized adversarial-attack detection."""

__version__ = "0.1.0"

from .bank_store import BankFile, bank_summary, load_bank, save_bank
from .detector import (
    DetectorConfig,
    Rule,
    Verdict,
    detect,
    gaussian_log_density,
    score_anomaly,
    score_likelihood_ratio,
    score_vote,
    select_fingerprints,
)
from .errors import (
    BankIntegrityError,
    BankSchemaError,
    ConfigError,
    InsufficientBankError,
    InsufficientDataError,
    NeuralFingerprintError,
    PairingError,
    RuleUnavailableError,
    TableFormatError,
    TableIOError,
    TableTruncationError,
    TableValidationError,
    TableVersionError,
)
from .evaluation import (
    ExperimentConfig,
    ExperimentReport,
    RocCurve,
    auc,
    calibrate_threshold,
    roc_curve,
    run_experiment,
)
from .fingerprints import (
    BankConfig,
    BankMode,
    ClassBank,
    Fingerprint,
    FingerprintIndices,
    GaussianStats,
    cohens_d,
    fingerprint_values,
    fit_gaussian,
    generate_bank,
    sample_candidate,
)
from .synth import SynthConfig, SynthClassTables, synth_class_tables, synth_tables
from .tables import (
    ActivationTable,
    TableKind,
    read_table,
    table_digest,
    table_summary,
    validate_pair,
    write_table,
)

__all__ = [
    "ActivationTable",
    "BankConfig",
    "BankFile",
    "BankIntegrityError",
    "BankMode",
    "BankSchemaError",
    "ClassBank",
    "ConfigError",
    "DetectorConfig",
    "ExperimentConfig",
    "ExperimentReport",
    "Fingerprint",
    "FingerprintIndices",
    "GaussianStats",
    "InsufficientBankError",
    "InsufficientDataError",
    "NeuralFingerprintError",
    "PairingError",
    "RocCurve",
    "Rule",
    "RuleUnavailableError",
    "SynthClassTables",
    "SynthConfig",
    "TableFormatError",
    "TableIOError",
    "TableKind",
    "TableTruncationError",
    "TableValidationError",
    "TableVersionError",
    "Verdict",
    "auc",
    "bank_summary",
    "calibrate_threshold",
    "cohens_d",
    "detect",
    "fingerprint_values",
    "fit_gaussian",
    "gaussian_log_density",
    "generate_bank",
    "load_bank",
    "read_table",
    "roc_curve",
    "run_experiment",
    "sample_candidate",
    "save_bank",
    "score_anomaly",
    "score_likelihood_ratio",
    "score_vote",
    "select_fingerprints",
    "synth_class_tables",
    "synth_tables",
    "table_digest",
    "table_summary",
    "validate_pair",
    "write_table",
]
