"""Exception hierarchy for the neuralfp package.

Every error raised by this package derives from :class:`NeuralFingerprintError`,
so callers can catch one base class at CLI or pipeline boundaries.
"""


class NeuralFingerprintError(Exception):
    """Base class for all neuralfp errors."""


class TableFormatError(NeuralFingerprintError):
    """Activation-table stream is not a valid NFAT record (bad magic, bad kind)."""


class TableVersionError(TableFormatError):
    """NFAT record declares an unsupported format version."""


class TableTruncationError(TableFormatError):
    """NFAT record ends before the declared payload; names expected vs actual bytes."""

    def __init__(self, expected: int, actual: int, what: str = "payload"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"truncated {what}: expected {expected} bytes, got {actual}")


class TableValidationError(NeuralFingerprintError):
    """Table contents violate an invariant (non-finite value, bad shape)."""


class TableIOError(NeuralFingerprintError):
    """Underlying byte sink or source failed; carries the byte offset reached."""

    def __init__(self, offset: int, cause: Exception):
        self.offset = offset
        super().__init__(f"I/O failure at byte offset {offset}: {cause}")


class PairingError(NeuralFingerprintError):
    """Clean/attacked tables (or table vs fingerprint dims) are not commensurate."""

    def __init__(self, field: str, detail: str):
        self.field = field
        super().__init__(f"pairing mismatch on {field}: {detail}")


class ConfigError(NeuralFingerprintError):
    """A configuration value is out of range or inconsistent."""


class InsufficientDataError(NeuralFingerprintError):
    """Too few samples for the requested statistic."""


class InsufficientBankError(NeuralFingerprintError):
    """Bank holds fewer fingerprints than a selection requires."""

    def __init__(self, bank_size: int, requested: int):
        self.bank_size = bank_size
        self.requested = requested
        super().__init__(
            f"bank holds {bank_size} fingerprints, cannot select {requested}"
        )


class RuleUnavailableError(NeuralFingerprintError):
    """Decision rule needs attack statistics that this bank does not carry."""


class BankIntegrityError(NeuralFingerprintError):
    """Bank file content disagrees with its digest or its own statistics."""


class BankSchemaError(NeuralFingerprintError):
    """Bank file violates the JSON schema; carries the offending field path."""

    def __init__(self, path: str, detail: str):
        self.path = path
        super().__init__(f"{path}: {detail}")
