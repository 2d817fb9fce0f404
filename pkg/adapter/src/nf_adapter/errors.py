"""Adapter exceptions."""


class AdapterError(Exception):
    """Base class for adapter errors."""


class UnsupportedModelError(AdapterError):
    """Model does not expose input gradients (required for gradient attacks)."""


class UnknownLayerError(AdapterError):
    """A configured layer name does not resolve to a module in the model."""


class NoQualifyingImagesError(AdapterError):
    """Every candidate image was filtered out; no table can be written."""


class ShortfallError(AdapterError):
    """Source ran out before the requested number of qualifying rows."""

    def __init__(self, what: str, requested: int, obtained: int):
        self.what = what
        self.requested = requested
        self.obtained = obtained
        super().__init__(
            f"needed {requested} {what} rows, source yielded only {obtained}"
        )
