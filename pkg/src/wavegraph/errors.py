"""Exception taxonomy shared across the package.

The CLI maps ConfigError/ParameterError to exit code 2 and everything
else to exit code 1.
"""


class WavegraphError(Exception):
    """Base class for all package errors."""


class ShapeError(WavegraphError):
    """Operand dimensions are incompatible."""


class ParameterError(WavegraphError):
    """An argument violates its contract (range, emptiness, ...)."""


class DataError(WavegraphError):
    """Input data violates a structural invariant (asymmetry, negative
    weights, unlabeled training node, ...)."""


class DomainError(WavegraphError):
    """A value left the mathematical domain of an operation (log of a
    nonpositive entry)."""


class ConfigError(WavegraphError):
    """Bad run configuration: unknown key, mode/modality mismatch, ..."""


class ParseError(WavegraphError):
    """A data file failed to parse; message carries path and line number."""


class DivergenceError(WavegraphError):
    """Training produced a non-finite loss; message names the epoch."""


class ScopeError(WavegraphError):
    """A test-only code path was invoked outside its size cap."""


class SnapshotError(WavegraphError):
    """A parameter snapshot is corrupted or does not match the config."""
