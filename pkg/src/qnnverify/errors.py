"""Exception hierarchy for the verification toolchain."""


class QnnVerifyError(Exception):
    """Base class for all toolchain errors."""


class ModelFormatError(QnnVerifyError):
    """Raised when a model file violates the on-disk format contract."""


class DatasetFormatError(QnnVerifyError):
    """Raised when an IDX dataset file is malformed or inconsistent."""


class QdimacsError(QnnVerifyError):
    """Raised when a QDIMACS file cannot be parsed."""


class EncodingError(QnnVerifyError):
    """Raised when a network or query cannot be encoded to SMT."""


class SolverError(QnnVerifyError):
    """Raised when the external solver misbehaves (bad output, crash)."""


class CounterexampleMismatchError(QnnVerifyError):
    """Raised when a solver model fails interpreter validation.

    This is a hard internal-consistency failure: the encoder and the
    interpreter disagree about the network's semantics.
    """
