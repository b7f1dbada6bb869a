"""Exception hierarchy shared across the engine.

The CLI maps these onto distinct exit codes (see cli.EXIT_*), so raising the
right class matters more than the message wording.
"""


class EngineError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(EngineError, ValueError):
    """An operation received arguments outside its documented domain."""


class ValidationError(EngineError):
    """A config, task file, or model file violates its schema or invariants."""


class InconsistentEvidenceError(EngineError):
    """An oracle was conditioned on an event of zero probability."""


class ConnectivityError(EngineError):
    """A remote denoiser could not be reached after all retries."""


class ProtocolError(EngineError):
    """A remote denoiser answered with a malformed or incompatible payload."""


class UpstreamError(EngineError):
    """The remote server reported an internal failure."""
