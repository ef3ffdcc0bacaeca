"""Exception hierarchy shared by every module in the package."""


class FlacsimError(Exception):
    """Base class for all package errors."""


class InvalidCredentials(FlacsimError, ValueError):
    pass


class EmptyInput(FlacsimError, ValueError):
    pass


class SaltReuse(FlacsimError, ValueError):
    pass


class DuplicateIdentity(FlacsimError, KeyError):
    pass


class UnsupportedBackend(FlacsimError, ValueError):
    pass


class MalformedProof(FlacsimError, ValueError):
    pass


class UnknownTerm(FlacsimError, KeyError):
    pass


class OutOfRange(FlacsimError, ValueError):
    pass


class QueueFull(FlacsimError):
    pass


class NoQuorum(FlacsimError):
    pass


class EmptyBatch(FlacsimError):
    pass


class RegistrationFailed(FlacsimError):
    """Proof verification failed while registering a principal."""

    outcome = None


class ServiceProviderVerificationFailed(RegistrationFailed):
    pass


class UserVerificationFailed(RegistrationFailed):
    pass


class UnknownIdentity(FlacsimError, KeyError):
    pass


class VerificationFailed(FlacsimError):
    pass


class DenyDecision(FlacsimError):
    pass


class UnknownToken(FlacsimError, KeyError):
    pass


class AlreadyRevoked(FlacsimError):
    pass


class TokenExpired(FlacsimError):
    pass


class ConfigInvalid(FlacsimError, ValueError):
    pass


class GridMismatch(FlacsimError, ValueError):
    pass


class IoFailure(FlacsimError, OSError):
    pass


class UnknownScenario(FlacsimError, KeyError):
    pass
