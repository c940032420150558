"""Exception hierarchy shared by all subsystems.

Grouped by the surface that raises them; the CLI and HTTP layers map
these groups onto exit codes and status codes (see cli.EXIT_CODE_MAP).
"""

from __future__ import annotations


class HrbacError(Exception):
    """Base class for every error raised by this package."""


# -- policy ------------------------------------------------------------

class UnknownRole(HrbacError):
    pass


class UnknownUser(HrbacError):
    pass


class UnknownDelegation(HrbacError):
    pass


class CycleError(HrbacError):
    """A role link would make the hierarchy cyclic."""


class SodViolation(HrbacError):
    """An assignment or delegation would give one user both roles of a
    separation-of-duties constraint."""


class ConflictExists(HrbacError):
    """A new SoD constraint is rejected because some user already holds
    both roles."""


class NotAssigned(HrbacError):
    pass


class NotHeld(HrbacError):
    """Delegation refused: the delegator does not directly hold the role."""


# -- crypto envelope ---------------------------------------------------

class CryptoError(HrbacError):
    pass


class RandomnessUnavailable(CryptoError):
    pass


class UnsupportedKeySize(CryptoError):
    pass


class KeyTooSmall(CryptoError):
    """RSA modulus too small to wrap a data key under OAEP."""


class AuthFailure(CryptoError):
    """AEAD tag verification failed: wrong key, wrong context, or
    tampered ciphertext.  No plaintext is released."""


class UnwrapFailure(CryptoError):
    """Key unwrap failed.  Deliberately opaque: wrong private key and
    corrupted ciphertext are indistinguishable."""


class FormatError(HrbacError):
    """Malformed container, document, or log record."""


# -- stores ------------------------------------------------------------

class StoreError(HrbacError):
    pass


class BackendUnavailable(StoreError):
    """Backend unreachable or failing; safe to retry later."""


class NameInvalid(StoreError):
    pass


class NotFound(StoreError):
    pass


class ValidationError(StoreError):
    """Document violates a structural invariant; nothing was written."""


class IoError(StoreError):
    pass


class UnsupportedVersion(StoreError):
    pass


# -- gateway -----------------------------------------------------------

class GatewayError(HrbacError):
    pass


class TokenInvalid(GatewayError):
    """Presented token does not match the actor's stored digest."""


class Unauthorized(GatewayError):
    """Actor kind or ownership does not permit this operation."""


class AccessDenied(GatewayError):
    """Policy denied the access; the denial has been audited."""

    def __init__(self, message: str, reason: str = "NoPermission") -> None:
        super().__init__(message)
        self.reason = reason


class OverrideDisabled(GatewayError):
    pass


class NotGranted(GatewayError):
    pass


class IntegrityMismatch(GatewayError):
    """Decrypted bytes disagree with the recorded plaintext digest."""


# -- bench -------------------------------------------------------------

class TooFewRows(HrbacError):
    pass


class InsufficientMemory(HrbacError):
    pass
