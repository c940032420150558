"""Hybrid encryption envelope: AES-128-GCM for object bytes, RSA-OAEP
for wrapping the per-object data key under role public keys.

On-disk SealedBlob layout, bit-exact:

    bytes 0-3   ASCII "HRB1"
    byte  4     version, 0x01
    byte  5     algorithm, 0x01 (AES-128-GCM)
    bytes 6-17  96-bit nonce
    rest        ciphertext followed by the 16-byte authentication tag

The authentication tag is verified before any plaintext is released;
tampering with the nonce, body, or associated data yields AuthFailure.
"""

from __future__ import annotations

import os
import uuid
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import padding, rsa
from cryptography.hazmat.primitives.asymmetric.rsa import RSAPrivateKey, RSAPublicKey
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import (
    AuthFailure,
    FormatError,
    KeyTooSmall,
    RandomnessUnavailable,
    UnsupportedKeySize,
    UnwrapFailure,
)

MAGIC = b"HRB1"
VERSION = 1
ALG_AES128_GCM = 1
NONCE_LEN = 12
TAG_LEN = 16
KEY_LEN = 16
SUPPORTED_MODULUS_BITS = (1024, 2048)
WRAP_SCHEME = "RSA-OAEP-SHA256"

_OAEP = padding.OAEP(
    mgf=padding.MGF1(algorithm=hashes.SHA256()),
    algorithm=hashes.SHA256(),
    label=None,
)


def _random_bytes(n: int) -> bytes:
    try:
        return os.urandom(n)
    except OSError as exc:
        raise RandomnessUnavailable(str(exc)) from exc


@dataclass(frozen=True)
class DataKey:
    key_id: str
    bytes: bytes

    def __post_init__(self) -> None:
        if len(self.bytes) != KEY_LEN:
            raise FormatError(f"data key must be {KEY_LEN} bytes, got {len(self.bytes)}")


@dataclass(frozen=True)
class WrappedKey:
    role: str
    scheme: str
    ciphertext: bytes


@dataclass
class RoleKeyPair:
    role: str
    modulus_bits: int
    private: RSAPrivateKey
    public: RSAPublicKey

    def private_pem(self) -> str:
        return self.private.private_bytes(
            encoding=serialization.Encoding.PEM,
            format=serialization.PrivateFormat.PKCS8,
            encryption_algorithm=serialization.NoEncryption(),
        ).decode("ascii")

    def public_pem(self) -> str:
        return self.public.public_bytes(
            encoding=serialization.Encoding.PEM,
            format=serialization.PublicFormat.SubjectPublicKeyInfo,
        ).decode("ascii")

    @classmethod
    def from_private_pem(cls, role: str, pem: str) -> "RoleKeyPair":
        key = serialization.load_pem_private_key(pem.encode("ascii"), password=None)
        if not isinstance(key, RSAPrivateKey):
            raise FormatError("role key PEM is not an RSA private key")
        return cls(
            role=role,
            modulus_bits=key.key_size,
            private=key,
            public=key.public_key(),
        )


@dataclass(frozen=True)
class SealedBlob:
    nonce: bytes
    body: bytes  # ciphertext || tag
    version: int = VERSION
    alg: int = ALG_AES128_GCM

    def to_bytes(self) -> bytes:
        return MAGIC + bytes((self.version, self.alg)) + self.nonce + self.body

    @classmethod
    def from_bytes(cls, raw: bytes) -> "SealedBlob":
        if len(raw) < 6 + NONCE_LEN + TAG_LEN:
            raise FormatError("sealed blob truncated")
        if raw[:4] != MAGIC:
            raise FormatError(f"bad magic {raw[:4]!r}")
        version, alg = raw[4], raw[5]
        if version != VERSION:
            raise FormatError(f"unsupported container version {version}")
        if alg != ALG_AES128_GCM:
            raise FormatError(f"unsupported algorithm id {alg}")
        return cls(nonce=raw[6 : 6 + NONCE_LEN], body=raw[6 + NONCE_LEN :])


def generate_data_key() -> DataKey:
    return DataKey(key_id=uuid.uuid4().hex, bytes=_random_bytes(KEY_LEN))


def seal(plaintext: bytes, key: DataKey, aad: bytes) -> SealedBlob:
    """Encrypt and authenticate plaintext under a fresh random nonce."""
    nonce = _random_bytes(NONCE_LEN)
    body = AESGCM(key.bytes).encrypt(nonce, plaintext, aad)
    return SealedBlob(nonce=nonce, body=body)


def open_blob(blob: SealedBlob, key: DataKey, aad: bytes) -> bytes:
    """Verify the tag and return the plaintext.

    Raises AuthFailure on any mismatch of key, nonce, body, or aad without
    distinguishing the cause.
    """
    if len(blob.nonce) != NONCE_LEN or len(blob.body) < TAG_LEN:
        raise FormatError("sealed blob malformed")
    try:
        return AESGCM(key.bytes).decrypt(blob.nonce, blob.body, aad)
    except InvalidTag:
        raise AuthFailure("authentication tag mismatch") from None


def generate_role_keypair(role: str, modulus_bits: int = 2048) -> RoleKeyPair:
    if modulus_bits not in SUPPORTED_MODULUS_BITS:
        raise UnsupportedKeySize(
            f"modulus_bits must be one of {SUPPORTED_MODULUS_BITS}, got {modulus_bits}"
        )
    private = rsa.generate_private_key(public_exponent=65537, key_size=modulus_bits)
    return RoleKeyPair(
        role=role, modulus_bits=modulus_bits, private=private, public=private.public_key()
    )


def oaep_capacity(modulus_bits: int) -> int:
    # OAEP with SHA-256: capacity = k - 2*hLen - 2
    return modulus_bits // 8 - 2 * 32 - 2


def wrap_key(key: DataKey, public: RSAPublicKey, role: str) -> WrappedKey:
    if oaep_capacity(public.key_size) < KEY_LEN:
        raise KeyTooSmall(
            f"{public.key_size}-bit modulus cannot wrap a {KEY_LEN}-byte key under OAEP"
        )
    ciphertext = public.encrypt(key.bytes, _OAEP)
    return WrappedKey(role=role, scheme=WRAP_SCHEME, ciphertext=ciphertext)


def unwrap_key(wrapped: WrappedKey, private: RSAPrivateKey, key_id: str = "") -> DataKey:
    if len(wrapped.ciphertext) != private.key_size // 8:
        raise UnwrapFailure("wrapped key length does not match modulus")
    try:
        recovered = private.decrypt(wrapped.ciphertext, _OAEP)
    except Exception:
        # single opaque error: wrong key and corrupted ciphertext must be
        # indistinguishable to the caller
        raise UnwrapFailure("key unwrap failed") from None
    if len(recovered) != KEY_LEN:
        raise UnwrapFailure("key unwrap failed")
    return DataKey(key_id=key_id or uuid.uuid4().hex, bytes=recovered)
