"""Password-based authenticated encryption of the secret before it is hidden.

Keys come from PBKDF2-HMAC-SHA256; the cipher is AES-GCM (AES in counter
mode plus a 128-bit GHASH tag).  Randomness comes from ``secrets`` unless a
``rng`` callable returning *n* bytes is injected, which tests use to make
output reproducible.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from . import aes
from .errors import AuthenticationFailed, BadKeyLength, EmptyPassword

SALT_SIZE = 16
NONCE_SIZE = 12
TAG_SIZE = 16
DEFAULT_ITERATIONS = 100_000
KEY_BITS = (128, 192, 256)

RandomSource = Callable[[int], bytes]
Password = Union[bytes, str]


@dataclass(frozen=True)
class KdfParams:
    salt: bytes = field(default_factory=lambda: secrets.token_bytes(SALT_SIZE))
    iterations: int = DEFAULT_ITERATIONS

    def __post_init__(self):
        if len(self.salt) != SALT_SIZE:
            raise ValueError(f"salt must be {SALT_SIZE} bytes")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")

    @classmethod
    def generate(cls, iterations: int = DEFAULT_ITERATIONS,
                 rng: Optional[RandomSource] = None) -> "KdfParams":
        return cls((rng or secrets.token_bytes)(SALT_SIZE), iterations)


@dataclass(frozen=True)
class SealedBox:
    nonce: bytes
    ciphertext: bytes
    tag: bytes

    def __post_init__(self):
        if len(self.nonce) != NONCE_SIZE:
            raise ValueError(f"nonce must be {NONCE_SIZE} bytes")
        if len(self.tag) != TAG_SIZE:
            raise ValueError(f"tag must be {TAG_SIZE} bytes")


def _password_bytes(password: Password) -> bytes:
    return password.encode("utf-8") if isinstance(password, str) else bytes(password)


def derive_key(password: Password, params: KdfParams, key_bits: int = 128) -> bytes:
    password = _password_bytes(password)
    if not password:
        raise EmptyPassword("password must not be empty")
    if key_bits not in KEY_BITS:
        raise BadKeyLength(f"key_bits must be one of {KEY_BITS}, got {key_bits}")
    return hashlib.pbkdf2_hmac("sha256", password, params.salt, params.iterations,
                               key_bits // 8)


def _check_key(key: bytes) -> None:
    if len(key) * 8 not in KEY_BITS:
        raise BadKeyLength(f"AES key must be 16, 24 or 32 bytes, got {len(key)}")


def seal(key: bytes, plaintext: bytes, *, rng: Optional[RandomSource] = None) -> SealedBox:
    _check_key(key)
    nonce = (rng or secrets.token_bytes)(NONCE_SIZE)
    ct, tag = aes.gcm_encrypt(key, nonce, bytes(plaintext))
    return SealedBox(nonce, ct, tag)


def open(key: bytes, box: SealedBox) -> bytes:  # noqa: A001
    _check_key(key)
    try:
        return aes.gcm_decrypt(key, box.nonce, box.ciphertext, box.tag)
    except ValueError:
        raise AuthenticationFailed("wrong password or corrupted payload") from None
