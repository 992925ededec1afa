"""On-carrier framing of the sealed payload.

Layout, all integers little-endian::

    offset  size  field
    0       4     magic "PESF"
    4       1     version (1)
    5       4     PBKDF2 iterations
    9       16    salt
    25      12    nonce
    37      4     ciphertext length n
    41      n     ciphertext
    41+n    16    tag

The fixed overhead is 57 bytes.  The magic makes the payload trivially
detectable by anyone who knows to look for it; no claim of statistical
invisibility is made.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .crypto import NONCE_SIZE, SALT_SIZE, TAG_SIZE
from .errors import BadMagic, TruncatedContainer, UnsupportedVersion

MAGIC = b"PESF"
VERSION = 1

_HEADER = struct.Struct("<4sBI16s12sI")
HEADER_SIZE = _HEADER.size
OVERHEAD = HEADER_SIZE + TAG_SIZE
assert OVERHEAD == 57


@dataclass(frozen=True)
class PayloadContainer:
    iterations: int
    salt: bytes
    nonce: bytes
    ciphertext: bytes
    tag: bytes
    magic: bytes = MAGIC
    version: int = VERSION

    @property
    def ct_len(self) -> int:
        return len(self.ciphertext)

    def __post_init__(self):
        if len(self.salt) != SALT_SIZE or len(self.nonce) != NONCE_SIZE or len(self.tag) != TAG_SIZE:
            raise ValueError("salt, nonce or tag has the wrong length")
        if not 0 <= self.iterations < 2**32:
            raise ValueError("iterations must fit in 32 bits")


def encoded_size(ct_len: int) -> int:
    return OVERHEAD + ct_len


def encode_container(c: PayloadContainer) -> bytes:
    header = _HEADER.pack(c.magic, c.version, c.iterations, c.salt, c.nonce, c.ct_len)
    return header + c.ciphertext + c.tag


def decode_container(data: bytes) -> PayloadContainer:
    """Parse a container from the front of ``data``; trailing bytes are ignored."""
    data = bytes(data)
    if data[:4] != MAGIC:
        raise BadMagic("no PESF container at start of data")
    if len(data) < 5:
        raise TruncatedContainer("container header cut short")
    if data[4] != VERSION:
        raise UnsupportedVersion(f"container version {data[4]} is not supported")
    if len(data) < HEADER_SIZE:
        raise TruncatedContainer("container header cut short")
    magic, version, iterations, salt, nonce, ct_len = _HEADER.unpack_from(data)
    end = HEADER_SIZE + ct_len + TAG_SIZE
    if end > len(data):
        raise TruncatedContainer(f"declared ciphertext of {ct_len} bytes overruns "
                                 f"the {len(data)} available")
    return PayloadContainer(iterations, salt, nonce, data[HEADER_SIZE:HEADER_SIZE + ct_len],
                            data[HEADER_SIZE + ct_len:end], magic, version)
