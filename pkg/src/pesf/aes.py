"""AES block encryption (FIPS-197) and the GCM mode built on it (SP 800-38D).

Only the forward cipher is implemented: counter mode never needs the
inverse transform.  The round function uses the usual four 32-bit lookup
tables, which keeps a pure-Python block at a few tens of microseconds.
"""

from __future__ import annotations

import hmac
from typing import List

BLOCK_SIZE = 16


def _xtime(a: int) -> int:
    a <<= 1
    return (a ^ 0x11B) if a & 0x100 else a


def _build_sbox() -> List[int]:
    # multiplicative inverse in GF(2^8) followed by the affine map
    exp = [0] * 512
    log = [0] * 256
    x = 1
    for i in range(255):
        exp[i] = x
        log[x] = i
        x ^= _xtime(x)  # generator 3
    for i in range(255, 512):
        exp[i] = exp[i - 255]
    sbox = [0] * 256
    for a in range(256):
        inv = 0 if a == 0 else exp[255 - log[a]]
        s = inv
        for shift in range(1, 5):
            s ^= ((inv << shift) | (inv >> (8 - shift))) & 0xFF
        sbox[a] = s ^ 0x63
    return sbox


SBOX = _build_sbox()


def _build_tables():
    t0 = []
    for a in range(256):
        s = SBOX[a]
        s2 = _xtime(s)
        s3 = s2 ^ s
        t0.append((s2 << 24) | (s << 16) | (s << 8) | s3)
    rot = lambda w, n: ((w >> n) | (w << (32 - n))) & 0xFFFFFFFF  # noqa: E731
    return t0, [rot(w, 8) for w in t0], [rot(w, 16) for w in t0], [rot(w, 24) for w in t0]


_T0, _T1, _T2, _T3 = _build_tables()

_RCON = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1B, 0x36]


def _sub_word(w: int) -> int:
    return ((SBOX[w >> 24] << 24) | (SBOX[(w >> 16) & 0xFF] << 16)
            | (SBOX[(w >> 8) & 0xFF] << 8) | SBOX[w & 0xFF])


def expand_key(key: bytes) -> List[int]:
    """Round-key schedule as a flat list of 32-bit words."""
    nk = len(key) // 4
    if len(key) not in (16, 24, 32):
        raise ValueError(f"AES key must be 16, 24 or 32 bytes, got {len(key)}")
    rounds = nk + 6
    w = [int.from_bytes(key[4 * i:4 * i + 4], "big") for i in range(nk)]
    for i in range(nk, 4 * (rounds + 1)):
        t = w[i - 1]
        if i % nk == 0:
            t = _sub_word(((t << 8) | (t >> 24)) & 0xFFFFFFFF) ^ (_RCON[i // nk - 1] << 24)
        elif nk > 6 and i % nk == 4:
            t = _sub_word(t)
        w.append(w[i - nk] ^ t)
    return w


class AES:
    """Forward AES cipher for one key."""

    def __init__(self, key: bytes):
        self._w = expand_key(bytes(key))
        self.rounds = len(key) // 4 + 6

    def encrypt_block(self, block: bytes) -> bytes:
        if len(block) != BLOCK_SIZE:
            raise ValueError("AES block must be 16 bytes")
        return self._encrypt_int(int.from_bytes(block, "big")).to_bytes(16, "big")

    def _encrypt_int(self, x: int) -> int:
        w = self._w
        T0, T1, T2, T3, S = _T0, _T1, _T2, _T3, SBOX
        s0 = ((x >> 96) & 0xFFFFFFFF) ^ w[0]
        s1 = ((x >> 64) & 0xFFFFFFFF) ^ w[1]
        s2 = ((x >> 32) & 0xFFFFFFFF) ^ w[2]
        s3 = (x & 0xFFFFFFFF) ^ w[3]
        k = 4
        for _ in range(self.rounds - 1):
            t0 = T0[s0 >> 24] ^ T1[(s1 >> 16) & 0xFF] ^ T2[(s2 >> 8) & 0xFF] ^ T3[s3 & 0xFF] ^ w[k]
            t1 = T0[s1 >> 24] ^ T1[(s2 >> 16) & 0xFF] ^ T2[(s3 >> 8) & 0xFF] ^ T3[s0 & 0xFF] ^ w[k + 1]
            t2 = T0[s2 >> 24] ^ T1[(s3 >> 16) & 0xFF] ^ T2[(s0 >> 8) & 0xFF] ^ T3[s1 & 0xFF] ^ w[k + 2]
            t3 = T0[s3 >> 24] ^ T1[(s0 >> 16) & 0xFF] ^ T2[(s1 >> 8) & 0xFF] ^ T3[s2 & 0xFF] ^ w[k + 3]
            s0, s1, s2, s3 = t0, t1, t2, t3
            k += 4
        # last round has no MixColumns
        r0 = ((S[s0 >> 24] << 24) | (S[(s1 >> 16) & 0xFF] << 16)
              | (S[(s2 >> 8) & 0xFF] << 8) | S[s3 & 0xFF]) ^ w[k]
        r1 = ((S[s1 >> 24] << 24) | (S[(s2 >> 16) & 0xFF] << 16)
              | (S[(s3 >> 8) & 0xFF] << 8) | S[s0 & 0xFF]) ^ w[k + 1]
        r2 = ((S[s2 >> 24] << 24) | (S[(s3 >> 16) & 0xFF] << 16)
              | (S[(s0 >> 8) & 0xFF] << 8) | S[s1 & 0xFF]) ^ w[k + 2]
        r3 = ((S[s3 >> 24] << 24) | (S[(s0 >> 16) & 0xFF] << 16)
              | (S[(s1 >> 8) & 0xFF] << 8) | S[s2 & 0xFF]) ^ w[k + 3]
        return (r0 << 96) | (r1 << 64) | (r2 << 32) | r3


# -- GCM --------------------------------------------------------------------

_R = 0xE1 << 120
_MASK128 = (1 << 128) - 1


class _GHash:
    """Multiplication by a fixed H in GF(2^128), one 256-entry table per byte lane."""

    def __init__(self, h: int):
        powers = []
        v = h
        for _ in range(128):
            powers.append(v)
            v = (v >> 1) ^ _R if v & 1 else v >> 1
        tables = []
        for lane in range(16):
            # bit 0 of the block is the MSB of byte 0
            bits = powers[8 * lane:8 * lane + 8]
            t = [0] * 256
            for b in range(1, 256):
                low = b & -b
                t[b] = t[b ^ low] ^ bits[7 - low.bit_length() + 1]
            tables.append(t)
        self._tables = tables

    def mul(self, x: int) -> int:
        z = 0
        for lane, t in enumerate(self._tables):
            z ^= t[(x >> (120 - 8 * lane)) & 0xFF]
        return z

    def digest(self, aad: bytes, ciphertext: bytes) -> int:
        y = 0
        for data in (aad, ciphertext):
            for i in range(0, len(data), 16):
                chunk = data[i:i + 16]
                y = self.mul(y ^ int.from_bytes(chunk.ljust(16, b"\0"), "big"))
        lengths = ((len(aad) * 8) << 64) | (len(ciphertext) * 8)
        return self.mul(y ^ lengths)


def _ctr_xor(cipher: AES, counter0: int, data: bytes) -> bytes:
    """XOR ``data`` with the keystream starting at counter block ``counter0``."""
    if not data:
        return b""
    prefix = counter0 & ~0xFFFFFFFF & _MASK128
    ctr = counter0 & 0xFFFFFFFF
    enc = cipher._encrypt_int
    nblocks = (len(data) + 15) // 16
    stream = 0
    for i in range(nblocks):
        stream = (stream << 128) | enc(prefix | ((ctr + i) & 0xFFFFFFFF))
    stream >>= nblocks * 128 - len(data) * 8
    return (int.from_bytes(data, "big") ^ stream).to_bytes(len(data), "big")


def gcm_encrypt(key: bytes, nonce: bytes, plaintext: bytes, aad: bytes = b"") -> tuple:
    """Return ``(ciphertext, tag)`` for a 96-bit nonce."""
    if len(nonce) != 12:
        raise ValueError("GCM nonce must be 12 bytes")
    cipher = AES(key)
    j0 = (int.from_bytes(nonce, "big") << 32) | 1
    ct = _ctr_xor(cipher, j0 + 1, plaintext)
    tag = _gcm_tag(cipher, j0, aad, ct)
    return ct, tag


def gcm_decrypt(key: bytes, nonce: bytes, ciphertext: bytes, tag: bytes,
                aad: bytes = b"") -> bytes:
    """Inverse of ``gcm_encrypt``; raises ``ValueError`` when the tag does not verify."""
    if len(nonce) != 12:
        raise ValueError("GCM nonce must be 12 bytes")
    cipher = AES(key)
    j0 = (int.from_bytes(nonce, "big") << 32) | 1
    if not hmac.compare_digest(_gcm_tag(cipher, j0, aad, ciphertext), bytes(tag)):
        raise ValueError("authentication tag mismatch")
    return _ctr_xor(cipher, j0 + 1, ciphertext)


def _gcm_tag(cipher: AES, j0: int, aad: bytes, ct: bytes) -> bytes:
    gh = _GHash(cipher._encrypt_int(0))
    return (gh.digest(aad, ct) ^ cipher._encrypt_int(j0)).to_bytes(16, "big")
