"""Hide and retract pipelines.

``hide`` runs parse -> enumerate slack -> derive key -> seal -> frame ->
scatter.  Retraction comes in two flavours: ``retract_blind`` needs only the
stego file, ``retract_distortion`` rebuilds the payload from the byte
differences between the stego file and the original cover.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

from . import carrier, crypto, pe
from .carrier import CarrierPolicy, SlackRegion
from .container import (
    MAGIC,
    PayloadContainer,
    decode_container,
    encode_container,
    encoded_size,
)
from .errors import (
    AuthenticationFailed,
    ContainerError,
    EmptyPassword,
    InsufficientCapacity,
    LengthMismatch,
    NoContainerFound,
)

# bounds the KDF work an attacker-controlled header can demand
MAX_ITERATIONS = 5_000_000


@dataclass(frozen=True)
class StegoOptions:
    policy: CarrierPolicy = field(default_factory=CarrierPolicy)
    key_bits: int = 128
    iterations: int = crypto.DEFAULT_ITERATIONS

    def __post_init__(self):
        if self.key_bits not in crypto.KEY_BITS:
            raise ValueError(f"key_bits must be one of {crypto.KEY_BITS}")
        if not 1 <= self.iterations <= MAX_ITERATIONS:
            raise ValueError(f"iterations must be between 1 and {MAX_ITERATIONS}")


@dataclass(frozen=True)
class DiffRecord:
    offset: int
    stego_byte: int
    cover_byte: int


@dataclass
class CapacityReport:
    capacity: int
    regions: List[SlackRegion]
    validation: pe.ValidationReport
    container_detected: bool
    section_names: List[str] = field(default_factory=list, repr=False)

    @property
    def usable(self) -> int:
        """Largest secret that still fits."""
        return max(self.capacity - encoded_size(0), 0)

    def to_json(self) -> dict:
        return {
            "capacity": self.capacity,
            "regions": [
                {
                    "offset": r.offset,
                    "length": r.length,
                    "kind": r.kind.value,
                    "section": (self.section_names[r.section_index]
                                if r.section_index is not None else None),
                }
                for r in self.regions
            ],
            "valid": self.validation.valid,
            "violations": [str(v) for v in self.validation],
            "container_detected": self.container_detected,
        }


def hide(cover: bytes, secret: bytes, password: crypto.Password,
         opts: Optional[StegoOptions] = None, *,
         rng: Optional[crypto.RandomSource] = None) -> bytes:
    opts = opts or StegoOptions()
    if not crypto._password_bytes(password):
        raise EmptyPassword("password must not be empty")
    image = pe.parse(cover)
    regions = carrier.enumerate_slack(image, opts.policy)
    needed, available = encoded_size(len(secret)), carrier.capacity(regions)
    if needed > available:
        raise InsufficientCapacity(needed, available)

    params = crypto.KdfParams.generate(opts.iterations, rng)
    key = crypto.derive_key(password, params, opts.key_bits)
    box = crypto.seal(key, secret, rng=rng)
    blob = encode_container(PayloadContainer(params.iterations, params.salt, box.nonce,
                                             box.ciphertext, box.tag))
    return pe.serialize(carrier.write_scattered(image, regions, blob))


def _damaged_frame(stream: bytes) -> bool:
    """True when the stream starts with our magic or a single bit flip of it."""
    head = stream[:len(MAGIC)]
    if len(head) < len(MAGIC):
        return False
    diff = int.from_bytes(head, "big") ^ int.from_bytes(MAGIC, "big")
    return diff & (diff - 1) == 0


def _unseal(stream: bytes, password: crypto.Password, opts: StegoOptions) -> bytes:
    try:
        c = decode_container(stream)
    except ContainerError as exc:
        if _damaged_frame(stream):
            raise AuthenticationFailed(f"embedded payload is damaged ({exc})") from None
        raise NoContainerFound(str(exc)) from None
    if not 1 <= c.iterations <= MAX_ITERATIONS:
        # cannot be produced by hide(); treat like any other tampering
        raise AuthenticationFailed("wrong password or corrupted payload")
    key = crypto.derive_key(password, crypto.KdfParams(c.salt, c.iterations), opts.key_bits)
    return crypto.open(key, crypto.SealedBox(c.nonce, c.ciphertext, c.tag))


def _carrier_stream(image: pe.PeImage, regions: Sequence[SlackRegion]) -> bytes:
    return carrier.read_scattered(image, regions, carrier.capacity(regions))


def retract_blind(stego: bytes, password: crypto.Password,
                  opts: Optional[StegoOptions] = None) -> bytes:
    opts = opts or StegoOptions()
    image = pe.parse(stego)
    regions = carrier.enumerate_slack(image, opts.policy)
    return _unseal(_carrier_stream(image, regions), password, opts)


def diff_cover(cover: bytes, stego: bytes) -> List[DiffRecord]:
    if len(cover) != len(stego):
        raise LengthMismatch(f"cover is {len(cover)} bytes, stego is {len(stego)}")
    out = []
    chunk = 4096
    for base in range(0, len(cover), chunk):
        a = cover[base:base + chunk]
        b = stego[base:base + chunk]
        if a == b:
            continue
        out.extend(DiffRecord(base + i, y, x) for i, (x, y) in enumerate(zip(a, b)) if x != y)
    return out


def retract_distortion(stego: bytes, cover: bytes, password: crypto.Password,
                       opts: Optional[StegoOptions] = None) -> bytes:
    """Recover the secret by replaying the stego/cover differences onto the cover.

    The slack layout comes from the cover, so edits to the stego headers
    cannot redirect the read.  Differences outside slack are ignored.
    """
    opts = opts or StegoOptions()
    records = diff_cover(cover, stego)
    if not records:
        raise NoContainerFound("stego file is identical to the cover")
    image = pe.parse(cover)
    regions = carrier.enumerate_slack(image, opts.policy)

    spans = sorted((r.offset, r.end) for r in regions)
    starts = [s for s, _ in spans]
    rebuilt = bytearray(image.raw)
    for rec in records:
        i = bisect.bisect_right(starts, rec.offset) - 1
        if i >= 0 and rec.offset < spans[i][1]:
            rebuilt[rec.offset] = rec.stego_byte
    return _unseal(_carrier_stream(image.with_raw(bytes(rebuilt)), regions), password, opts)


def inspect(data: bytes, opts: Optional[StegoOptions] = None) -> CapacityReport:
    opts = opts or StegoOptions()
    image = pe.parse(data, strict=False)
    regions = carrier.enumerate_slack(image, opts.policy)
    head = carrier.read_scattered(image, regions, min(len(MAGIC), carrier.capacity(regions)))
    return CapacityReport(carrier.capacity(regions), regions, pe.validate(image),
                          head == MAGIC, [s.label for s in image.sections])
