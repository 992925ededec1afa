import random

import pytest

from pesf import corpus, pe
from pesf.corpus import PeSpec, SectionSpec
from pesf.stego import StegoOptions

# cheap KDF keeps the suite fast; the iteration count travels in the container
FAST = StegoOptions(iterations=64)


def coverage_slack(data: bytes) -> set:
    """Brute-force slack oracle: mark every byte with its owner, keep the unowned ones.

    Walks the file byte by byte using only the raw header fields, without
    going through the carrier module's interval logic.
    """
    img = pe.parse(data)
    size = len(data)
    last = min(img.optional_header.size_of_headers, size)
    owner = [None] * size
    for o in range(min(img.header_end, size)):
        owner[o] = "header"
    for s in img.sections:
        if not s.size_of_raw_data:
            continue
        last = max(last, s.pointer_to_raw_data + s.size_of_raw_data)
        meaningful = s.virtual_size or s.size_of_raw_data
        for o in range(s.pointer_to_raw_data, s.pointer_to_raw_data + min(meaningful, s.size_of_raw_data)):
            owner[o] = "data"
    return {o for o in range(last) if owner[o] is None}


def trailing_fill(data: bytes, ptr: int, raw: int, fill: int) -> int:
    """Count ``fill`` bytes at the end of a raw block, scanning backwards."""
    n = 0
    while n < raw and data[ptr + raw - 1 - n] == fill:
        n += 1
    return n


@pytest.fixture
def simple_cover() -> bytes:
    return corpus.synthesize_pe(PeSpec(sections=[
        SectionSpec(".text", 0x300, 0x400),
        SectionSpec(".rsrc", 0x100, 0x600, 0x00),
    ]))


@pytest.fixture
def random_covers():
    rng = random.Random(1234)
    return [corpus.synthesize_pe(corpus.random_spec(rng)) for _ in range(20)]
