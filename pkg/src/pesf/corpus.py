"""Deterministic generator of small, structurally valid 32-bit PE files.

The output is not meant to run; it only has to satisfy the parser's model.
Section bodies are seeded pseudo-random bytes so that slack and payload
are easy to tell apart in tests.
"""

from __future__ import annotations

import random
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Union

from .errors import InvalidSpec
from .pe import COFF_HEADER_SIZE, PE32_MAGIC, SECTION_HEADER_SIZE

DOS_STUB_END = 0x80
OPTIONAL_HEADER_SIZE = 224
IMAGE_FILE_MACHINE_I386 = 0x14C
# EXECUTABLE_IMAGE | 32BIT_MACHINE
COFF_CHARACTERISTICS = 0x0102
CODE_SECTION = 0x60000020
DATA_SECTION = 0xC0000040

_DOS_MESSAGE = b"This program cannot be run in DOS mode.\r\r\n$"


@dataclass
class SectionSpec:
    name: str
    virtual_size: int
    raw_size: int
    fill: int = 0x00
    # unowned bytes placed before this section's raw block
    gap_before: int = 0


@dataclass
class PeSpec:
    file_alignment: int = 0x200
    section_alignment: int = 0x1000
    image_base: int = 0x400000
    sections: List[SectionSpec] = field(default_factory=list)
    seed: int = 0
    # bytes appended after the last section
    overlay_size: int = 0


def _align(n: int, a: int) -> int:
    return (n + a - 1) // a * a


def _pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def check_spec(spec: PeSpec) -> None:
    fa, sa = spec.file_alignment, spec.section_alignment
    if not (_pow2(fa) and _pow2(sa)):
        raise InvalidSpec("alignments must be powers of two")
    if sa < fa:
        raise InvalidSpec("section_alignment must be >= file_alignment")
    if not 0 <= spec.image_base < 2**32:
        raise InvalidSpec("image_base must fit in 32 bits")
    if spec.overlay_size < 0:
        raise InvalidSpec("overlay_size must be non-negative")
    for s in spec.sections:
        if len(s.name.encode("latin-1")) > 8:
            raise InvalidSpec(f"section name {s.name!r} longer than 8 bytes")
        if s.raw_size < 0 or s.raw_size % fa:
            raise InvalidSpec(f"{s.name}: raw_size {s.raw_size:#x} not a multiple of {fa:#x}")
        if s.gap_before < 0 or s.gap_before % fa:
            raise InvalidSpec(f"{s.name}: gap_before {s.gap_before:#x} not a multiple of {fa:#x}")
        if s.virtual_size < 0:
            raise InvalidSpec(f"{s.name}: negative virtual_size")
        if not 0 <= s.fill <= 0xFF:
            raise InvalidSpec(f"{s.name}: fill must be a byte value")


def synthesize_pe(spec: PeSpec) -> bytes:
    check_spec(spec)
    fa, sa = spec.file_alignment, spec.section_alignment
    rng = random.Random(spec.seed)
    nsec = len(spec.sections)

    table_off = DOS_STUB_END + 4 + COFF_HEADER_SIZE + OPTIONAL_HEADER_SIZE
    table_end = table_off + nsec * SECTION_HEADER_SIZE
    size_of_headers = _align(table_end, fa)

    headers = []
    bodies = []
    raw_ptr = size_of_headers
    va = _align(size_of_headers, sa)
    for s in spec.sections:
        raw_ptr += s.gap_before
        meaningful = s.raw_size if s.virtual_size == 0 else min(s.virtual_size, s.raw_size)
        content = bytearray(rng.randbytes(meaningful))
        if content and content[-1] == s.fill:
            content[-1] ^= 0xFF
        body = bytes(content) + bytes([s.fill]) * (s.raw_size - meaningful)
        ptr = raw_ptr if s.raw_size else 0
        chars = CODE_SECTION if s.name == ".text" else DATA_SECTION
        headers.append(struct.pack("<8sIIIIIIHHI", s.name.encode("latin-1"), s.virtual_size,
                                   va, s.raw_size, ptr, 0, 0, 0, 0, chars))
        bodies.append((raw_ptr, body))
        raw_ptr += s.raw_size
        va += _align(max(s.virtual_size, s.raw_size, 1), sa)
    size_of_image = va

    out = bytearray(raw_ptr)
    out[0:2] = b"MZ"
    struct.pack_into("<I", out, 0x3C, DOS_STUB_END)
    out[0x4E:0x4E + len(_DOS_MESSAGE)] = _DOS_MESSAGE
    out[DOS_STUB_END:DOS_STUB_END + 4] = b"PE\0\0"
    struct.pack_into("<HHIIIHH", out, DOS_STUB_END + 4, IMAGE_FILE_MACHINE_I386, nsec,
                     0, 0, 0, OPTIONAL_HEADER_SIZE, COFF_CHARACTERISTICS)

    opt = DOS_STUB_END + 4 + COFF_HEADER_SIZE
    first_va = _align(size_of_headers, sa)
    struct.pack_into("<HBB", out, opt, PE32_MAGIC, 14, 0)
    struct.pack_into("<II", out, opt + 16, first_va if nsec else 0, first_va if nsec else 0)
    struct.pack_into("<III", out, opt + 28, spec.image_base, sa, fa)
    struct.pack_into("<HH", out, opt + 48, 4, 0)
    struct.pack_into("<III", out, opt + 56, size_of_image, size_of_headers, 0)
    struct.pack_into("<HH", out, opt + 68, 3, 0)  # console subsystem
    struct.pack_into("<IIIIII", out, opt + 72, 0x100000, 0x1000, 0x100000, 0x1000, 0, 16)

    for i, h in enumerate(headers):
        out[table_off + i * SECTION_HEADER_SIZE:table_off + (i + 1) * SECTION_HEADER_SIZE] = h
    for ptr, body in bodies:
        out[ptr:ptr + len(body)] = body
    out += rng.randbytes(spec.overlay_size)
    return bytes(out)


def loads_spec(text: str) -> PeSpec:
    """Read a spec from ``key = value`` lines.

    Keys are the ``PeSpec`` field names.  ``sections`` may repeat; its value
    is ``name virtual_size raw_size [fill [gap_before]]``.  Integers accept
    any Python literal base (``0x200``).  ``#`` starts a comment.
    """
    spec = PeSpec()
    scalar = {"file_alignment", "section_alignment", "image_base", "seed", "overlay_size"}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (part.strip() for part in line.partition("="))
        if not sep:
            raise InvalidSpec(f"line {lineno}: expected 'key = value'")
        try:
            if key in scalar:
                setattr(spec, key, int(value, 0))
            elif key == "sections":
                name, *nums = value.split()
                if not 2 <= len(nums) <= 4:
                    raise InvalidSpec(f"line {lineno}: sections needs 3 to 5 fields")
                spec.sections.append(SectionSpec(name, *(int(n, 0) for n in nums)))
            else:
                raise InvalidSpec(f"line {lineno}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, InvalidSpec):
                raise
            raise InvalidSpec(f"line {lineno}: {exc}") from None
    check_spec(spec)
    return spec


def load_spec(path: Union[str, Path]) -> PeSpec:
    return loads_spec(Path(path).read_text())


def random_spec(rng: random.Random, max_sections: int = 4) -> PeSpec:
    """A random but valid spec; used for property tests and the acceptance matrix."""
    fa = rng.choice([0x200, 0x200, 0x400, 0x1000])
    sa = max(fa, rng.choice([0x1000, 0x1000, 0x2000]))
    names = [".text", ".rdata", ".data", ".rsrc", ".reloc", ".tls"]
    sections = []
    for name in rng.sample(names, rng.randint(1, max_sections)):
        raw = fa * rng.randint(0, 4)
        vsize = rng.choice([0, raw, max(raw - rng.randint(0, fa), 0), raw + rng.randint(0, fa)])
        if raw == 0:
            vsize = rng.randint(1, 0x3000)
        gap = fa * rng.choice([0, 0, 0, 1])
        sections.append(SectionSpec(name, vsize, raw, rng.choice([0, 0, 0xCC, 0x90]), gap))
    return PeSpec(fa, sa, 0x400000, sections, rng.getrandbits(32), rng.choice([0, 0, 0x37]))
