"""Lossless parser for 32-bit Portable Executable files.

Only the fields needed for section layout and address arithmetic are
modelled.  Everything else (DOS stub, data directories, debug data, the
overlay) stays in ``PeImage.raw`` untouched, which is what makes
``serialize(parse(b)) == b`` hold for every accepted input.

Layout reference: https://learn.microsoft.com/en-us/windows/win32/debug/pe-format
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

from .errors import (
    MalformedSectionTable,
    NotMz,
    NotPe,
    OffsetNotMapped,
    RvaNotMapped,
    Truncated,
    UnsupportedPe32Plus,
)

MZ_MAGIC = 0x5A4D
PE_SIGNATURE = b"PE\0\0"
PE32_MAGIC = 0x10B
PE32PLUS_MAGIC = 0x20B

DOS_HEADER_SIZE = 64
COFF_HEADER_SIZE = 20
SECTION_HEADER_SIZE = 40
# ImageBase .. NumberOfRvaAndSizes; data directories start right after
PE32_OPTIONAL_FIXED_SIZE = 96

_COFF = struct.Struct("<HHIIIHH")
_SECTION = struct.Struct("<8sIIIIIIHHI")
_DATA_DIR = struct.Struct("<II")


@dataclass(frozen=True)
class DosHeader:
    e_magic: int
    e_lfanew: int


@dataclass(frozen=True)
class CoffHeader:
    machine: int
    number_of_sections: int
    time_date_stamp: int
    size_of_optional_header: int
    characteristics: int


@dataclass(frozen=True)
class OptionalHeader:
    magic: int
    address_of_entry_point: int
    image_base: int
    section_alignment: int
    file_alignment: int
    size_of_image: int
    size_of_headers: int
    checksum: int
    # (rva, size) pairs; kept for reference only, never rewritten
    data_directories: Tuple[Tuple[int, int], ...] = ()


@dataclass(frozen=True)
class SectionHeader:
    name: bytes
    virtual_size: int
    virtual_address: int
    size_of_raw_data: int
    pointer_to_raw_data: int
    characteristics: int

    @property
    def label(self) -> str:
        return self.name.rstrip(b"\0").decode("latin-1")

    @property
    def effective_length(self) -> int:
        """Bytes of raw data that carry meaning; the rest is alignment padding."""
        if self.virtual_size == 0:
            return self.size_of_raw_data
        return min(self.virtual_size, self.size_of_raw_data)

    @property
    def raw_end(self) -> int:
        return self.pointer_to_raw_data + self.size_of_raw_data


@dataclass(frozen=True)
class PeImage:
    dos_header: DosHeader
    pe_signature: bytes
    coff_header: CoffHeader
    optional_header: OptionalHeader
    sections: Tuple[SectionHeader, ...]
    raw: bytes = field(repr=False)

    @property
    def section_table_offset(self) -> int:
        return (self.dos_header.e_lfanew + 4 + COFF_HEADER_SIZE
                + self.coff_header.size_of_optional_header)

    @property
    def header_end(self) -> int:
        """First byte past the section table."""
        return self.section_table_offset + SECTION_HEADER_SIZE * len(self.sections)

    @property
    def image_base(self) -> int:
        return self.optional_header.image_base

    def va_to_rva(self, va: int) -> int:
        return va - self.image_base

    def rva_to_va(self, rva: int) -> int:
        return self.image_base + rva

    def with_raw(self, raw: bytes) -> "PeImage":
        """Same headers, different buffer.  Caller guarantees headers are unchanged."""
        if len(raw) != len(self.raw):
            raise ValueError("replacement buffer must keep the original size")
        return replace(self, raw=bytes(raw))


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass
class ValidationReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def kinds(self) -> List[str]:
        return [v.kind for v in self.violations]

    def __bool__(self) -> bool:
        return self.valid

    def __iter__(self):
        return iter(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _need(data: bytes, end: int, what: str) -> None:
    if end > len(data):
        raise Truncated(f"{what} ends at {end:#x}, buffer is {len(data):#x} bytes")


def parse(data: bytes, *, strict: bool = True) -> PeImage:
    """Parse a 32-bit PE file.

    With ``strict`` (the default) every structural invariant is enforced and
    a violation raises.  ``strict=False`` only guarantees the headers and
    section table lie inside the buffer; use ``validate`` to list the rest.
    """
    data = bytes(data)
    if len(data) < 2:
        raise Truncated("buffer too small for an MZ header")
    (e_magic,) = struct.unpack_from("<H", data, 0)
    if e_magic != MZ_MAGIC:
        raise NotMz(f"bad DOS magic {e_magic:#06x}")
    _need(data, DOS_HEADER_SIZE, "DOS header")
    (e_lfanew,) = struct.unpack_from("<I", data, 0x3C)
    _need(data, e_lfanew + 4, "PE signature")
    signature = data[e_lfanew:e_lfanew + 4]
    if signature != PE_SIGNATURE:
        raise NotPe(f"bad PE signature {signature!r} at {e_lfanew:#x}")

    coff_off = e_lfanew + 4
    _need(data, coff_off + COFF_HEADER_SIZE, "COFF header")
    machine, nsec, stamp, _symptr, _nsyms, opt_size, chars = _COFF.unpack_from(data, coff_off)
    coff = CoffHeader(machine, nsec, stamp, opt_size, chars)

    opt_off = coff_off + COFF_HEADER_SIZE
    _need(data, opt_off + opt_size, "optional header")
    if opt_size < 2:
        raise NotPe("missing optional header")
    (opt_magic,) = struct.unpack_from("<H", data, opt_off)
    if opt_magic == PE32PLUS_MAGIC:
        raise UnsupportedPe32Plus("PE32+ (64-bit) images are not supported")
    if opt_magic != PE32_MAGIC:
        raise NotPe(f"unknown optional header magic {opt_magic:#06x}")
    if opt_size < PE32_OPTIONAL_FIXED_SIZE:
        raise NotPe(f"optional header too small ({opt_size} bytes)")

    (entry,) = struct.unpack_from("<I", data, opt_off + 16)
    image_base, sect_align, file_align = struct.unpack_from("<III", data, opt_off + 28)
    size_of_image, size_of_headers, checksum = struct.unpack_from("<III", data, opt_off + 56)
    (n_dirs,) = struct.unpack_from("<I", data, opt_off + 92)
    n_dirs = min(n_dirs, (opt_size - PE32_OPTIONAL_FIXED_SIZE) // _DATA_DIR.size)
    dirs = tuple(
        _DATA_DIR.unpack_from(data, opt_off + PE32_OPTIONAL_FIXED_SIZE + i * _DATA_DIR.size)
        for i in range(n_dirs)
    )
    opt = OptionalHeader(opt_magic, entry, image_base, sect_align, file_align,
                         size_of_image, size_of_headers, checksum, dirs)

    table_off = opt_off + opt_size
    _need(data, table_off + nsec * SECTION_HEADER_SIZE, "section table")
    sections = []
    for i in range(nsec):
        name, vsize, va, raw_size, raw_ptr, _r, _l, _nr, _nl, sch = _SECTION.unpack_from(
            data, table_off + i * SECTION_HEADER_SIZE)
        sections.append(SectionHeader(name, vsize, va, raw_size, raw_ptr, sch))

    image = PeImage(DosHeader(e_magic, e_lfanew), signature, coff, opt, tuple(sections), data)
    if strict:
        report = validate(image)
        if report.violations:
            first = report.violations[0]
            exc = NotPe if first.kind == "BadAlignment" else MalformedSectionTable
            raise exc(str(first))
    return image


def serialize(image: PeImage) -> bytes:
    return bytes(image.raw)


def validate(image: PeImage) -> ValidationReport:
    """Check every structural invariant without raising."""
    out: List[Violation] = []
    add = lambda kind, msg: out.append(Violation(kind, msg))  # noqa: E731

    if image.dos_header.e_magic != MZ_MAGIC:
        add("BadMzMagic", f"e_magic is {image.dos_header.e_magic:#06x}")
    if image.pe_signature != PE_SIGNATURE:
        add("BadPeSignature", f"signature is {image.pe_signature!r}")
    if len(image.sections) != image.coff_header.number_of_sections:
        add("SectionCountMismatch",
            f"{len(image.sections)} sections, header says {image.coff_header.number_of_sections}")

    fa = image.optional_header.file_alignment
    sa = image.optional_header.section_alignment
    aligned = _is_pow2(fa) and _is_pow2(sa)
    if not aligned:
        add("BadAlignment", f"alignments must be powers of two (file {fa:#x}, section {sa:#x})")
    elif sa < fa:
        add("BadAlignment", f"section alignment {sa:#x} below file alignment {fa:#x}")

    size = len(image.raw)
    table_end = image.header_end
    with_data = []
    for i, s in enumerate(image.sections):
        if s.size_of_raw_data == 0:
            continue
        if aligned and s.pointer_to_raw_data % fa:
            add("MisalignedSection",
                f"section {i} ({s.label}) starts at {s.pointer_to_raw_data:#x}, "
                f"not a multiple of {fa:#x}")
        if s.raw_end > size:
            add("SectionOutOfBounds",
                f"section {i} ({s.label}) ends at {s.raw_end:#x}, file is {size:#x} bytes")
        if s.pointer_to_raw_data < table_end:
            add("SectionOverlapsHeaders",
                f"section {i} ({s.label}) starts at {s.pointer_to_raw_data:#x}, "
                f"inside the headers ending at {table_end:#x}")
        with_data.append((s.pointer_to_raw_data, s.raw_end, i))

    with_data.sort()
    for (_, end_a, a), (start_b, _, b) in zip(with_data, with_data[1:]):
        if start_b < end_a:
            add("OverlappingSections", f"sections {a} and {b} overlap in file space")
    return ValidationReport(out)


def rva_to_offset(image: PeImage, rva: int) -> int:
    """File offset holding the byte at ``rva``.

    RVAs in a section's zero-filled virtual tail have no file backing and
    raise ``RvaNotMapped`` like any other unmapped address.
    """
    if 0 <= rva < image.optional_header.size_of_headers:
        return rva
    s = _section_for_rva(image, rva)
    if s is None:
        raise RvaNotMapped(f"RVA {rva:#x} is not backed by file data")
    return s.pointer_to_raw_data + (rva - s.virtual_address)


def offset_to_rva(image: PeImage, offset: int) -> int:
    if 0 <= offset < image.optional_header.size_of_headers:
        return offset
    for s in image.sections:
        if s.size_of_raw_data and s.pointer_to_raw_data <= offset < s.raw_end:
            return s.virtual_address + (offset - s.pointer_to_raw_data)
    raise OffsetNotMapped(f"file offset {offset:#x} belongs to no header or section")


def _section_for_rva(image: PeImage, rva: int) -> Optional[SectionHeader]:
    for s in image.sections:
        span = max(s.virtual_size, s.size_of_raw_data)
        if s.virtual_address <= rva < s.virtual_address + span:
            if rva - s.virtual_address < s.size_of_raw_data:
                return s
            return None
    return None
