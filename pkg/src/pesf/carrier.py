"""Slack regions of a PE file: bytes that can change without changing the file size.

Three kinds of padding qualify:

* the tail of a section's raw block past its meaningful length,
* file space between section raw blocks that no section owns,
* the rest of the header area after the section table.

Bytes after the last section (overlay) are never used; writing there would
mean growing the file for any cover that lacks an overlay.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple, Union

from .errors import InsufficientCapacity, RvaNotMapped
from .pe import PeImage, rva_to_offset

# security directory holds a file offset, not an RVA
_SECURITY_DIRECTORY = 4


class RegionKind(str, enum.Enum):
    SECTION_TAIL = "SectionTail"
    INTER_SECTION_GAP = "InterSectionGap"
    HEADER_GAP = "HeaderGap"


@dataclass(frozen=True)
class SlackRegion:
    offset: int
    length: int
    kind: RegionKind
    section_index: Optional[int] = None

    @property
    def end(self) -> int:
        return self.offset + self.length


def _section_tag(name: Union[str, bytes, None]) -> Optional[bytes]:
    if name is None:
        return None
    if isinstance(name, str):
        name = name.encode("latin-1")
    if len(name) > 8:
        raise ValueError(f"section name {name!r} longer than 8 bytes")
    return name.ljust(8, b"\0")


@dataclass(frozen=True)
class CarrierPolicy:
    prefer_section: Optional[bytes] = b".rsrc\0\0\0"
    include_header_gap: bool = True
    include_gaps: bool = True

    def __post_init__(self):
        object.__setattr__(self, "prefer_section", _section_tag(self.prefer_section))


def _subtract(start: int, end: int, holes: Sequence[Tuple[int, int]]) -> List[Tuple[int, int]]:
    """Parts of [start, end) not covered by any hole; ``holes`` sorted by start."""
    out = []
    pos = start
    for h_start, h_end in holes:
        if h_end <= pos or h_start >= end:
            continue
        if h_start > pos:
            out.append((pos, h_start))
        pos = max(pos, h_end)
        if pos >= end:
            break
    if pos < end:
        out.append((pos, end))
    return out


def _directory_ranges(image: PeImage) -> List[Tuple[int, int]]:
    """File ranges referenced by data directories; these must never be overwritten."""
    ranges = []
    for i, (rva, size) in enumerate(image.optional_header.data_directories):
        if not size:
            continue
        if i == _SECURITY_DIRECTORY:
            ranges.append((rva, rva + size))
            continue
        try:
            start = rva_to_offset(image, rva)
        except RvaNotMapped:
            continue
        ranges.append((start, start + size))
    return ranges


def enumerate_slack(image: PeImage, policy: Optional[CarrierPolicy] = None) -> List[SlackRegion]:
    """Embeddable regions in fill order.

    Tails of the preferred section come first, then everything else by
    ascending offset.  The order is a pure function of the headers, so the
    stego file reproduces the cover's layout.
    """
    policy = policy or CarrierPolicy()
    size = len(image.raw)
    table_end = image.header_end
    sections = image.sections
    owned = sorted((s.pointer_to_raw_data, s.raw_end) for s in sections if s.size_of_raw_data)

    protected = [(0, table_end)]
    protected += [(s.pointer_to_raw_data, s.pointer_to_raw_data + s.effective_length)
                  for s in sections if s.size_of_raw_data]
    protected += _directory_ranges(image)
    protected.sort()

    candidates: List[Tuple[int, int, RegionKind, Optional[int]]] = []
    for i, s in enumerate(sections):
        if s.size_of_raw_data and s.effective_length < s.size_of_raw_data:
            candidates.append((s.pointer_to_raw_data + s.effective_length, s.raw_end,
                               RegionKind.SECTION_TAIL, i))
    size_of_headers = image.optional_header.size_of_headers
    if policy.include_header_gap:
        candidates.append((table_end, size_of_headers, RegionKind.HEADER_GAP, None))
    if policy.include_gaps and owned:
        # [size_of_headers, first section) belongs to nobody either
        pos = max(size_of_headers, table_end)
        for start, end in owned:
            if start > pos:
                candidates.append((pos, start, RegionKind.INTER_SECTION_GAP, None))
            pos = max(pos, end)

    regions = []
    claimed: List[Tuple[int, int]] = []
    for start, end, kind, index in candidates:
        end = min(end, size)
        for s, e in _subtract(start, end, sorted(protected + claimed)):
            regions.append(SlackRegion(s, e - s, kind, index))
            claimed.append((s, e))

    def preferred(r: SlackRegion) -> bool:
        return (r.kind is RegionKind.SECTION_TAIL and policy.prefer_section is not None
                and sections[r.section_index].name == policy.prefer_section)

    regions.sort(key=lambda r: (not preferred(r), r.offset))
    return regions


def capacity(regions: Iterable[SlackRegion]) -> int:
    return sum(r.length for r in regions)


def write_scattered(image: PeImage, regions: Sequence[SlackRegion], data: bytes) -> PeImage:
    """Spread ``data`` over ``regions``, filling each left to right before the next."""
    available = capacity(regions)
    if len(data) > available:
        raise InsufficientCapacity(len(data), available)
    buf = bytearray(image.raw)
    pos = 0
    for r in regions:
        if pos >= len(data):
            break
        if r.end > len(buf):
            raise ValueError(f"region at {r.offset:#x} runs past the end of the file")
        chunk = data[pos:pos + r.length]
        buf[r.offset:r.offset + len(chunk)] = chunk
        pos += len(chunk)
    return image.with_raw(bytes(buf))


def read_scattered(image: PeImage, regions: Sequence[SlackRegion], length: int) -> bytes:
    available = capacity(regions)
    if length > available:
        raise InsufficientCapacity(length, available)
    raw = image.raw
    parts = []
    remaining = length
    for r in regions:
        if remaining <= 0:
            break
        take = min(r.length, remaining)
        parts.append(raw[r.offset:r.offset + take])
        remaining -= take
    return b"".join(parts)
