import random

import pytest
from hypothesis import given, settings, strategies as st

from pesf import carrier, corpus, pe
from pesf.carrier import CarrierPolicy, RegionKind, SlackRegion
from pesf.corpus import PeSpec, SectionSpec
from pesf.errors import InsufficientCapacity

from conftest import coverage_slack, trailing_fill

NO_HEADER = CarrierPolicy(include_header_gap=False)


def regions_of(spec, policy=None):
    return carrier.enumerate_slack(pe.parse(corpus.synthesize_pe(spec)), policy)


def test_single_section_tail():
    spec = PeSpec(sections=[SectionSpec(".text", 0x300, 0x400, 0x90)])
    data = corpus.synthesize_pe(spec)
    img = pe.parse(data)
    (r,) = carrier.enumerate_slack(img, NO_HEADER)
    assert (r.kind, r.length, r.section_index) == (RegionKind.SECTION_TAIL, 0x100, 0)
    s = img.sections[0]
    assert trailing_fill(data, s.pointer_to_raw_data, s.size_of_raw_data, 0x90) == r.length
    assert r.offset == s.raw_end - r.length


def test_no_padding():
    assert regions_of(PeSpec(sections=[SectionSpec(".text", 0x400, 0x400)]), NO_HEADER) == []


def test_virtual_size_zero_means_no_tail():
    assert regions_of(PeSpec(sections=[SectionSpec(".text", 0, 0x400)]), NO_HEADER) == []


def test_gap_between_sections():
    spec = PeSpec(sections=[SectionSpec(".text", 0x400, 0x400),
                            SectionSpec(".data", 0x200, 0x200, gap_before=0x200)])
    data = corpus.synthesize_pe(spec)
    (r,) = carrier.enumerate_slack(pe.parse(data), NO_HEADER)
    assert (r.kind, r.length) == (RegionKind.INTER_SECTION_GAP, 0x200)
    assert set(range(r.offset, r.end)) == coverage_slack(data) - set(range(0x200))


def test_header_gap():
    spec = PeSpec(sections=[SectionSpec(".text", 0x400, 0x400)])
    img = pe.parse(corpus.synthesize_pe(spec))
    (r,) = carrier.enumerate_slack(img)
    assert r.kind is RegionKind.HEADER_GAP
    assert (r.offset, r.end) == (img.header_end, img.optional_header.size_of_headers)


def test_policy_switches():
    spec = PeSpec(sections=[SectionSpec(".text", 0x300, 0x400),
                            SectionSpec(".data", 0x200, 0x200, gap_before=0x200)])
    kinds = {r.kind for r in regions_of(spec, CarrierPolicy(include_gaps=False))}
    assert RegionKind.INTER_SECTION_GAP not in kinds
    assert RegionKind.HEADER_GAP in kinds


def test_preferred_section_first():
    spec = PeSpec(sections=[SectionSpec(".text", 0x300, 0x400),
                            SectionSpec(".rsrc", 0x100, 0x200)])
    regions = regions_of(spec)
    assert regions[0].kind is RegionKind.SECTION_TAIL and regions[0].section_index == 1
    rest = [r.offset for r in regions[1:]]
    assert rest == sorted(rest)
    plain = regions_of(spec, CarrierPolicy(prefer_section=None))
    assert [r.offset for r in plain] == sorted(r.offset for r in plain)
    assert sorted(plain, key=lambda r: r.offset) == sorted(regions, key=lambda r: r.offset)


def test_str_and_bytes_section_names_agree():
    assert CarrierPolicy(prefer_section=".rsrc") == CarrierPolicy(prefer_section=b".rsrc")


def test_overlay_never_used():
    spec = PeSpec(sections=[SectionSpec(".text", 0x300, 0x400)], overlay_size=0x300)
    data = corpus.synthesize_pe(spec)
    img = pe.parse(data)
    last = img.sections[-1].raw_end
    assert all(r.end <= last for r in carrier.enumerate_slack(img))


def test_data_directory_bytes_protected():
    import struct
    spec = PeSpec(sections=[SectionSpec(".text", 0x300, 0x400)])
    data = bytearray(corpus.synthesize_pe(spec))
    img = pe.parse(bytes(data))
    # point the bound-import directory (index 11) at the start of the header gap
    opt = img.dos_header.e_lfanew + 24
    struct.pack_into("<II", data, opt + 96 + 11 * 8, img.header_end, 0x20)
    img = pe.parse(bytes(data))
    regions = carrier.enumerate_slack(img)
    assert all(r.offset >= img.header_end + 0x20 or r.end <= img.header_end for r in regions)
    assert carrier.capacity(regions) == len(coverage_slack(bytes(data))) - 0x20


def test_capacity_arithmetic():
    assert carrier.capacity([]) == 0
    regions = [SlackRegion(0x100, 0x100, RegionKind.SECTION_TAIL, 0),
               SlackRegion(0x400, 0x200, RegionKind.INTER_SECTION_GAP)]
    assert carrier.capacity(regions) == 0x300


def test_capacity_matches_coverage_scan(random_covers):
    for data in random_covers:
        img = pe.parse(data)
        regions = carrier.enumerate_slack(img)
        offsets = [o for r in regions for o in range(r.offset, r.end)]
        assert len(offsets) == len(set(offsets))  # disjoint
        assert set(offsets) == coverage_slack(data)
        assert carrier.capacity(regions) == len(offsets)
        for r in regions:
            assert r.length > 0 and r.end <= len(data)


def test_write_empty_is_identity(simple_cover):
    img = pe.parse(simple_cover)
    out = carrier.write_scattered(img, carrier.enumerate_slack(img), b"")
    assert out.raw == simple_cover


def test_write_two_regions_byte_diff(simple_cover):
    img = pe.parse(simple_cover)
    a, b = 0x500, 0x900
    regions = [SlackRegion(a, 0x100, RegionKind.SECTION_TAIL, 0),
               SlackRegion(b, 0x200, RegionKind.SECTION_TAIL, 1)]
    data = bytes((i * 7 + 3) % 251 for i in range(0x150))
    out = carrier.write_scattered(img, regions, data).raw
    assert len(out) == len(simple_cover)
    assert out[a:a + 0x100] == data[:0x100]
    assert out[b:b + 0x50] == data[0x100:]
    touched = set(range(a, a + 0x100)) | set(range(b, b + 0x50))
    for off in range(len(out)):
        if off not in touched:
            assert out[off] == simple_cover[off]


def test_capacity_bounds(simple_cover):
    img = pe.parse(simple_cover)
    regions = carrier.enumerate_slack(img)
    cap = carrier.capacity(regions)
    with pytest.raises(InsufficientCapacity):
        carrier.write_scattered(img, regions, bytes(cap + 1))
    with pytest.raises(InsufficientCapacity):
        carrier.read_scattered(img, regions, cap + 1)
    assert carrier.read_scattered(img, regions, 0) == b""
    carrier.write_scattered(img, regions, bytes(cap))


def test_patched_files_stay_valid(random_covers):
    for data in random_covers:
        img = pe.parse(data)
        regions = carrier.enumerate_slack(img)
        noise = random.Random(len(data)).randbytes(carrier.capacity(regions))
        out = carrier.write_scattered(img, regions, noise)
        assert pe.validate(pe.parse(out.raw)).valid


@st.composite
def regions_and_data(draw):
    data = corpus.synthesize_pe(corpus.random_spec(random.Random(draw(st.integers(0, 10**6)))))
    img = pe.parse(data)
    regions = carrier.enumerate_slack(img)
    cap = carrier.capacity(regions)
    if regions and draw(st.booleans()):
        regions = draw(st.permutations(regions))
    payload = draw(st.binary(max_size=cap))
    return img, regions, payload


@settings(max_examples=100, deadline=None)
@given(regions_and_data())
def test_read_inverts_write(case):
    img, regions, payload = case
    out = carrier.write_scattered(img, regions, payload)
    assert len(out.raw) == len(img.raw)
    assert carrier.read_scattered(out, regions, len(payload)) == payload
    slack = {o for r in regions for o in range(r.offset, r.end)}
    assert all(o in slack for o in range(len(img.raw)) if out.raw[o] != img.raw[o])
