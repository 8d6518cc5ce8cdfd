"""Wire codec: bit-exact roundtrips, tamper detection, and bit accounting."""

import io
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvmask.errors import (
    ChannelError,
    DimensionMismatch,
    FormatError,
    MvmaskError,
    RangeError,
    TruncationError,
    VersionError,
)
from mvmask.imageio import RasterImage
from mvmask.masking import (
    ActivityMap,
    sample_random,
    sample_unmasked,
    selection_distribution,
)
from mvmask.patch_grid import make_grid
from mvmask.wire import (
    BITS_PER_PIXEL,
    HEADER_BITS,
    HEADER_BYTES,
    bits_per_index,
    comm_report,
    decode,
    decode_plan,
    encode,
    encode_plan,
    index_block_bits,
    read_frames,
    read_header,
    write_frames,
)


def _random_image(width, height, seed):
    rng = np.random.default_rng(seed)
    return RasterImage(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


def _semantic_plan(grid, r, seed, levels=None):
    if levels is None:
        levels = np.arange(grid.patch_count) + 1
    dist = selection_distribution(ActivityMap(np.asarray(levels)), 0.5)
    return sample_unmasked(dist, grid, r, seed)


def test_reference_frame_sizes():
    g = make_grid(640, 360, 20)
    img = _random_image(640, 360, 0)
    plan = _semantic_plan(g, 0.7, 1)
    data = encode(img, plan, camera_id=3, frame_id=12)
    # payload: 173 patches * 400 px * 3 B; index: 576-bit bitmap = 72 B
    assert len(data) == 37 + 72 + 173 * 400 * 3
    assert read_header(data).payload_len == 207_600


def test_roundtrip_restores_plan_and_pixels():
    g = make_grid(640, 360, 20)
    img = _random_image(640, 360, 5)
    plan = _semantic_plan(g, 0.7, 9)
    got_plan, sparse = decode(encode(img, plan))
    assert got_plan == plan
    keep = sparse.known
    assert (sparse.pixels[keep] == img.pixels[: 360, : 640][keep]).all()
    assert (sparse.pixels[~keep] == 0).all()
    assert int(keep.sum()) == plan.unmasked_count * 400


def test_random_mode_carries_no_index_and_regenerates():
    g = make_grid(640, 360, 20)
    img = _random_image(640, 360, 2)
    plan = sample_random(g, 0.7, 42)
    data = encode(img, plan)
    hdr = read_header(data)
    assert hdr.index_len == 0
    assert len(data) == HEADER_BYTES + 173 * 1200
    got_plan, sparse = decode(data)
    assert got_plan == plan
    assert (sparse.pixels[sparse.known] == img.pixels[sparse.known]).all()


def test_full_masking_is_header_only():
    g = make_grid(640, 360, 20)
    img = _random_image(640, 360, 3)
    for plan in (sample_random(g, 1.0, 7), _semantic_plan(g, 1.0, 7)):
        data = encode(img, plan)
        assert len(data) == HEADER_BYTES == 37
        got_plan, sparse = decode(data)
        assert got_plan == plan
        assert not sparse.known.any()


def test_semantic_vs_random_size_difference_is_the_index_block():
    g = make_grid(640, 360, 20)
    img = _random_image(640, 360, 4)
    sem = encode(img, _semantic_plan(g, 0.7, 11))
    rnd = encode(img, sample_random(g, 0.7, 11))
    # same S, same payload; semantic adds the byte-padded index block
    assert len(sem) - len(rnd) == 72
    assert index_block_bits(_semantic_plan(g, 0.7, 11)) == min(576, 173 * 10) == 576
    assert index_block_bits(sample_random(g, 0.7, 11)) == 0


def test_packed_indices_win_when_sparse():
    # S = 10 of N = 576: packed needs 100 bits (13 B) < 72 B bitmap
    g = make_grid(640, 360, 20)
    plan = _semantic_plan(g, 0.983, 1)
    assert plan.unmasked_count == 10
    assert bits_per_index(576) == 10
    assert index_block_bits(plan) == 100
    data = encode(_random_image(640, 360, 6), plan)
    assert read_header(data).index_len == 13
    assert decode_plan(data) == plan


def test_bits_per_index_edge_values():
    assert bits_per_index(1) == 1
    assert bits_per_index(2) == 1
    assert bits_per_index(3) == 2
    assert bits_per_index(576) == 10
    assert bits_per_index(1024) == 10
    assert bits_per_index(1025) == 11


def test_plan_only_frames():
    g = make_grid(640, 360, 20)
    plan = _semantic_plan(g, 0.7, 8)
    data = encode_plan(plan, camera_id=2, frame_id=5)
    hdr = read_header(data)
    assert hdr.plan_only and hdr.payload_len == 0
    assert hdr.camera_id == 2 and hdr.frame_id == 5
    got_plan, sparse = decode(data)
    assert got_plan == plan
    assert not sparse.known.any()
    assert (sparse.pixels == 0).all()


def test_truncation_error_names_missing_bytes():
    g = make_grid(60, 60, 20)
    data = encode(_random_image(60, 60, 0), sample_random(g, 0.5, 1))
    with pytest.raises(TruncationError, match="missing 7 bytes"):
        decode(data[:-7])
    with pytest.raises(TruncationError, match="needs 37 bytes, have 10"):
        decode(data[:10])


def test_trailing_garbage_rejected():
    g = make_grid(60, 60, 20)
    data = encode(_random_image(60, 60, 0), sample_random(g, 0.5, 1))
    with pytest.raises(FormatError, match="trailing"):
        decode(data + b"\x00")


def test_version_and_magic_rejection():
    g = make_grid(60, 60, 20)
    data = bytearray(encode(_random_image(60, 60, 0), sample_random(g, 0.5, 1)))
    bad_magic = bytes(data)
    with pytest.raises(VersionError):
        decode(b"XXXX" + bad_magic[4:])
    bumped = bytearray(bad_magic)
    bumped[4] = 2
    with pytest.raises(VersionError):
        decode(bytes(bumped))


def test_unknown_flag_bits_rejected():
    g = make_grid(60, 60, 20)
    data = bytearray(encode(_random_image(60, 60, 0), sample_random(g, 0.5, 1)))
    data[5] |= 0x10
    with pytest.raises(FormatError, match="flag"):
        decode(bytes(data))


def test_encode_rejects_bad_inputs():
    g = make_grid(60, 60, 20)
    plan = sample_random(g, 0.5, 1)
    gray = RasterImage(np.zeros((60, 60), dtype=np.uint8))
    with pytest.raises(ChannelError):
        encode(gray, plan)
    with pytest.raises(DimensionMismatch):
        encode(_random_image(40, 40, 0), plan)
    with pytest.raises(RangeError):
        encode(_random_image(60, 60, 0), plan, camera_id=1 << 16)
    with pytest.raises(RangeError):
        encode(_random_image(60, 60, 0), plan, frame_id=-1)


def _decode_state(data):
    try:
        plan, sparse = decode(data)
        hdr = read_header(data)
    except MvmaskError:
        return None
    return (
        plan,
        sparse.pixels.tobytes(),
        sparse.known.tobytes(),
        hdr.camera_id,
        hdr.frame_id,
    )


@pytest.mark.parametrize("mode", ["random", "semantic", "packed", "plan-only"])
def test_every_flipped_byte_is_detected_or_changes_the_result(mode):
    g = make_grid(60, 60, 20)  # N = 9, small enough for an exhaustive sweep
    img = _random_image(60, 60, 13)
    if mode == "random":
        data = encode(img, sample_random(g, 0.5, 3), camera_id=1, frame_id=2)
    elif mode == "semantic":
        data = encode(img, _semantic_plan(g, 0.5, 3), camera_id=1, frame_id=2)
    elif mode == "packed":
        # S = 1 of 9: 4 packed bits beat the 9-bit bitmap
        data = encode(img, _semantic_plan(g, 0.9, 3), camera_id=1, frame_id=2)
    else:
        data = encode_plan(_semantic_plan(g, 0.5, 3), camera_id=1, frame_id=2)
    baseline = _decode_state(data)
    assert baseline is not None
    for pos in range(len(data)):
        for pattern in (0x01, 0xFF):
            mutated = bytearray(data)
            mutated[pos] ^= pattern
            state = _decode_state(bytes(mutated))
            assert state is None or state != baseline, (
                f"undetected byte flip at offset {pos} pattern {pattern:#x}"
            )


def test_payload_formula_holds_for_random_shapes():
    rng = np.random.default_rng(99)
    for _ in range(60):
        p = int(rng.integers(1, 12))
        cols = int(rng.integers(1, 9))
        rows = int(rng.integers(1, 9))
        w = cols * p + int(rng.integers(0, p))
        h = rows * p + int(rng.integers(0, p))
        g = make_grid(w, h, p)
        r = float(rng.integers(0, 1001)) / 1000
        plan = sample_random(g, r, int(rng.integers(0, 2**32)))
        img = _random_image(w, h, int(rng.integers(0, 2**32)))
        data = encode(img, plan)
        payload = read_header(data).payload_len
        assert payload * 8 == plan.unmasked_count * p * p * BITS_PER_PIXEL
        assert decode(data)[0] == plan


@settings(max_examples=60, deadline=None)
@given(
    p=st.integers(2, 10),
    cols=st.integers(1, 7),
    rows=st.integers(1, 7),
    r=st.sampled_from([0.0, 0.3, 0.7, 1.0]),
    seed=st.integers(0, 2**64 - 1),
    semantic=st.booleans(),
    img_seed=st.integers(0, 2**32 - 1),
)
def test_roundtrip_fuzz(p, cols, rows, r, seed, semantic, img_seed):
    g = make_grid(cols * p, rows * p, p)
    img = _random_image(cols * p, rows * p, img_seed)
    if semantic:
        levels = np.random.default_rng(img_seed).integers(0, 50, g.patch_count)
        plan = _semantic_plan(g, r, seed, levels)
    else:
        plan = sample_random(g, r, seed)
    got_plan, sparse = decode(encode(img, plan))
    assert got_plan == plan
    assert (sparse.pixels[sparse.known] == img.pixels[sparse.known]).all()
    assert (sparse.pixels[~sparse.known] == 0).all()


def test_comm_report_reference_numbers():
    g = make_grid(640, 360, 20)
    plans = [sample_random(g, 0.7, s) for s in range(7)]
    rep = comm_report(plans, original_size=(1280, 720))
    assert rep.payload_bits == 11_625_600
    assert rep.total_bits == 11_625_600
    assert rep.megabits == pytest.approx(11.6256)
    assert rep.baseline_full_bits == 154_828_800
    assert rep.reduction_factor == Fraction(154_828_800, 11_625_600)
    assert float(rep.reduction_factor) == pytest.approx(13.3179, abs=5e-5)

    rep6 = comm_report(plans[:6], original_size=(1280, 720))
    assert rep6.total_bits == 9_964_800
    assert rep6.baseline_full_bits == 132_710_400


def test_comm_report_default_baseline_doubles_plan_dims():
    g = make_grid(640, 360, 20)
    rep = comm_report([sample_random(g, 0.7, 0)])
    assert rep.baseline_full_bits == 1280 * 720 * 24


def test_comm_report_include_policy_adds_exact_overheads():
    g = make_grid(640, 360, 20)
    plans = [_semantic_plan(g, 0.7, s) for s in range(3)]
    bare = comm_report(plans, header_policy="payload-only")
    full = comm_report(plans, header_policy="include")
    assert bare.total_bits == 3 * 173 * 400 * BITS_PER_PIXEL
    assert full.header_bits == 3 * HEADER_BITS
    assert full.index_bits == 3 * 576
    assert full.total_bits == bare.total_bits + full.header_bits + full.index_bits
    # both report the same split, only the total differs
    assert bare.header_bits == full.header_bits
    assert bare.index_bits == full.index_bits


def test_comm_report_zero_total_has_no_reduction():
    g = make_grid(640, 360, 20)
    rep = comm_report([sample_random(g, 1.0, 0)])
    assert rep.total_bits == 0
    assert rep.reduction_factor is None


def test_comm_report_rejects_empty_and_bad_policy():
    with pytest.raises(DimensionMismatch):
        comm_report([])
    g = make_grid(60, 60, 20)
    with pytest.raises(RangeError):
        comm_report([sample_random(g, 0.5, 0)], header_policy="sometimes")


def test_container_roundtrip():
    g = make_grid(60, 60, 20)
    frames = [
        encode(_random_image(60, 60, s), sample_random(g, 0.5, s), camera_id=s)
        for s in range(4)
    ]
    buf = io.BytesIO()
    assert write_frames(buf, frames) == 4
    buf.seek(0)
    assert list(read_frames(buf)) == frames


def test_container_truncation():
    g = make_grid(60, 60, 20)
    frame = encode(_random_image(60, 60, 0), sample_random(g, 0.5, 0))
    buf = io.BytesIO()
    write_frames(buf, [frame])
    whole = buf.getvalue()
    with pytest.raises(TruncationError, match="missing 3 bytes"):
        list(read_frames(io.BytesIO(whole[:-3])))
    with pytest.raises(TruncationError, match="length cut short"):
        list(read_frames(io.BytesIO(whole[:2])))
    assert list(read_frames(io.BytesIO(b""))) == []
