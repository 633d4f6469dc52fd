import numpy as np
import pytest

from lrpc import codec, metrics
from lrpc.bitstream import decode_lrpc, encode_image
from lrpc.container import ParseError, serialize_packet
from lrpc.latent import mask_inverse, scr_inverse
from lrpc.receiver import assemble, conceal, element_masks, reconstruct

BMAX = 4500


@pytest.fixture(scope="module")
def small_image():
    rng = np.random.default_rng(5)
    y, x = np.mgrid[0:64, 0:96]
    base = np.stack([x * 2, y * 3, (x + y)], axis=-1) + rng.integers(0, 30, (64, 96, 3))
    return np.clip(base, 0, 255).astype(np.uint8)


@pytest.fixture(scope="module", params=[True, False], ids=["scr", "noscr"])
def encoded(request, small_image):
    return encode_image(small_image, "Q3", scr=request.param)


def test_midpoint():
    latent = np.zeros((1, 4, 1), np.int16)
    latent[0, :, 0] = [5, 10, 0, 30]
    known = np.ones((1, 4, 1), bool)
    known[0, 2, 0] = False
    out = conceal(latent, known, np.ones_like(known), "interpolate")
    assert out[0, :, 0].tolist() == [5, 10, 20, 30]
    assert conceal(latent, known, np.ones_like(known), "none")[0, :, 0].tolist() == [5, 10, 0, 30]


def test_edges_copy_nearest_row():
    latent = np.zeros((1, 4, 1), np.int16)
    latent[0, 1:3, 0] = [7, 9]
    known = np.zeros((1, 4, 1), bool)
    known[0, 1:3, 0] = True
    out = conceal(latent, known, np.ones_like(known), "interpolate")
    assert out[0, :, 0].tolist() == [7, 7, 9, 9]


def test_identity_when_all_known(rng):
    latent = rng.integers(-255, 256, (8, 4, 6)).astype(np.int16)
    ones = np.ones(latent.shape, bool)
    for policy in ("none", "interpolate"):
        assert np.array_equal(conceal(latent, ones, ones, policy), latent)


def test_quad_band_fixture():
    latent = np.arange(64, dtype=np.int16).reshape(4, 4, 4) * 2
    mask_r = np.array([True, False, True, True])
    known = mask_inverse(mask_r, latent.shape)
    damaged = np.where(known, latent, 0)
    out = conceal(damaged, known, np.ones_like(known), "interpolate")
    for q in range(4):
        expect = np.rint((latent[q, 0].astype(float) + latent[q, 2]) / 2)
        assert out[q, 1].tolist() == expect.tolist()
        assert np.array_equal(out[q, [0, 2, 3]], latent[q, [0, 2, 3]])


def test_whole_channel_and_tail_stay_zero(rng):
    latent = rng.integers(-50, 50, (3, 4, 4)).astype(np.int16)
    known = np.ones(latent.shape, bool)
    known[0] = False          # lost entirely
    known[1, 1] = False       # partial
    known[2] = False          # tail
    transmitted = np.ones(latent.shape, bool)
    transmitted[2] = False
    out = conceal(np.where(known, latent, 0), known, transmitted, "interpolate")
    assert not out[0].any()
    assert not out[2].any()
    assert np.array_equal(out[1, [0, 2, 3]], latent[1, [0, 2, 3]])


def test_concealment_never_touches_known(rng):
    latent = rng.integers(-255, 256, (8, 6, 4)).astype(np.int16)
    for _ in range(30):
        known = mask_inverse(rng.random(8) < 0.6, latent.shape)
        out = conceal(np.where(known, latent, 0), known, np.ones_like(known), "interpolate")
        assert np.array_equal(out[known], latent[known])


def test_unknown_policy():
    with pytest.raises(ValueError):
        conceal(np.zeros((1, 2, 2)), np.ones((1, 2, 2), bool), np.ones((1, 2, 2), bool), "magic")


def test_full_reception_is_lossless(encoded):
    packets = encoded.packets(BMAX)
    state = assemble(encoded.base_bytes(), packets)
    assert np.array_equal(state.latent, encoded.latent)
    assert state.mask.all()
    direct = decode_lrpc(encoded.to_bytes())
    for policy in ("none", "interpolate"):
        assert np.array_equal(reconstruct(encoded.base_bytes(), packets, policy), direct)


def test_raw_bytes_accepted(encoded):
    packets = encoded.packets(BMAX)
    raw = [serialize_packet(p) for p in packets]
    assert np.array_equal(reconstruct(encoded.base_bytes(), raw),
                          reconstruct(encoded.base_bytes(), packets))


def test_nothing_received(encoded):
    state = assemble(encoded.base_bytes(), [])
    assert not state.latent.any()
    assert not state.mask.any()
    assert state.received == frozenset()


def test_lost_packet_bookkeeping(encoded):
    packets = [p for p in encoded.packets(900 if not encoded.base.scr else BMAX)]
    payload = [p for p in packets if p.ptype == 1]
    victim = payload[len(payload) // 2]
    state = assemble(encoded.base_bytes(), [p for p in packets if p is not victim])
    assert set(np.flatnonzero(~state.mask)) == set(victim.channels)
    assert np.array_equal(state.lost, ~state.mask)


def test_corrupt_packet_counts_as_lost(encoded):
    packets = encoded.packets(BMAX)
    payload = [p for p in packets if p.ptype == 1]
    raw = [serialize_packet(p) for p in packets]
    idx = packets.index(payload[0])
    raw[idx] = raw[idx][:-5] + bytes([raw[idx][-5] ^ 1]) + raw[idx][-4:]
    state = assemble(encoded.base_bytes(), raw)
    assert not state.mask[list(payload[0].channels)].any()
    assert state.mask[[c for p in payload[1:] for c in p.channels]].all()


def test_corrupt_base_is_fatal(encoded):
    base = bytearray(encoded.base_bytes())
    base[10] ^= 0xFF
    with pytest.raises(ParseError):
        assemble(bytes(base), encoded.packets(BMAX))


def test_tail_versus_loss(encoded):
    packets = encoded.packets(BMAX)
    payload = [p for p in packets if p.ptype == 1]
    base = [p for p in packets if p.ptype == 0]
    for count in range(len(payload) + 1):
        prefix = base + payload[:count]
        tail = max((c for p in payload[:count] for c in p.channels), default=-1) + 1
        a = reconstruct(encoded.base_bytes(), prefix, "none", tail)
        b = reconstruct(encoded.base_bytes(), prefix, "interpolate", tail)
        assert np.array_equal(a, b)


def test_degradation_containment(small_image):
    encoded = encode_image(small_image, "Q3", scr=True)
    packets = encoded.packets(BMAX)
    c, h, w = encoded.latent.shape
    for victim in (p for p in packets if p.ptype == 1):
        state = assemble(encoded.base_bytes(), [p for p in packets if p is not victim])
        known, _ = element_masks(state)
        unknown = (~known).reshape(c, -1).sum(axis=1)
        lost = ~state.mask & (np.asarray(state.base.scales) > 0)
        for g in range(c // 4):
            siblings = lost[4 * g:4 * g + 4].sum()
            assert (unknown[4 * g:4 * g + 4] == siblings * h * w // 4).all()


def test_interpolation_helps_on_dc_band(photo):
    # losing one band of the DC quad: interpolation beats zero fill
    encoded = encode_image(photo, "Q2", scr=True)
    latent = encoded.latent.copy()
    mask = np.ones(192, bool)
    mask[1] = False
    known = mask_inverse(mask, latent.shape)
    damaged = scr_inverse(np.where(mask[:, None, None], latent, 0))
    q = codec.preset("Q2")
    zero = codec.synthesis(conceal(damaged, known, np.ones_like(known), "none"), photo.shape[:2], q)
    interp = codec.synthesis(conceal(damaged, known, np.ones_like(known), "interpolate"),
                             photo.shape[:2], q)
    assert metrics.psnr(photo, interp) > metrics.psnr(photo, zero)
