"""Receiver: packets -> masked latent -> InvSCR -> concealment -> image.

Two kinds of missing data are kept apart. Channels at or past the tail
boundary were never sent (progressive truncation) and stay zero, the prior
mean. Channels below it whose packet did not arrive are *lost*; with SCR a
lost rearranged channel leaves a band of unknown rows in each of four
original channels, and the ``interpolate`` policy fills those rows from the
nearest known rows above and below.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from . import codec, entropy
from .container import (TYPE_BASE, BaseLayer, Packet, ParseError, parse_base,
                        parse_packet)
from .latent import (apply_channel_mask, channel_mask_to_elements,
                     mask_inverse, scr_inverse)

POLICIES = ("none", "interpolate")


@dataclasses.dataclass
class ReceivedState:
    base: BaseLayer
    received: frozenset
    tail: int
    mask: np.ndarray
    latent: np.ndarray
    """Assembled latent in transmission order; missing channels are zero."""

    @property
    def transmitted(self) -> np.ndarray:
        return np.arange(self.base.channels) < self.tail

    @property
    def lost(self) -> np.ndarray:
        return self.transmitted & ~self.mask


def _decode_packet(packet: Packet, base: BaseLayer, count: int):
    """Channel values of one payload packet, or ``None`` if it is unusable."""
    if any(c >= base.channels for c in packet.channels):
        return None
    lengths = [base.lengths[c] for c in packet.channels]
    if sum(lengths) != len(packet.payload):
        return None
    out, pos = {}, 0
    for c, n in zip(packet.channels, lengths):
        try:
            out[c] = entropy.decode_channel(packet.payload[pos:pos + n], base.scales[c], count)
        except entropy.DecodeError:
            return None
        pos += n
    return out


def assemble(base_bytes: bytes, packets, tail: int | None = None) -> ReceivedState:
    """Decode whatever payload packets arrived.

    ``packets`` may hold :class:`Packet` objects or serialized packets;
    anything that fails to parse or decode counts as lost. ``tail`` is one
    past the last channel the sender transmitted (default: all channels).
    A corrupt base layer raises :class:`ParseError`.
    """
    base = parse_base(base_bytes)
    _, h, w = codec.latent_dims(base.height, base.width)
    latent = np.zeros((base.channels, h, w), dtype=np.int16)
    mask = np.zeros(base.channels, dtype=bool)
    for item in packets:
        if not isinstance(item, Packet):
            try:
                item = parse_packet(item)
            except ParseError:
                continue
        if item.ptype == TYPE_BASE:
            continue
        decoded = _decode_packet(item, base, h * w)
        if decoded is None:
            continue
        for c, values in decoded.items():
            latent[c] = values.reshape(h, w)
            mask[c] = True
    if tail is None:
        tail = base.channels
    return ReceivedState(base, frozenset(np.flatnonzero(mask).tolist()), tail, mask, latent)


def conceal(latent: np.ndarray, known: np.ndarray, transmitted: np.ndarray,
            policy: str = "interpolate") -> np.ndarray:
    """Fill lost elements (``transmitted & ~known``) of an unrearranged latent.

    ``interpolate`` fills each lost element linearly along its column from
    the nearest known rows above and below, copying the nearest known row
    where only one side exists. Columns without known rows, tail elements
    and known elements are left as they are. ``none`` is plain zero fill.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown concealment policy {policy!r}")
    out = np.where(known, latent, 0).astype(latent.dtype)
    if policy == "none":
        return out
    lost = transmitted & ~known
    rows = np.arange(latent.shape[1])
    for c in np.flatnonzero(lost.any(axis=(1, 2))):
        for j in np.flatnonzero(lost[c].any(axis=0)):
            anchors = known[c, :, j]
            if not anchors.any():
                continue
            holes = lost[c, :, j]
            filled = np.interp(rows[holes], rows[anchors], latent[c, anchors, j].astype(np.float64))
            out[c, holes, j] = np.rint(filled).astype(latent.dtype)
    return out


def element_masks(state: ReceivedState):
    """``(known, transmitted)`` element masks in the original arrangement.

    Channels with scale code 0 are exactly zero by the base layer alone, so
    they count as known even when their packet was lost.
    """
    base = state.base
    dims = state.latent.shape
    known_r = state.mask | (np.asarray(base.scales) == 0)
    expand = mask_inverse if base.scr else channel_mask_to_elements
    return expand(known_r, dims), expand(state.transmitted, dims)


def reconstruct(base_bytes: bytes, packets, policy: str = "interpolate",
                tail: int | None = None) -> np.ndarray:
    state = assemble(base_bytes, packets, tail)
    latent = apply_channel_mask(state.latent, state.mask)
    if state.base.scr:
        latent = scr_inverse(latent)
    known, transmitted = element_masks(state)
    latent = conceal(latent, known, transmitted, policy)
    base = state.base
    return codec.synthesis(latent, (base.height, base.width), codec.preset(base.quality_id))
