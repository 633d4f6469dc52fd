"""Image <-> ``.lrpc`` bitstream: analysis, SCR, scale table, channel coding."""

from __future__ import annotations

import dataclasses

import numpy as np

from . import codec, entropy
from .container import (DEFAULT_BMAX, BaseLayer, build_packets, packetize,
                        read_lrpc, write_base, write_lrpc)
from .latent import scr_forward, scr_inverse


@dataclasses.dataclass
class Encoded:
    base: BaseLayer
    payloads: list[bytes]
    estimates: list[int]
    latent: np.ndarray
    """Quantized latent in transmission order (rearranged when SCR is on)."""

    def to_bytes(self) -> bytes:
        return write_lrpc(self.base, self.payloads)

    def base_bytes(self) -> bytes:
        return write_base(self.base)

    def plan(self, bmax: int = DEFAULT_BMAX):
        return packetize(self.estimates, [len(p) for p in self.payloads], bmax, self.base.scr)

    def packets(self, bmax: int = DEFAULT_BMAX):
        return build_packets(self.base_bytes(), self.payloads, self.plan(bmax), bmax)


def encode_image(image: np.ndarray, quality, scr: bool = True) -> Encoded:
    q = codec.preset(quality)
    latent, _ = codec.analysis(image, q)
    if scr:
        latent = scr_forward(latent)
    scales, payloads, estimates = [], [], []
    for channel in latent:
        code = entropy.estimate_scale(channel)
        scales.append(code)
        payloads.append(entropy.encode_channel(channel, code))
        estimates.append(entropy.estimate_size(channel, code))
    height, width = image.shape[:2]
    base = BaseLayer(width, height, q.quality_id, scr, tuple(scales),
                     tuple(len(p) for p in payloads))
    return Encoded(base, payloads, estimates, latent)


def decode_channels(base: BaseLayer, payloads) -> np.ndarray:
    """Entropy-decode every channel; result is in transmission order."""
    _, h, w = codec.latent_dims(base.height, base.width)
    latent = np.zeros((base.channels, h, w), dtype=np.int16)
    for c, (code, payload) in enumerate(zip(base.scales, payloads)):
        latent[c] = entropy.decode_channel(payload, code, h * w).reshape(h, w)
    return latent


def decode_lrpc(data: bytes) -> np.ndarray:
    """Decode a complete ``.lrpc`` file to an ``(H, W, 3)`` uint8 image."""
    base, payloads = read_lrpc(data)
    latent = decode_channels(base, payloads)
    if base.scr:
        latent = scr_inverse(latent)
    return codec.synthesis(latent, (base.height, base.width), codec.preset(base.quality_id))


def load_encoded(data: bytes) -> Encoded:
    """Rebuild an :class:`Encoded` from a ``.lrpc`` file; size estimates come from the decoded values."""
    base, payloads = read_lrpc(data)
    latent = decode_channels(base, payloads)
    estimates = [entropy.estimate_size(ch, code) for ch, code in zip(latent, base.scales)]
    return Encoded(base, list(payloads), estimates, latent)
