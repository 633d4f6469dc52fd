"""Latent grids, loss masks and the spatial-channel rearrangement (SCR).

A latent is a ``(C, h, w)`` integer array. Channels are grouped into quads of
four consecutive channels; SCR gathers the four values a quad holds at one
spatial position into a 2x2 grid and lays those grids out, in raster order,
across the quad's four rearranged channels. Losing one rearranged channel
therefore costs each member of the quad one contiguous quarter of its
positions instead of one channel losing everything.

Trailing channels (``C % 4``) pass through unchanged.
"""

from __future__ import annotations

import numpy as np

QUAD = 4
VALUE_MIN = -255
VALUE_MAX = 255


class DimensionError(ValueError):
    pass


def quad_of(channel: int) -> int:
    return channel // QUAD


def _split(latent: np.ndarray) -> tuple[int, int, int, int]:
    if latent.ndim != 3:
        raise DimensionError(f"expected a (C, h, w) latent, got shape {latent.shape}")
    c, h, w = latent.shape
    if h % 2 or w % 2:
        raise DimensionError(f"SCR needs even latent dims, got h={h}, w={w}")
    return c, h, w, c // QUAD


def scr_forward(latent: np.ndarray) -> np.ndarray:
    """Rearrange every full quad of ``latent``; returns a new array."""
    c, h, w, quads = _split(latent)
    out = latent.copy()
    if quads == 0:
        return out
    n = quads * QUAD
    # source index: [g, qy, qx, s, a, b] with q = 2*qy + qx, raster position
    # n = s*N/4 + a*(w/2) + b; destination channel 4g+s, pixel (2a+qy, 2b+qx)
    src = latent[:n].reshape(quads, 2, 2, QUAD, h // 2, w // 2)
    out[:n] = src.transpose(0, 3, 4, 1, 5, 2).reshape(n, h, w)
    return out


def scr_inverse(latent_r: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`scr_forward`."""
    c, h, w, quads = _split(latent_r)
    out = latent_r.copy()
    if quads == 0:
        return out
    n = quads * QUAD
    grid = latent_r[:n].reshape(quads, QUAD, h // 2, 2, w // 2, 2)
    out[:n] = grid.transpose(0, 3, 5, 1, 2, 4).reshape(n, h, w)
    return out


def mask_inverse(mask_r, dims: tuple[int, int, int]) -> np.ndarray:
    """Map a per-channel mask of rearranged channels to an element mask.

    ``mask_r[k]`` true means rearranged channel ``k`` was received. For a
    rearranged channel ``4g + s`` the covered elements are raster positions
    ``[s*N/4, (s+1)*N/4)`` of all four original channels of quad ``g``.
    Passthrough channels map one to one.
    """
    c, h, w = dims
    mask_r = np.asarray(mask_r, dtype=bool)
    if mask_r.shape != (c,):
        raise DimensionError(f"mask length {mask_r.shape} does not match C={c}")
    if h % 2 or w % 2:
        raise DimensionError(f"SCR needs even latent dims, got h={h}, w={w}")
    quads = c // QUAD
    n = quads * QUAD
    out = np.empty((c, h, w), dtype=bool)
    band = (h * w) // QUAD
    per_quad = mask_r[:n].reshape(quads, QUAD)
    # (g, s) -> every original channel of quad g, band s
    spread = np.broadcast_to(per_quad[:, None, :, None], (quads, QUAD, QUAD, band))
    out[:n] = spread.reshape(n, h, w)
    out[n:] = mask_r[n:, None, None]
    return out


def channel_mask_to_elements(mask, dims: tuple[int, int, int]) -> np.ndarray:
    """Element mask for an unrearranged latent: whole channels on or off."""
    c, h, w = dims
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (c,):
        raise DimensionError(f"mask length {mask.shape} does not match C={c}")
    return np.broadcast_to(mask[:, None, None], (c, h, w)).copy()


def apply_channel_mask(latent_r: np.ndarray, mask_r) -> np.ndarray:
    """Zero every channel whose mask bit is false."""
    mask_r = np.asarray(mask_r, dtype=bool)
    if mask_r.shape != (latent_r.shape[0],):
        raise DimensionError(
            f"mask length {mask_r.shape} does not match C={latent_r.shape[0]}"
        )
    return latent_r * mask_r[:, None, None].astype(latent_r.dtype)
