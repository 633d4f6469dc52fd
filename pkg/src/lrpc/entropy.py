"""Per-channel entropy coding.

Each channel is coded on its own with a zero-mean discretized Laplacian
whose scale comes from an 8-bit code ``L`` carried in the base layer:
``sigma = 2 ** ((L - 128) / 8)``; ``L == 0`` marks an all-zero channel with an
empty payload. Probabilities are 16-bit integers (every symbol at least 1),
and the coder is a byte-oriented range coder with carry propagation
(32-bit range, renormalised below 2**24).

Payload format (frozen): the encoder's output bytes, most significant first,
without the always-zero leading carry byte. A payload of ``n`` bytes is
consumed completely by the decoder; reading past the end or leaving bytes
unread is a :class:`DecodeError`.
"""

from __future__ import annotations

import functools
import math

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - pure Python fallback
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

ALPHABET_MIN = -255
ALPHABET_MAX = 255
ALPHABET = ALPHABET_MAX - ALPHABET_MIN + 1
PROB_BITS = 16
PROB_TOTAL = 1 << PROB_BITS
MAX_CODE = 255

_TOP = 1 << 24
_MASK32 = 0xFFFFFFFF


class DecodeError(ValueError):
    pass


def scale_of(code: int) -> float:
    if not 1 <= code <= MAX_CODE:
        raise ValueError(f"scale code {code} has no scale")
    return 2.0 ** ((code - 128) / 8.0)


def estimate_scale(values) -> int:
    """Scale code for a channel by Laplacian moment matching."""
    values = np.asarray(values)
    if values.size == 0 or not values.any():
        return 0
    sigma = math.sqrt(2.0) * float(np.abs(values).mean())
    code = math.floor(128.0 + 8.0 * math.log2(sigma) + 0.5)
    return min(max(code, 1), MAX_CODE)


def laplace_masses(sigma: float) -> np.ndarray:
    """Probability of each symbol in ``[-255, 255]``, tails folded in."""
    b = sigma / math.sqrt(2.0)
    mags = np.arange(ALPHABET_MAX + 1, dtype=np.float64)
    half = np.empty_like(mags)
    half[0] = -np.expm1(-0.5 / b)
    half[1:] = 0.5 * np.exp(-(mags[1:] - 0.5) / b) * -np.expm1(-1.0 / b)
    half[-1] = 0.5 * np.exp(-(ALPHABET_MAX - 0.5) / b)
    return np.concatenate([half[:0:-1], half])


@functools.lru_cache(maxsize=None)
def model_table(code: int) -> np.ndarray:
    """Cumulative 16-bit frequencies (length 512) for scale code ``code``."""
    p = laplace_masses(scale_of(code))
    freq = 1 + np.floor(p * (PROB_TOTAL - ALPHABET)).astype(np.int64)
    freq[int(np.argmax(freq))] += PROB_TOTAL - int(freq.sum())
    cum = np.zeros(ALPHABET + 1, dtype=np.int64)
    np.cumsum(freq, out=cum[1:])
    cum.setflags(write=False)
    return cum


def model_freqs(code: int) -> np.ndarray:
    return np.diff(model_table(code))


@njit(cache=True)
def _encode_kernel(symbols, cum):
    out = np.empty(symbols.size * 2 + 16, dtype=np.uint8)
    pos = 0
    low = np.uint64(0)
    rng = np.uint64(_MASK32)
    cache = np.uint64(0)
    cache_size = 1
    for i in range(symbols.size + 5):
        if i < symbols.size:
            s = symbols[i]
            r = rng >> np.uint64(16)
            low += r * np.uint64(cum[s])
            rng = r * np.uint64(cum[s + 1] - cum[s])
            shifts = 0
            while rng < np.uint64(_TOP):
                rng <<= np.uint64(8)
                shifts += 1
        else:
            shifts = 1
        for _ in range(shifts):
            # shift the top byte of low out, resolving any pending carry
            if low < np.uint64(0xFF000000) or low > np.uint64(_MASK32):
                carry = low >> np.uint64(32)
                temp = cache
                while True:
                    if pos == out.size:
                        grown = np.empty(out.size * 2, dtype=np.uint8)
                        grown[:pos] = out[:pos]
                        out = grown
                    out[pos] = np.uint8((temp + carry) & np.uint64(0xFF))
                    pos += 1
                    temp = np.uint64(0xFF)
                    cache_size -= 1
                    if cache_size == 0:
                        break
                cache = (low >> np.uint64(24)) & np.uint64(0xFF)
            cache_size += 1
            low = (low & np.uint64(0x00FFFFFF)) << np.uint64(8)
    return out[1:pos]


@njit(cache=True)
def _decode_kernel(data, cum, count, out):
    """Returns 0 on success, -1 on overrun, -2 on an impossible code, -3 on trailing bytes."""
    n = data.size
    if n < 4:
        return -1
    code = np.uint64(0)
    for i in range(4):
        code = (code << np.uint64(8)) | np.uint64(data[i])
    pos = 4
    rng = np.uint64(_MASK32)
    for i in range(count):
        r = rng >> np.uint64(16)
        t = code // r
        if t >= np.uint64(cum[cum.size - 1]):
            return -2
        lo = 0
        hi = cum.size - 1
        while hi - lo > 1:
            mid = (lo + hi) >> 1
            if np.uint64(cum[mid]) <= t:
                lo = mid
            else:
                hi = mid
        out[i] = lo
        code -= r * np.uint64(cum[lo])
        rng = r * np.uint64(cum[lo + 1] - cum[lo])
        while rng < np.uint64(_TOP):
            if pos >= n:
                return -1
            code = ((code << np.uint64(8)) | np.uint64(data[pos])) & np.uint64(_MASK32)
            rng <<= np.uint64(8)
            pos += 1
    if pos != n:
        return -3
    return 0


def _symbols(values) -> np.ndarray:
    values = np.asarray(values).ravel()
    if values.size and (values.min() < ALPHABET_MIN or values.max() > ALPHABET_MAX):
        raise ValueError("channel values outside [-255, 255]")
    return values.astype(np.int64) - ALPHABET_MIN


def encode_channel(values, code: int) -> bytes:
    """Entropy-code one channel with scale code ``code``."""
    symbols = _symbols(values)
    if code == 0:
        if symbols.size and np.any(symbols != -ALPHABET_MIN):
            raise ValueError("scale code 0 is reserved for all-zero channels")
        return b""
    if symbols.size == 0:
        return b""
    return _encode_kernel(symbols, model_table(code)).tobytes()


def decode_channel(payload: bytes, code: int, count: int) -> np.ndarray:
    """Decode ``count`` values from ``payload``; raises :class:`DecodeError` on bad input."""
    if code == 0 or count == 0:
        if payload:
            raise DecodeError(f"{len(payload)} payload bytes for an empty channel")
        return np.zeros(count, dtype=np.int16)
    if not 1 <= code <= MAX_CODE:
        raise DecodeError(f"invalid scale code {code}")
    data = np.frombuffer(bytes(payload), dtype=np.uint8)
    out = np.empty(count, dtype=np.int64)
    status = _decode_kernel(data, model_table(code), count, out)
    if status == -1:
        raise DecodeError("payload truncated")
    if status == -2:
        raise DecodeError("payload corrupt")
    if status == -3:
        raise DecodeError("trailing bytes after the last symbol")
    return (out + ALPHABET_MIN).astype(np.int16)


def model_bits(values, code: int) -> float:
    """Ideal code length in bits of ``values`` under the quantized model."""
    symbols = _symbols(values)
    if code == 0:
        return 0.0
    freqs = model_freqs(code)
    return float(np.sum(PROB_BITS - np.log2(freqs[symbols])))


def estimate_size(values, code: int) -> int:
    """Byte estimate used by the packetizer's greedy pass."""
    if code == 0 or np.asarray(values).size == 0:
        return 0
    return math.ceil(model_bits(values, code) / 8.0) + 2
