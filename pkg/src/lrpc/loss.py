"""Packet-loss processes: i.i.d. uniform loss and the Gilbert-Elliott chain.

Gilbert-Elliott parameters follow the usual ``[p, r, h, k]`` convention:
``p = P(B | G)``, ``r = P(G | B)``, ``k = P(no loss | G)``,
``h = P(no loss | B)``. Each step first emits a loss decision from the
current state and then transitions.

Randomness comes from numpy's PCG64. A trial with seed ``s`` owns
``np.random.default_rng(s)``; trial ``t`` of an experiment with master seed
``m`` uses ``s = m + t``, so traces do not depend on how trials are
scheduled.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import warnings

import numpy as np

from .container import TYPE_BASE

GOOD = "G"
BAD = "B"


class LossSpecError(ValueError):
    pass


def _check_prob(name, value):
    if not 0.0 <= value <= 1.0:
        raise LossSpecError(f"{name}={value} is not a probability")


@dataclasses.dataclass(frozen=True)
class UniformParams:
    pe: float

    def __post_init__(self):
        _check_prob("p_e", self.pe)

    def spec(self) -> str:
        return f"uniform:{self.pe:g}"


@dataclasses.dataclass(frozen=True)
class GEParams:
    p: float
    r: float
    h: float
    k: float

    def __post_init__(self):
        for name in ("p", "r", "h", "k"):
            _check_prob(name, getattr(self, name))
        if self.h >= self.k:
            warnings.warn(f"GE parameters h={self.h} >= k={self.k}: the Bad state "
                          "is not lossier than the Good state", stacklevel=3)

    def spec(self) -> str:
        return f"ge:{self.p:g},{self.r:g},{self.h:g},{self.k:g}"


# Published channel settings: the 10% set used in training and the 15% set
# used in evaluation.
GE_10 = GEParams(p=0.378, r=0.883, h=0.810, k=0.938)
GE_15 = GEParams(p=0.417, r=0.973, h=0.620, k=0.948)


def parse_loss_spec(text: str):
    """``uniform:<p_e>`` or ``ge:<p>,<r>,<h>,<k>``."""
    kind, _, args = text.strip().partition(":")
    try:
        values = [float(v) for v in args.split(",")] if args else []
    except ValueError as exc:
        raise LossSpecError(f"bad loss spec {text!r}") from exc
    if kind == "uniform" and len(values) == 1:
        return UniformParams(values[0])
    if kind == "ge" and len(values) == 4:
        return GEParams(*values)
    raise LossSpecError(f"bad loss spec {text!r}; expected uniform:<p_e> or ge:<p>,<r>,<h>,<k>")


def stationary_loss_rate(params) -> float:
    if isinstance(params, UniformParams):
        return params.pe
    total = params.p + params.r
    if total == 0:
        raise ValueError("p = r = 0: the chain has no stationary distribution")
    pi_good = params.r / total
    pi_bad = params.p / total
    return pi_good * (1.0 - params.k) + pi_bad * (1.0 - params.h)


def ge_step(state: str, params: GEParams, rng: np.random.Generator):
    """One step: ``(lost, next_state)``."""
    keep = params.k if state == GOOD else params.h
    lost = bool(rng.random() >= keep)
    if state == GOOD:
        nxt = BAD if rng.random() < params.p else GOOD
    else:
        nxt = GOOD if rng.random() < params.r else BAD
    return lost, nxt


def initial_state(params: GEParams, rng: np.random.Generator) -> str:
    total = params.p + params.r
    pi_bad = params.p / total if total else 0.0
    return BAD if rng.random() < pi_bad else GOOD


def simulate(params, n: int, rng: np.random.Generator):
    """``n`` loss decisions; returns ``(lost, states)`` as arrays.

    ``states`` holds the state each decision was drawn in (empty for the
    uniform model). Draw order matches repeated :func:`ge_step` calls after
    :func:`initial_state`.
    """
    if isinstance(params, UniformParams):
        return rng.random(n) < params.pe, np.array([], dtype="<U1")
    state = initial_state(params, rng)
    u = rng.random((n, 2))
    bad = np.empty(n, dtype=bool)
    is_bad = state == BAD
    for i in range(n):
        bad[i] = is_bad
        if is_bad:
            is_bad = not (u[i, 1] < params.r)
        else:
            is_bad = u[i, 1] < params.p
    keep = np.where(bad, params.h, params.k)
    lost = u[:, 0] >= keep
    return lost, np.where(bad, BAD, GOOD)


@dataclasses.dataclass
class LossTrace:
    seed: int
    seqs: list[int]
    lost: list[bool]
    states: list[str]

    @property
    def loss_count(self) -> int:
        return sum(self.lost)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["seq", "lost", "state"])
        for i, (seq, lost) in enumerate(zip(self.seqs, self.lost)):
            writer.writerow([seq, int(lost), self.states[i] if self.states else ""])
        return buf.getvalue()


def apply_loss(packets, params, seed: int):
    """Drop payload packets; base fragments always get through.

    Returns ``(survivors, trace)``; the trace covers payload packets only, in
    transmission order.
    """
    rng = np.random.default_rng(seed)
    payload = [p for p in packets if p.ptype != TYPE_BASE]
    lost, states = simulate(params, len(payload), rng)
    dropped = {p.seq for p, gone in zip(payload, lost) if gone}
    survivors = [p for p in packets if p.seq not in dropped]
    trace = LossTrace(seed, [p.seq for p in payload], [bool(x) for x in lost],
                      [str(s) for s in states])
    return survivors, trace
